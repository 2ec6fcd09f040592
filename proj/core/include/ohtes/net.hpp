#pragma once

// Dense multilayer perceptrons for actors and critics: forward pass, exact
// backward pass, Adam and Polyak averaging. Templated on the scalar type so
// training runs in float while gradient checks can run the same code in double.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ohtes/errors.hpp"
#include "ohtes/rng.hpp"

namespace ohtes::net {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatrixF = Matrix<float>;

enum class OutputActivation { kIdentity, kTanh };

/// Parameters of a ReLU network. Layer l maps fan_in = layer_sizes[l] to
/// fan_out = layer_sizes[l + 1]; weights[l] is fan_in x fan_out so a batch with
/// one sample per row propagates as X * W + b. A tanh head is scaled by
/// output_scale (the action bound for actors).
template <typename T>
struct BasicMlp {
  std::vector<int> layer_sizes;
  std::vector<Matrix<T>> weights;
  std::vector<RowVector<T>> biases;
  OutputActivation output_activation = OutputActivation::kIdentity;
  T output_scale = T(1);

  std::size_t num_layers() const { return weights.size(); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  // Tensors are ordered W0, b0, W1, b1, ...
  std::size_t tensor_count() const { return 2 * weights.size(); }
  std::span<T> tensor(std::size_t i) {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
  }
  std::span<const T> tensor(std::size_t i) const {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
  }

  std::vector<T> flatten() const {
    std::vector<T> flat;
    flat.reserve(parameter_count());
    for (std::size_t i = 0; i < tensor_count(); ++i) {
      auto t = tensor(i);
      flat.insert(flat.end(), t.begin(), t.end());
    }
    return flat;
  }

  void assign_flat(std::span<const T> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("assign_flat: size mismatch");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < tensor_count(); ++i) {
      auto t = tensor(i);
      std::copy(flat.begin() + offset, flat.begin() + offset + t.size(), t.begin());
      offset += t.size();
    }
  }

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out;
    out.layer_sizes = layer_sizes;
    out.output_activation = output_activation;
    out.output_scale = static_cast<U>(output_scale);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.weights.push_back(weights[l].template cast<U>());
      out.biases.push_back(biases[l].template cast<U>());
    }
    return out;
  }

  bool same_shape(const BasicMlp& other) const { return layer_sizes == other.layer_sizes; }
};

using Mlp = BasicMlp<float>;

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn row-major layer by layer
/// from a stream seeded with `seed`; biases zero.
template <typename T>
BasicMlp<T> mlp_init(std::span<const int> layer_sizes, OutputActivation output, T output_scale,
                     std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp_init: need at least two layer sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("mlp_init: layer sizes must be positive");
  BasicMlp<T> mlp;
  mlp.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  mlp.output_activation = output;
  mlp.output_scale = output_scale;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix<T> w(fan_in, fan_out);
    for (int r = 0; r < fan_in; ++r)
      for (int c = 0; c < fan_out; ++c) w(r, c) = static_cast<T>(rng.uniform(-bound, bound));
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(RowVector<T>::Zero(fan_out));
  }
  return mlp;
}

template <typename T>
BasicMlp<T> mlp_init(std::initializer_list<int> layer_sizes, OutputActivation output, T output_scale,
                     std::uint64_t seed) {
  std::vector<int> sizes(layer_sizes);
  return mlp_init<T>(std::span<const int>(sizes), output, output_scale, seed);
}

/// Activations retained by a forward pass for the backward pass.
template <typename T>
struct ForwardCache {
  std::vector<Matrix<T>> layer_inputs;  // input to layer l (post-activation of l-1)
  Matrix<T> head_pre;                   // pre-activation of the output layer
  Matrix<T> output;
};

/// Batched forward pass; `inputs` holds one sample per row.
template <typename T>
Matrix<T> mlp_forward(const BasicMlp<T>& mlp, const Matrix<T>& inputs, ForwardCache<T>* cache = nullptr) {
  if (inputs.cols() != mlp.input_dim())
    throw std::invalid_argument("mlp_forward: expected input width " + std::to_string(mlp.input_dim()) +
                                ", got " + std::to_string(inputs.cols()));
  if (cache != nullptr) cache->layer_inputs.clear();
  Matrix<T> x = inputs;
  const std::size_t last = mlp.num_layers() - 1;
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    Matrix<T> z(x.rows(), mlp.weights[l].cols());
    z.noalias() = x * mlp.weights[l];
    z.rowwise() += mlp.biases[l];
    if (cache != nullptr) cache->layer_inputs.push_back(std::move(x));
    if (l < last) {
      x = z.cwiseMax(T(0));
    } else {
      if (cache != nullptr) cache->head_pre = z;
      if (mlp.output_activation == OutputActivation::kTanh)
        x = (z.array().tanh() * mlp.output_scale).matrix();
      else
        x = std::move(z);
    }
  }
  if (cache != nullptr) cache->output = x;
  return x;
}

template <typename T>
std::vector<T> mlp_forward(const BasicMlp<T>& mlp, std::span<const T> input) {
  if (static_cast<int>(input.size()) != mlp.input_dim())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  Matrix<T> x(1, mlp.input_dim());
  for (int i = 0; i < mlp.input_dim(); ++i) x(0, i) = input[i];
  Matrix<T> y = mlp_forward(mlp, x);
  return std::vector<T>(y.data(), y.data() + y.size());
}

template <typename T>
struct MlpGradients {
  std::vector<Matrix<T>> weights;
  std::vector<RowVector<T>> biases;
  Matrix<T> input;

  std::size_t tensor_count() const { return 2 * weights.size(); }
  std::span<const T> tensor(std::size_t i) const {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
  }
  std::span<T> tensor(std::size_t i) {
    if (i % 2 == 0) return {weights[i / 2].data(), static_cast<std::size_t>(weights[i / 2].size())};
    return {biases[i / 2].data(), static_cast<std::size_t>(biases[i / 2].size())};
  }
  std::vector<T> flatten() const {
    std::vector<T> flat;
    for (std::size_t i = 0; i < tensor_count(); ++i) {
      auto t = tensor(i);
      flat.insert(flat.end(), t.begin(), t.end());
    }
    return flat;
  }
};

enum class GradientScope { kParametersAndInput, kInputOnly };

/// Gradients of sum_batch <upstream, output> with respect to every parameter and
/// to the inputs, reusing the activations of a prior forward pass.
template <typename T>
MlpGradients<T> mlp_backward(const BasicMlp<T>& mlp, const ForwardCache<T>& cache, const Matrix<T>& upstream,
                             GradientScope scope = GradientScope::kParametersAndInput) {
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
    throw std::invalid_argument("mlp_backward: upstream shape does not match output");
  const bool want_params = scope == GradientScope::kParametersAndInput;
  const std::size_t layers = mlp.num_layers();
  MlpGradients<T> grads;
  if (want_params) {
    grads.weights.resize(layers);
    grads.biases.resize(layers);
  }
  Matrix<T> delta;
  if (mlp.output_activation == OutputActivation::kTanh) {
    auto t = cache.head_pre.array().tanh();
    delta = (upstream.array() * mlp.output_scale * (T(1) - t * t)).matrix();
  } else {
    delta = upstream;
  }
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix<T>& x = cache.layer_inputs[l];
    if (want_params) {
      grads.weights[l].noalias() = x.transpose() * delta;
      grads.biases[l] = delta.colwise().sum();
    }
    Matrix<T> dx(delta.rows(), mlp.weights[l].rows());
    dx.noalias() = delta * mlp.weights[l].transpose();
    if (l > 0) {
      // x is the ReLU output of layer l-1, so x > 0 exactly where the unit was active.
      delta = (dx.array() * (x.array() > T(0)).template cast<T>()).matrix();
    } else {
      grads.input = std::move(dx);
    }
  }
  return grads;
}

template <typename T>
MlpGradients<T> mlp_gradients(const BasicMlp<T>& mlp, const Matrix<T>& inputs, const Matrix<T>& upstream) {
  if (upstream.rows() != inputs.rows() || upstream.cols() != mlp.output_dim())
    throw std::invalid_argument("mlp_gradients: upstream must be batch x output_dim");
  ForwardCache<T> cache;
  mlp_forward(mlp, inputs, &cache);
  return mlp_backward(mlp, cache, upstream);
}

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
AdamState<T> adam_init(const BasicMlp<T>& mlp) {
  AdamState<T> state;
  for (std::size_t i = 0; i < mlp.tensor_count(); ++i) {
    state.m.emplace_back(mlp.tensor(i).size(), T(0));
    state.v.emplace_back(mlp.tensor(i).size(), T(0));
  }
  return state;
}

template <typename T>
AdamState<T> adam_init(std::size_t size) {
  AdamState<T> state;
  state.m.emplace_back(size, T(0));
  state.v.emplace_back(size, T(0));
  return state;
}

namespace detail {

template <typename T>
void adam_apply(std::span<T> params, std::span<const T> grads, std::vector<T>& m, std::vector<T>& v,
                const AdamState<T>& state, double lr, double c1, double c2) {
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(params.size());
  Eigen::Map<Array> p(params.data(), n);
  Eigen::Map<const Array> g(grads.data(), n);
  Eigen::Map<Array> mm(m.data(), n);
  Eigen::Map<Array> vv(v.data(), n);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  mm = b1 * mm + (T(1) - b1) * g;
  vv = b2 * vv + (T(1) - b2) * g.square();
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.epsilon);
  p -= step * mm / ((vv * inv_c2).sqrt() + eps);
}

}  // namespace detail

/// One Adam descent step with bias correction over all tensors of `mlp`.
/// Throws NumericError (leaving params and state untouched) on non-finite gradients.
template <typename T>
void adam_step(BasicMlp<T>& mlp, const MlpGradients<T>& grads, AdamState<T>& state, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("adam_step: learning rate must be >= 0");
  if (grads.tensor_count() != mlp.tensor_count() || state.m.size() != mlp.tensor_count())
    throw std::invalid_argument("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < mlp.tensor_count(); ++i) {
    if (grads.tensor(i).size() != mlp.tensor(i).size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (!all_finite(grads.tensor(i))) throw NumericError("adam_step: non-finite gradient");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < mlp.tensor_count(); ++i)
    detail::adam_apply<T>(mlp.tensor(i), grads.tensor(i), state.m[i], state.v[i], state, lr, c1, c2);
}

/// Single flat-vector variant (tuner logits, meta learning rates).
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("adam_step: learning rate must be >= 0");
  if (state.m.size() != 1 || state.m[0].size() != params.size() || grads.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!all_finite(grads)) throw NumericError("adam_step: non-finite gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  detail::adam_apply<T>(params, grads, state.m[0], state.v[0], state, lr, c1, c2);
}

/// target <- (1 - rho) * target + rho * online, elementwise.
template <typename T>
void polyak_update(BasicMlp<T>& target, const BasicMlp<T>& online, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("polyak_update: rho must lie in [0, 1]");
  if (!target.same_shape(online)) throw std::invalid_argument("polyak_update: shape mismatch");
  const T keep = static_cast<T>(1.0 - rho);
  const T take = static_cast<T>(rho);
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = keep * target.weights[l] + take * online.weights[l];
    target.biases[l] = keep * target.biases[l] + take * online.biases[l];
  }
}

// Snapshot format (little-endian): u32 count, u32 layer_sizes[count], then for
// each layer the fan_in x fan_out weights row-major followed by the biases, all f32.
void write_snapshot(std::ostream& out, const Mlp& mlp);
Mlp read_snapshot(std::istream& in, OutputActivation output, float output_scale);

}  // namespace ohtes::net
