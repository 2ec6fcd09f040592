#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "ohtes/net.hpp"
#include "oracles.hpp"

using namespace ohtes;
using net::Matrix;
using net::MatrixF;
using net::OutputActivation;

namespace {

Matrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Matrix<double> zeros(Eigen::Index rows, Eigen::Index cols) { return Matrix<double>::Zero(rows, cols); }
MatrixF ones(Eigen::Index rows, Eigen::Index cols) { return MatrixF::Ones(rows, cols); }

}  // namespace

TEST_CASE("mlp_init parameter count and determinism") {
  const auto mlp = net::mlp_init<float>({3, 300, 300, 1}, OutputActivation::kIdentity, 1.0f, 42);
  CHECK(mlp.parameter_count() == 3 * 300 + 300 + 300 * 300 + 300 + 300 * 1 + 1);
  CHECK(net::mlp_init<float>({4, 300, 300, 1}, OutputActivation::kIdentity, 1.0f, 42).parameter_count() == 92101);
  const auto again = net::mlp_init<float>({3, 300, 300, 1}, OutputActivation::kIdentity, 1.0f, 42);
  CHECK(mlp.flatten() == again.flatten());
  const auto other = net::mlp_init<float>({3, 300, 300, 1}, OutputActivation::kIdentity, 1.0f, 43);
  CHECK(mlp.flatten() != other.flatten());

  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(mlp.layer_sizes[l]));
    CHECK(mlp.weights[l].cwiseAbs().maxCoeff() <= bound);
    CHECK(mlp.biases[l].cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("mlp_init rejects bad sizes") {
  CHECK_THROWS_AS(net::mlp_init<float>({3}, OutputActivation::kIdentity, 1.0f, 0), std::invalid_argument);
  CHECK_THROWS_AS(net::mlp_init<float>({3, 0, 1}, OutputActivation::kIdentity, 1.0f, 0), std::invalid_argument);
  CHECK_THROWS_AS(net::mlp_init<float>({3, -2, 1}, OutputActivation::kIdentity, 1.0f, 0), std::invalid_argument);
}

TEST_CASE("zero network outputs zero") {
  auto mlp = net::mlp_init<float>({2, 2}, OutputActivation::kIdentity, 1.0f, 1);
  mlp.weights[0].setZero();
  const std::vector<float> x{3.0f, -7.0f};
  const auto y = net::mlp_forward<float>(mlp, x);
  CHECK(y == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("single linear layer forward") {
  auto mlp = net::mlp_init<double>({1, 1}, OutputActivation::kIdentity, 1.0, 1);
  mlp.weights[0](0, 0) = 2.0;
  mlp.biases[0](0) = 1.0;
  const std::vector<double> x{3.0};
  CHECK(net::mlp_forward<double>(mlp, x)[0] == 7.0);
  CHECK_THROWS_AS(net::mlp_forward<double>(mlp, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("tanh head stays inside its scale") {
  auto mlp = net::mlp_init<float>({3, 16, 2}, OutputActivation::kTanh, 2.0f, 5);
  for (auto& w : mlp.weights) w *= 50.0f;
  Rng rng(1);
  MatrixF x(200, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(10.0 * rng.normal());
  const MatrixF y = net::mlp_forward(mlp, x);
  CHECK(y.maxCoeff() <= 2.0f);
  CHECK(y.minCoeff() >= -2.0f);
}

TEST_CASE("zero upstream gives zero gradients") {
  const auto mlp = net::mlp_init<double>({3, 5, 2}, OutputActivation::kTanh, 1.5, 2);
  Rng rng(3);
  const auto x = random_matrix(4, 3, rng);
  const auto g = net::mlp_gradients(mlp, x, zeros(4, 2));
  for (double v : g.flatten()) CHECK(v == 0.0);
  CHECK(g.input.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicated sample doubles the gradient of a linear layer") {
  const auto mlp = net::mlp_init<double>({3, 2}, OutputActivation::kIdentity, 1.0, 2);
  Rng rng(4);
  const auto x1 = random_matrix(1, 3, rng);
  const auto up1 = random_matrix(1, 2, rng);
  Matrix<double> x2(2, 3), up2(2, 2);
  x2 << x1, x1;
  up2 << up1, up1;
  const auto g1 = net::mlp_gradients(mlp, x1, up1).flatten();
  const auto g2 = net::mlp_gradients(mlp, x2, up2).flatten();
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-14));
}

TEST_CASE("gradients match central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> sizes{1 + static_cast<int>(rng.below(5))};
    const int hidden_layers = static_cast<int>(rng.below(3));
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(1 + static_cast<int>(rng.below(8)));
    sizes.push_back(1 + static_cast<int>(rng.below(3)));
    const auto act = rng.below(2) == 0 ? OutputActivation::kIdentity : OutputActivation::kTanh;
    auto mlp = net::mlp_init<double>(sizes, act, 0.5 + rng.uniform(), rng.next());
    for (auto& b : mlp.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * rng.normal();
    const auto batch = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto x = random_matrix(batch, sizes.front(), rng);
    const auto up = random_matrix(batch, sizes.back(), rng);
    const auto check = oracle::check_gradients(mlp, x, up);
    CAPTURE(trial);
    CHECK(check.checked > 0);
    CHECK(check.max_relative_error < 1e-4);
  }
}

TEST_CASE("mlp_gradients rejects mismatched upstream") {
  const auto mlp = net::mlp_init<double>({3, 4, 2}, OutputActivation::kIdentity, 1.0, 2);
  CHECK_THROWS_AS(net::mlp_gradients(mlp, zeros(3, 3), zeros(3, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(net::mlp_gradients(mlp, zeros(3, 3), zeros(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("adam first step") {
  std::vector<double> p{0.0};
  auto state = net::adam_init<double>(1);
  const std::vector<double> g{1.0};
  net::adam_step<double>(p, g, state, 1e-3);
  CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(state.step == 1);

  std::vector<double> q{0.5};
  auto fresh = net::adam_init<double>(1);
  net::adam_step<double>(q, std::vector<double>{0.0}, fresh, 1e-3);
  CHECK(q[0] == 0.5);
  CHECK(fresh.v[0][0] >= 0.0);
}

TEST_CASE("adam rejects non-finite gradients without touching state") {
  auto mlp = net::mlp_init<float>({2, 3, 1}, OutputActivation::kIdentity, 1.0f, 1);
  auto state = net::adam_init(mlp);
  const auto before = mlp.flatten();
  auto grads = net::mlp_gradients(mlp, ones(1, 2), ones(1, 1));
  grads.weights[1](0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(net::adam_step(mlp, grads, state, 1e-3), NumericError);
  CHECK(mlp.flatten() == before);
  CHECK(state.step == 0);
}

TEST_CASE("adam is deterministic") {
  auto a = net::mlp_init<float>({2, 8, 1}, OutputActivation::kIdentity, 1.0f, 9);
  auto b = a;
  auto sa = net::adam_init(a), sb = net::adam_init(b);
  Rng ra(5), rb(5);
  for (int i = 0; i < 10; ++i) {
    MatrixF xa(4, 2), xb(4, 2);
    for (Eigen::Index k = 0; k < 8; ++k) {
      xa.data()[k] = static_cast<float>(ra.normal());
      xb.data()[k] = static_cast<float>(rb.normal());
    }
    net::adam_step(a, net::mlp_gradients(a, xa, ones(4, 1)), sa, 1e-2);
    net::adam_step(b, net::mlp_gradients(b, xb, ones(4, 1)), sb, 1e-2);
  }
  CHECK(a.flatten() == b.flatten());
}

TEST_CASE("polyak update") {
  auto target = net::mlp_init<float>({1, 1}, OutputActivation::kIdentity, 1.0f, 1);
  auto online = target;
  target.weights[0](0, 0) = 0.0f;
  online.weights[0](0, 0) = 2.0f;
  auto half = target;
  net::polyak_update(half, online, 0.5);
  CHECK(half.weights[0](0, 0) == 1.0f);
  auto full = target;
  net::polyak_update(full, online, 1.0);
  CHECK(full.flatten() == online.flatten());
  auto none = target;
  net::polyak_update(none, online, 0.0);
  CHECK(none.flatten() == target.flatten());
  auto wrong = net::mlp_init<float>({1, 2}, OutputActivation::kIdentity, 1.0f, 1);
  CHECK_THROWS_AS(net::polyak_update(wrong, online, 0.5), std::invalid_argument);
}

TEST_CASE("snapshot round trip and layout") {
  const auto mlp = net::mlp_init<float>({3, 4, 2}, OutputActivation::kTanh, 2.0f, 8);
  std::stringstream buf;
  net::write_snapshot(buf, mlp);
  const std::string bytes = buf.str();
  CHECK(bytes.size() == 4 * (1 + 3 + mlp.parameter_count()));
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data(), 4);
  CHECK(count == 3u);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 16, 4);
  CHECK(first == mlp.weights[0](0, 0));
  float second = 0.0f;
  std::memcpy(&second, bytes.data() + 20, 4);
  CHECK(second == mlp.weights[0](0, 1));

  const auto back = net::read_snapshot(buf, OutputActivation::kTanh, 2.0f);
  CHECK(back.layer_sizes == mlp.layer_sizes);
  CHECK(back.flatten() == mlp.flatten());
}
