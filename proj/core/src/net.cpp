#include "ohtes/net.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace ohtes::net {
namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  static_assert(sizeof(U) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.write(bytes, 4);
}

template <typename U>
U get_le(std::istream& in) {
  char bytes[4];
  if (!in.read(bytes, 4)) throw std::runtime_error("read_snapshot: truncated stream");
  std::uint32_t bits;
  std::memcpy(&bits, bytes, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  U value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void write_snapshot(std::ostream& out, const Mlp& mlp) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.layer_sizes.size()));
  for (int s : mlp.layer_sizes) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    const auto& w = mlp.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) put_le<float>(out, w(r, c));
    for (Eigen::Index c = 0; c < mlp.biases[l].size(); ++c) put_le<float>(out, mlp.biases[l](c));
  }
  if (!out) throw std::runtime_error("write_snapshot: stream error");
}

Mlp read_snapshot(std::istream& in, OutputActivation output, float output_scale) {
  const auto count = get_le<std::uint32_t>(in);
  if (count < 2 || count > 64) throw std::runtime_error("read_snapshot: implausible layer count");
  Mlp mlp;
  mlp.output_activation = output;
  mlp.output_scale = output_scale;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = get_le<std::uint32_t>(in);
    if (s == 0 || s > (1u << 24)) throw std::runtime_error("read_snapshot: bad layer size");
    mlp.layer_sizes.push_back(static_cast<int>(s));
  }
  for (std::size_t l = 0; l + 1 < mlp.layer_sizes.size(); ++l) {
    MatrixF w(mlp.layer_sizes[l], mlp.layer_sizes[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get_le<float>(in);
    RowVector<float> b(mlp.layer_sizes[l + 1]);
    for (Eigen::Index c = 0; c < b.size(); ++c) b(c) = get_le<float>(in);
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

}  // namespace ohtes::net
