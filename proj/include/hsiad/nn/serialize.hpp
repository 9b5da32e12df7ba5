#ifndef HSIAD_NN_SERIALIZE_HPP
#define HSIAD_NN_SERIALIZE_HPP

#include <cstdint>
#include <istream>
#include <ostream>

#include "hsiad/nn/network.hpp"

namespace hsiad::nn {

namespace io_detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated network record");
  return v;
}

template <typename Scalar>
void put_matrix(std::ostream& out, const Matrix<Scalar>& m) {
  const Matrix<float> f = m.template cast<float>();
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
}

template <typename Scalar>
void get_matrix(std::istream& in, Matrix<Scalar>& m) {
  Matrix<float> f(m.rows(), m.cols());
  in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!in) throw FormatError("truncated parameter payload");
  m = f.template cast<Scalar>();
}

}  // namespace io_detail

/// Input shape, u32 layer count, one fixed-width record per layer, then every
/// parameter tensor followed by every BN running statistic, float32 LE, in
/// declaration order.
template <typename Scalar>
void write_network(std::ostream& out, Network<Scalar>& net) {
  using namespace io_detail;
  const auto& in = net.input_shape();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(in.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(in.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(in.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.specs().size()));
  for (const auto& s : net.specs()) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(s.kind));
    for (Index v : {s.kernel_w, s.kernel_h, s.in_channels, s.out_channels, s.stride_w, s.stride_h, s.pad_w, s.pad_h,
                    s.out_h, s.out_w})
      put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    put<double>(out, s.slope);
  }
  for (auto* p : net.parameters()) put_matrix(out, p->value);
  for (auto* b : net.buffers()) put_matrix(out, *b);
}

template <typename Scalar>
Network<Scalar> read_network(std::istream& in) {
  using namespace io_detail;
  Shape shape;
  shape.channels = get<std::uint32_t>(in);
  shape.height = get<std::uint32_t>(in);
  shape.width = get<std::uint32_t>(in);
  const auto n = get<std::uint32_t>(in);
  if (n > 4096) throw FormatError("implausible layer count " + std::to_string(n));
  std::vector<LayerSpec> specs(n);
  for (auto& s : specs) {
    const auto kind = get<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::Linear)) throw FormatError("unknown layer kind " + std::to_string(kind));
    s.kind = static_cast<LayerKind>(kind);
    for (Index* v : {&s.kernel_w, &s.kernel_h, &s.in_channels, &s.out_channels, &s.stride_w, &s.stride_h, &s.pad_w,
                     &s.pad_h, &s.out_h, &s.out_w})
      *v = get<std::uint32_t>(in);
    s.slope = get<double>(in);
  }
  Network<Scalar> net(shape, std::move(specs), 0);
  for (auto* p : net.parameters()) get_matrix(in, p->value);
  for (auto* b : net.buffers()) get_matrix(in, *b);
  return net;
}

}  // namespace hsiad::nn

#endif  // HSIAD_NN_SERIALIZE_HPP
