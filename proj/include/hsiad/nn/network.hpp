#ifndef HSIAD_NN_NETWORK_HPP
#define HSIAD_NN_NETWORK_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "hsiad/nn/layers.hpp"

namespace hsiad::nn {

inline void validate_spec(const LayerSpec& s, std::size_t index) {
  const bool weighted = s.kind == LayerKind::Conv || s.kind == LayerKind::Deconv || s.kind == LayerKind::Linear;
  const bool spatial = s.kind == LayerKind::Conv || s.kind == LayerKind::Deconv;
  auto fail = [&](const std::string& why) {
    throw InvalidArgument("layer " + std::to_string(index) + " (" + kind_name(s.kind) + "): " + why);
  };
  if (weighted && (s.in_channels < 1 || s.out_channels < 1)) fail("channel counts required");
  if (spatial && (s.kernel_w < 1 || s.kernel_h < 1)) fail("kernel size required");
  if (!spatial && (s.kernel_w != 0 || s.kernel_h != 0)) fail("kernel size only applies to conv/deconv");
  if (!weighted && (s.in_channels != 0 || s.out_channels != 0)) fail("channel counts only apply to weighted layers");
  if (s.stride_w < 1 || s.stride_h < 1) fail("stride must be >= 1");
  if (s.kind == LayerKind::Deconv && (s.out_h < 1 || s.out_w < 1)) fail("deconv needs an output size");
}

/// Ordered layer stack with its parameters and BN running statistics.
template <typename Scalar>
class Network {
 public:
  Network() = default;

  Network(const Shape& input, std::vector<LayerSpec> specs, std::uint64_t seed) : input_(input), specs_(std::move(specs)) {
    std::mt19937_64 rng(seed);
    Shape shape = input_;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      validate_spec(specs_[i], i);
      try {
        layers_.push_back(make_layer<Scalar>(specs_[i], shape, rng));
        shapes_.push_back(shape);
        shape = layers_.back()->output_shape(shape);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
      }
    }
    output_ = shape;
  }

  Network(const Network& other) : Network(other.input_, other.specs_, 0) { copy_state_from(other); }
  Network& operator=(const Network& other) {
    if (this != &other) *this = Network(other);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(input_, specs_, 0);
    auto dst = out.parameters();
    auto src = const_cast<Network*>(this)->parameters();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k]->value = src[k]->value.template cast<Other>();
    auto dbuf = out.buffers();
    auto sbuf = const_cast<Network*>(this)->buffers();
    for (std::size_t k = 0; k < sbuf.size(); ++k) *dbuf[k] = sbuf[k]->template cast<Other>();
    return out;
  }

  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const { return output_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t size() const { return layers_.size(); }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode) {
    if (x.count() == 0) throw InvalidArgument("empty batch");
    Batch<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        h = layers_[i]->forward(h, mode);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
      }
      if (!h.data.allFinite()) throw NonFiniteError("non-finite activation after layer " + std::to_string(i));
    }
    forwarded_ = true;
    return h;
  }

  /// Reverse pass; parameter gradients accumulate until zero_grad().
  Batch<Scalar> backward(const Batch<Scalar>& grad) {
    if (!forwarded_) throw Error("backward called without a matching forward pass");
    Batch<Scalar> g = grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i]->backward(g);
      if (!g.data.allFinite()) throw NonFiniteError("non-finite gradient at layer " + std::to_string(i));
    }
    return g;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.setZero();
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& l : layers_)
      for (auto* p : l->parameters()) out.push_back(p);
    return out;
  }

  std::vector<Matrix<Scalar>*> buffers() {
    std::vector<Matrix<Scalar>*> out;
    for (auto& l : layers_)
      for (auto* b : l->buffers()) out.push_back(b);
    return out;
  }

  Index parameter_count() {
    Index n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  /// Per-layer parameter tensors, used for architecture introspection.
  std::vector<Parameter<Scalar>*> layer_parameters(std::size_t i) { return layers_.at(i)->parameters(); }
  const Shape& layer_input_shape(std::size_t i) const { return shapes_.at(i); }

 private:
  void copy_state_from(const Network& other) {
    auto dst = parameters();
    auto src = const_cast<Network&>(other).parameters();
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k]->value = src[k]->value;
      dst[k]->grad = src[k]->grad;
    }
    auto dbuf = buffers();
    auto sbuf = const_cast<Network&>(other).buffers();
    for (std::size_t k = 0; k < sbuf.size(); ++k) *dbuf[k] = *sbuf[k];
  }

  Shape input_;
  Shape output_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  std::vector<Shape> shapes_;
  bool forwarded_ = false;
};

}  // namespace hsiad::nn

#endif  // HSIAD_NN_NETWORK_HPP
