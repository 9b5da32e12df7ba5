#ifndef HSIAD_NN_LAYERS_HPP
#define HSIAD_NN_LAYERS_HPP

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "hsiad/nn/tensor.hpp"

namespace hsiad::nn {

enum class LayerKind : std::uint8_t { Conv, Deconv, BatchNorm, LeakyRelu, Tanh, Sigmoid, GlobalAvgPool, Linear };

const char* kind_name(LayerKind kind);

/// Declarative layer description. Kernel sizes and channel counts apply to
/// conv, deconv and linear; deconv additionally pins its output size, which
/// must be a legal conv input for the same kernel/stride/padding.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  Index kernel_w = 0;
  Index kernel_h = 0;
  Index in_channels = 0;
  Index out_channels = 0;
  Index stride_w = 1;
  Index stride_h = 1;
  Index pad_w = 0;
  Index pad_h = 0;
  Index out_h = 0;
  Index out_w = 0;
  double slope = 0.2;

  static LayerSpec conv(Index kw, Index kh, Index in, Index out, Index sw, Index sh, Index pw, Index ph) {
    return {LayerKind::Conv, kw, kh, in, out, sw, sh, pw, ph, 0, 0, 0.2};
  }
  static LayerSpec deconv(Index kw, Index kh, Index in, Index out, Index sw, Index sh, Index pw, Index ph,
                          Index out_h, Index out_w) {
    return {LayerKind::Deconv, kw, kh, in, out, sw, sh, pw, ph, out_h, out_w, 0.2};
  }
  static LayerSpec linear(Index in, Index out) { return {LayerKind::Linear, 0, 0, in, out}; }
  static LayerSpec simple(LayerKind kind, double slope = 0.2) {
    LayerSpec s;
    s.kind = kind;
    s.slope = slope;
    return s;
  }
  bool operator==(const LayerSpec&) const = default;
};

template <typename Scalar>
struct Parameter {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  explicit Parameter(Matrix<Scalar> v) : value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}
};

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Batch<Scalar> backward(const Batch<Scalar>& grad) = 0;
  virtual std::vector<Parameter<Scalar>*> parameters() { return {}; }
  /// Non-trainable state (BN running statistics).
  virtual std::vector<Matrix<Scalar>*> buffers() { return {}; }
};

namespace detail {

/// Cross-correlation geometry plus the gather table mapping every im2col entry
/// (row = (c*kh + ki)*kw + kj, col = output position) to a source offset, or -1
/// where the window hits padding.
struct ConvGeometry {
  Shape in;
  Shape out;
  Index kh = 1, kw = 1;
  std::vector<Index> gather;

  ConvGeometry() = default;
  ConvGeometry(const Shape& input, Index out_channels, const LayerSpec& s) : in(input), kh(s.kernel_h), kw(s.kernel_w) {
    const Index ho_num = in.height + 2 * s.pad_h - s.kernel_h;
    const Index wo_num = in.width + 2 * s.pad_w - s.kernel_w;
    if (ho_num < 0 || wo_num < 0) throw ShapeError("kernel larger than padded input " + in.str());
    out = {out_channels, ho_num / s.stride_h + 1, wo_num / s.stride_w + 1};
    const Index rows = in.channels * kh * kw;
    const Index cols = out.plane();
    gather.assign(static_cast<std::size_t>(rows * cols), -1);
    for (Index c = 0; c < in.channels; ++c)
      for (Index ki = 0; ki < kh; ++ki)
        for (Index kj = 0; kj < kw; ++kj) {
          const Index r = (c * kh + ki) * kw + kj;
          for (Index oy = 0; oy < out.height; ++oy) {
            const Index y = oy * s.stride_h - s.pad_h + ki;
            if (y < 0 || y >= in.height) continue;
            for (Index ox = 0; ox < out.width; ++ox) {
              const Index x = ox * s.stride_w - s.pad_w + kj;
              if (x < 0 || x >= in.width) continue;
              gather[static_cast<std::size_t>(r + (oy * out.width + ox) * rows)] = (c * in.height + y) * in.width + x;
            }
          }
        }
  }

  Index col_rows() const { return in.channels * kh * kw; }

  /// im2col of every sample, concatenated horizontally.
  template <typename Scalar>
  Matrix<Scalar> lower(const Matrix<Scalar>& x) const {
    const Index per = out.plane();
    Matrix<Scalar> cols(col_rows(), per * x.cols());
    const Index n = col_rows() * per;
    for (Index b = 0; b < x.cols(); ++b) {
      const Scalar* src = x.col(b).data();
      Scalar* dst = cols.data() + b * n;
      for (Index k = 0; k < n; ++k) {
        const Index g = gather[static_cast<std::size_t>(k)];
        dst[k] = g >= 0 ? src[g] : Scalar(0);
      }
    }
    return cols;
  }

  /// Adjoint of lower(): scatter-add columns back into input layout.
  template <typename Scalar>
  Matrix<Scalar> raise(const Matrix<Scalar>& cols, Index count) const {
    Matrix<Scalar> x = Matrix<Scalar>::Zero(in.size(), count);
    const Index n = col_rows() * out.plane();
    for (Index b = 0; b < count; ++b) {
      const Scalar* src = cols.data() + b * n;
      Scalar* dst = x.col(b).data();
      for (Index k = 0; k < n; ++k) {
        const Index g = gather[static_cast<std::size_t>(k)];
        if (g >= 0) dst[g] += src[k];
      }
    }
    return x;
  }
};

/// (channels*positions) x B  <->  channels x (B*positions)
template <typename Scalar>
Matrix<Scalar> to_channel_rows(const Matrix<Scalar>& x, Index channels, Index positions) {
  Matrix<Scalar> out(channels, positions * x.cols());
  for (Index b = 0; b < x.cols(); ++b)
    out.middleCols(b * positions, positions) =
        Eigen::Map<const Matrix<Scalar>>(x.col(b).data(), positions, channels).transpose();
  return out;
}

template <typename Scalar>
Matrix<Scalar> from_channel_rows(const Matrix<Scalar>& y, Index channels, Index positions) {
  const Index count = y.cols() / positions;
  Matrix<Scalar> out(channels * positions, count);
  for (Index b = 0; b < count; ++b)
    Eigen::Map<Matrix<Scalar>>(out.col(b).data(), positions, channels) =
        y.middleCols(b * positions, positions).transpose();
  return out;
}

template <typename Scalar>
Matrix<Scalar> normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(dist(rng));
  return m;
}

inline void require_input(const Shape& got, const Shape& want, const char* what) {
  if (!(got == want)) throw ShapeError(std::string(what) + " expects " + want.str() + ", got " + got.str());
}

inline void require_cached(bool ok) {
  if (!ok) throw Error("backward called without a matching forward pass");
}

}  // namespace detail

constexpr double kInitStd = 0.02;

/// Cross-correlation with weight matrix Cout x (Cin*kh*kw).
template <typename Scalar>
class Conv : public Layer<Scalar> {
 public:
  Conv(const LayerSpec& spec, const Shape& in, std::mt19937_64& rng)
      : spec_(spec), geom_(in, spec.out_channels, spec),
        weight_(detail::normal_init<Scalar>(spec.out_channels, spec.in_channels * spec.kernel_h * spec.kernel_w, kInitStd, rng)),
        bias_(Matrix<Scalar>::Zero(spec.out_channels, 1)) {
    detail::require_input({spec.in_channels, in.height, in.width}, in, "conv");
  }

  Shape output_shape(const Shape&) const override { return geom_.out; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    detail::require_input(x.shape, geom_.in, "conv");
    cols_ = geom_.lower(x.data);
    Matrix<Scalar> y = weight_.value * cols_;
    y.colwise() += bias_.value.col(0);
    cached_ = true;
    return {geom_.out, detail::from_channel_rows(y, geom_.out.channels, geom_.out.plane())};
  }

  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(cached_);
    const Matrix<Scalar> g = detail::to_channel_rows(grad.data, geom_.out.channels, geom_.out.plane());
    weight_.grad.noalias() += g * cols_.transpose();
    bias_.grad += g.rowwise().sum();
    const Matrix<Scalar> dcols = weight_.value.transpose() * g;
    return {geom_.in, geom_.raise(dcols, grad.count())};
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&weight_, &bias_}; }

 private:
  LayerSpec spec_;
  detail::ConvGeometry geom_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> cols_;
  bool cached_ = false;
};

/// Transposed convolution: the adjoint of a conv mapping the declared output
/// size back onto the input size. Weight matrix is Cin x (Cout*kh*kw).
template <typename Scalar>
class Deconv : public Layer<Scalar> {
 public:
  Deconv(const LayerSpec& spec, const Shape& in, std::mt19937_64& rng)
      : spec_(spec), geom_({spec.out_channels, spec.out_h, spec.out_w}, spec.in_channels, spec), in_(in),
        weight_(detail::normal_init<Scalar>(spec.in_channels, spec.out_channels * spec.kernel_h * spec.kernel_w, kInitStd, rng)),
        bias_(Matrix<Scalar>::Zero(spec.out_channels, 1)) {
    detail::require_input(geom_.out, in, "deconv (adjoint geometry)");
  }

  Shape output_shape(const Shape&) const override { return geom_.in; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    detail::require_input(x.shape, in_, "deconv");
    x_rows_ = detail::to_channel_rows(x.data, in_.channels, in_.plane());
    const Matrix<Scalar> cols = weight_.value.transpose() * x_rows_;
    Matrix<Scalar> y = geom_.raise(cols, x.count());
    const Index plane = geom_.in.plane();
    for (Index c = 0; c < geom_.in.channels; ++c) y.middleRows(c * plane, plane).array() += bias_.value(c, 0);
    cached_ = true;
    return {geom_.in, std::move(y)};
  }

  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(cached_);
    const Matrix<Scalar> gcols = geom_.lower(grad.data);
    weight_.grad.noalias() += x_rows_ * gcols.transpose();
    const Index plane = geom_.in.plane();
    for (Index c = 0; c < geom_.in.channels; ++c) bias_.grad(c, 0) += grad.data.middleRows(c * plane, plane).sum();
    const Matrix<Scalar> dx = weight_.value * gcols;
    return {in_, detail::from_channel_rows(dx, in_.channels, in_.plane())};
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&weight_, &bias_}; }

 private:
  LayerSpec spec_;
  detail::ConvGeometry geom_;  // geometry of the conv this layer is the adjoint of
  Shape in_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> x_rows_;
  bool cached_ = false;
};

/// Per-channel batch normalization over batch and spatial positions.
template <typename Scalar>
class BatchNorm : public Layer<Scalar> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm(const Shape& in)
      : in_(in), scale_(Matrix<Scalar>::Ones(in.channels, 1)), shift_(Matrix<Scalar>::Zero(in.channels, 1)),
        running_mean_(Matrix<Scalar>::Zero(in.channels, 1)), running_var_(Matrix<Scalar>::Ones(in.channels, 1)) {}

  Shape output_shape(const Shape& in) const override { return in; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode mode) override {
    detail::require_input(x.shape, in_, "batchnorm");
    const Index plane = in_.plane();
    const Scalar count = Scalar(plane * x.count());
    mode_ = mode;
    xhat_.resize(x.data.rows(), x.data.cols());
    inv_std_.resize(in_.channels);
    Batch<Scalar> y(in_, x.count());
    for (Index c = 0; c < in_.channels; ++c) {
      const auto xc = x.data.middleRows(c * plane, plane);
      Scalar mean, var;
      if (mode == Mode::Train) {
        mean = xc.sum() / count;
        var = (xc.array() - mean).square().sum() / count;
        running_mean_(c, 0) = Scalar(kMomentum) * running_mean_(c, 0) + Scalar(1 - kMomentum) * mean;
        running_var_(c, 0) = Scalar(kMomentum) * running_var_(c, 0) + Scalar(1 - kMomentum) * var;
      } else {
        mean = running_mean_(c, 0);
        var = running_var_(c, 0);
      }
      inv_std_(c) = Scalar(1) / std::sqrt(var + Scalar(kEps));
      xhat_.middleRows(c * plane, plane) = (xc.array() - mean) * inv_std_(c);
      y.data.middleRows(c * plane, plane) = (xhat_.middleRows(c * plane, plane).array() * scale_.value(c, 0) + shift_.value(c, 0)).matrix();
    }
    cached_ = true;
    return y;
  }

  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(cached_);
    const Index plane = in_.plane();
    const Scalar count = Scalar(plane * grad.count());
    Batch<Scalar> dx(in_, grad.count());
    for (Index c = 0; c < in_.channels; ++c) {
      const auto g = grad.data.middleRows(c * plane, plane).array();
      const auto xh = xhat_.middleRows(c * plane, plane).array();
      shift_.grad(c, 0) += g.sum();
      scale_.grad(c, 0) += (g * xh).sum();
      const auto dxhat = g * scale_.value(c, 0);
      if (mode_ == Mode::Train) {
        const Scalar sum_d = dxhat.sum();
        const Scalar sum_dx = (dxhat * xh).sum();
        dx.data.middleRows(c * plane, plane) = ((dxhat * count - sum_d - xh * sum_dx) * (inv_std_(c) / count)).matrix();
      } else {
        dx.data.middleRows(c * plane, plane) = (dxhat * inv_std_(c)).matrix();
      }
    }
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&scale_, &shift_}; }
  std::vector<Matrix<Scalar>*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  Shape in_;
  Parameter<Scalar> scale_;
  Parameter<Scalar> shift_;
  Matrix<Scalar> running_mean_;
  Matrix<Scalar> running_var_;
  Matrix<Scalar> xhat_;
  Vector<Scalar> inv_std_;
  Mode mode_ = Mode::Train;
  bool cached_ = false;
};

template <typename Scalar>
class LeakyRelu : public Layer<Scalar> {
 public:
  explicit LeakyRelu(double slope) : slope_(static_cast<Scalar>(slope)) {}
  Shape output_shape(const Shape& in) const override { return in; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    x_ = x.data;
    return {x.shape, (x.data.array() > Scalar(0)).select(x.data.array(), slope_ * x.data.array()).matrix()};
  }
  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(x_.size() > 0);
    return {grad.shape, (x_.array() > Scalar(0)).select(grad.data.array(), slope_ * grad.data.array()).matrix()};
  }

 private:
  Scalar slope_;
  Matrix<Scalar> x_;
};

template <typename Scalar>
class Tanh : public Layer<Scalar> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    y_ = x.data.array().tanh().matrix();
    return {x.shape, y_};
  }
  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(y_.size() > 0);
    return {grad.shape, (grad.data.array() * (Scalar(1) - y_.array().square())).matrix()};
  }

 private:
  Matrix<Scalar> y_;
};

template <typename Scalar>
class Sigmoid : public Layer<Scalar> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    y_ = (Scalar(1) / (Scalar(1) + (-x.data.array()).exp())).matrix();
    return {x.shape, y_};
  }
  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(y_.size() > 0);
    return {grad.shape, (grad.data.array() * y_.array() * (Scalar(1) - y_.array())).matrix()};
  }

 private:
  Matrix<Scalar> y_;
};

/// Channel-wise spatial mean: C x H x W -> C x 1 x 1.
template <typename Scalar>
class GlobalAvgPool : public Layer<Scalar> {
 public:
  explicit GlobalAvgPool(const Shape& in) : in_(in) {}
  Shape output_shape(const Shape& in) const override { return {in.channels, 1, 1}; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    detail::require_input(x.shape, in_, "gap");
    Batch<Scalar> y({in_.channels, 1, 1}, x.count());
    const Index plane = in_.plane();
    for (Index c = 0; c < in_.channels; ++c)
      y.data.row(c) = x.data.middleRows(c * plane, plane).colwise().sum() / Scalar(plane);
    cached_ = true;
    return y;
  }
  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(cached_);
    Batch<Scalar> dx(in_, grad.count());
    const Index plane = in_.plane();
    for (Index c = 0; c < in_.channels; ++c)
      dx.data.middleRows(c * plane, plane).rowwise() = grad.data.row(c) / Scalar(plane);
    return dx;
  }

 private:
  Shape in_;
  bool cached_ = false;
};

/// y = W x + b over the flattened sample.
template <typename Scalar>
class Linear : public Layer<Scalar> {
 public:
  Linear(const LayerSpec& spec, const Shape& in, std::mt19937_64& rng)
      : in_(in), weight_(detail::normal_init<Scalar>(spec.out_channels, spec.in_channels, kInitStd, rng)),
        bias_(Matrix<Scalar>::Zero(spec.out_channels, 1)) {
    if (in.size() != spec.in_channels)
      throw ShapeError("linear expects " + std::to_string(spec.in_channels) + " inputs, got " + in.str());
  }
  Shape output_shape(const Shape&) const override { return {weight_.value.rows(), 1, 1}; }

  Batch<Scalar> forward(const Batch<Scalar>& x, Mode) override {
    detail::require_input(x.shape, in_, "linear");
    x_ = x.data;
    Matrix<Scalar> y = weight_.value * x.data;
    y.colwise() += bias_.value.col(0);
    return {{weight_.value.rows(), 1, 1}, std::move(y)};
  }
  Batch<Scalar> backward(const Batch<Scalar>& grad) override {
    detail::require_cached(x_.size() > 0);
    weight_.grad.noalias() += grad.data * x_.transpose();
    bias_.grad += grad.data.rowwise().sum();
    return {in_, weight_.value.transpose() * grad.data};
  }
  std::vector<Parameter<Scalar>*> parameters() override { return {&weight_, &bias_}; }

 private:
  Shape in_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Matrix<Scalar> x_;
};

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec, const Shape& in, std::mt19937_64& rng) {
  switch (spec.kind) {
    case LayerKind::Conv: return std::make_unique<Conv<Scalar>>(spec, in, rng);
    case LayerKind::Deconv: return std::make_unique<Deconv<Scalar>>(spec, in, rng);
    case LayerKind::BatchNorm: return std::make_unique<BatchNorm<Scalar>>(in);
    case LayerKind::LeakyRelu: return std::make_unique<LeakyRelu<Scalar>>(spec.slope);
    case LayerKind::Tanh: return std::make_unique<Tanh<Scalar>>();
    case LayerKind::Sigmoid: return std::make_unique<Sigmoid<Scalar>>();
    case LayerKind::GlobalAvgPool: return std::make_unique<GlobalAvgPool<Scalar>>(in);
    case LayerKind::Linear: return std::make_unique<Linear<Scalar>>(spec, in, rng);
  }
  throw InvalidArgument("unknown layer kind");
}

inline const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::LeakyRelu: return "lrelu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Linear: return "linear";
  }
  return "?";
}

}  // namespace hsiad::nn

#endif  // HSIAD_NN_LAYERS_HPP
