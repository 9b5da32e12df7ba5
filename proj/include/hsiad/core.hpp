#ifndef HSIAD_CORE_HPP
#define HSIAD_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

#include "hsiad/error.hpp"

namespace hsiad {

using Index = Eigen::Index;

/// Single-band image, row-major so that data()[i] follows lexicographic pixel
/// order (left-to-right, top-to-bottom). rows() is the height M1.
template <typename Scalar>
using Raster = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary map, 1 = anomaly.
using Mask = Raster<std::uint8_t>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Hyperspectral cube F of size M1 x M2 x L.
///
/// Pixels are stored as an N x L column-major matrix, which makes every band a
/// contiguous plane (band-sequential layout) while pixel(i) is the spectral
/// vector f_i.
template <typename Scalar>
class Cube {
 public:
  using PixelMatrix = Matrix<Scalar>;
  using BandView = Eigen::Map<const Raster<Scalar>>;
  using MutableBandView = Eigen::Map<Raster<Scalar>>;

  Cube() = default;

  Cube(Index height, Index width, Index bands)
      : height_(height), width_(width), pixels_(PixelMatrix::Zero(height * width, bands)) {
    check_dims();
  }

  Cube(Index height, Index width, PixelMatrix pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    check_dims();
    if (pixels_.rows() != height_ * width_)
      throw ShapeError("cube payload holds " + std::to_string(pixels_.rows()) +
                       " pixels, expected " + std::to_string(height_ * width_));
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index bands() const { return pixels_.cols(); }
  Index pixel_count() const { return pixels_.rows(); }

  const PixelMatrix& pixels() const { return pixels_; }
  PixelMatrix& pixels() { return pixels_; }

  auto pixel(Index i) const { return pixels_.row(i); }

  BandView band(Index b) const { return BandView(pixels_.col(b).data(), height_, width_); }
  MutableBandView band(Index b) { return MutableBandView(pixels_.col(b).data(), height_, width_); }

  Scalar operator()(Index row, Index col, Index b) const { return pixels_(row * width_ + col, b); }
  Scalar& operator()(Index row, Index col, Index b) { return pixels_(row * width_ + col, b); }

  template <typename Other>
  Cube<Other> cast() const {
    return Cube<Other>(height_, width_, pixels_.template cast<Other>().eval());
  }

  bool same_shape(const Cube& other) const {
    return height_ == other.height_ && width_ == other.width_ && bands() == other.bands();
  }

 private:
  void check_dims() const {
    if (height_ < 1 || width_ < 1 || pixels_.cols() < 1)
      throw ShapeError("cube dimensions must be positive");
  }

  Index height_ = 0;
  Index width_ = 0;
  PixelMatrix pixels_;
};

using HsiCube = Cube<double>;

/// Index of the first non-finite entry, or -1.
template <typename Derived>
Index first_non_finite(const Eigen::DenseBase<Derived>& values) {
  const auto& v = values.derived();
  for (Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(static_cast<double>(v.data()[i]))) return i;
  return -1;
}

/// Global affine map of [min, max] onto [-1, 1]; a constant cube maps to 0.
template <typename Scalar>
Cube<Scalar> normalize_cube(const Cube<Scalar>& cube) {
  const Scalar lo = cube.pixels().minCoeff();
  const Scalar hi = cube.pixels().maxCoeff();
  typename Cube<Scalar>::PixelMatrix out;
  if (hi == lo) {
    out.setZero(cube.pixel_count(), cube.bands());
  } else {
    const Scalar scale = Scalar(2) / (hi - lo);
    out = ((cube.pixels().array() - lo) * scale - Scalar(1)).max(Scalar(-1)).min(Scalar(1));
    // Pin the extremes so that repeated normalization is a fixed point.
    for (Index k = 0; k < out.size(); ++k) {
      if (cube.pixels().data()[k] == lo) out.data()[k] = Scalar(-1);
      if (cube.pixels().data()[k] == hi) out.data()[k] = Scalar(1);
    }
  }
  return Cube<Scalar>(cube.height(), cube.width(), std::move(out));
}

template <typename Derived>
bool is_binary(const Eigen::DenseBase<Derived>& r) {
  const auto& a = r.derived();
  for (Index i = 0; i < a.size(); ++i) {
    const auto v = a.data()[i];
    if (v != 0 && v != 1) return false;
  }
  return true;
}

}  // namespace hsiad

#endif  // HSIAD_CORE_HPP
