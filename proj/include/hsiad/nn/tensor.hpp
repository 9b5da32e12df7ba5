#ifndef HSIAD_NN_TENSOR_HPP
#define HSIAD_NN_TENSOR_HPP

#include <string>

#include "hsiad/core.hpp"

namespace hsiad::nn {

struct Shape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  Index plane() const { return height * width; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// A batch of (channels, height, width) tensors, one sample per column, each
/// flattened channel-major then row-major.
template <typename Scalar>
struct Batch {
  Shape shape;
  Matrix<Scalar> data;

  Batch() = default;
  Batch(Shape s, Index count) : shape(s), data(Matrix<Scalar>::Zero(s.size(), count)) {}
  Batch(Shape s, Matrix<Scalar> d) : shape(s), data(std::move(d)) {
    if (data.rows() != shape.size())
      throw ShapeError("batch rows " + std::to_string(data.rows()) + " do not match shape " + shape.str());
  }

  Index count() const { return data.cols(); }

  /// Channel c of sample b as a height x width row-major map.
  auto plane(Index b, Index c) const {
    return Eigen::Map<const Raster<Scalar>>(data.col(b).data() + c * shape.plane(), shape.height, shape.width);
  }
  auto plane(Index b, Index c) {
    return Eigen::Map<Raster<Scalar>>(data.col(b).data() + c * shape.plane(), shape.height, shape.width);
  }
};

enum class Mode { Train, Infer };

}  // namespace hsiad::nn

#endif  // HSIAD_NN_TENSOR_HPP
