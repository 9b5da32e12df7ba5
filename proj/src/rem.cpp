#include "hsiad/rem.hpp"

#include <algorithm>

namespace hsiad {

Raster<double> compute_rem(const HsiCube& original, const HsiCube& reconstruction) {
  if (!original.same_shape(reconstruction)) throw ShapeError("REM needs cubes of identical dimensions");
  const Vector<double> r = (original.pixels() - reconstruction.pixels()).rowwise().squaredNorm();
  return Eigen::Map<const Raster<double>>(r.data(), original.height(), original.width());
}

namespace {

void check_size(Index size) {
  if (size < 1 || size % 2 == 0)
    throw InvalidArgument("structuring element size must be odd and positive, got " + std::to_string(size));
}

// Separable flat filter: a square window max (or min) is a row pass then a
// column pass. Out-of-range indices clamp to the edge.
template <typename Pick>
Raster<double> flat_filter(const Raster<double>& r, Index size, Pick pick) {
  check_size(size);
  const Index h = r.rows(), w = r.cols(), half = size / 2;
  Raster<double> rows(h, w), out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double v = r(y, std::clamp<Index>(x - half, 0, w - 1));
      for (Index k = -half + 1; k <= half; ++k) v = pick(v, r(y, std::clamp<Index>(x + k, 0, w - 1)));
      rows(y, x) = v;
    }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double v = rows(std::clamp<Index>(y - half, 0, h - 1), x);
      for (Index k = -half + 1; k <= half; ++k) v = pick(v, rows(std::clamp<Index>(y + k, 0, h - 1), x));
      out(y, x) = v;
    }
  return out;
}

}  // namespace

Raster<double> dilate(const Raster<double>& r, Index size) {
  return flat_filter(r, size, [](double a, double b) { return std::max(a, b); });
}

Raster<double> erode(const Raster<double>& r, Index size) {
  return flat_filter(r, size, [](double a, double b) { return std::min(a, b); });
}

Raster<double> morphological_close(const Raster<double>& r, Index size) {
  return erode(dilate(r, size), size);
}

WeightMap weights_from_rem(const Raster<double>& r, double floor) {
  if (r.size() == 0) throw InvalidArgument("empty REM");
  if (first_non_finite(r) >= 0) throw NonFiniteError("REM contains non-finite values");
  if ((r < 0.0).any()) throw InvalidArgument("REM values must be nonnegative");
  WeightMap out;
  out.floor = floor > 0.0 ? floor : kWeightFloorScale * r.maxCoeff();
  // An all-zero REM leaves no scale to anchor the floor; every pixel is then
  // equally well reconstructed and any positive floor gives uniform weights.
  if (!(out.floor > 0.0)) out.floor = 1.0;
  Raster<double> w = 1.0 / r.max(out.floor);
  out.weights = w / w.sum();
  return out;
}

}  // namespace hsiad
