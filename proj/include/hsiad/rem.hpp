#ifndef HSIAD_REM_HPP
#define HSIAD_REM_HPP

#include "hsiad/core.hpp"

namespace hsiad {

/// r_i = ||f_i - g_i||^2 for every pixel.
Raster<double> compute_rem(const HsiCube& original, const HsiCube& reconstruction);

/// Grayscale closing (dilation, then erosion) with a flat size x size square.
/// Borders replicate the nearest edge pixel.
Raster<double> morphological_close(const Raster<double>& r, Index size = 3);
Raster<double> dilate(const Raster<double>& r, Index size);
Raster<double> erode(const Raster<double>& r, Index size);

struct WeightMap {
  Raster<double> weights;
  double floor = 0.0;
};

/// Relative floor applied as floor_scale * max(r) when no explicit floor is given.
inline constexpr double kWeightFloorScale = 1e-12;

/// w_i = 1 / max(r_i, floor), normalized to sum 1. A nonpositive `floor`
/// selects the default kWeightFloorScale * max(r).
WeightMap weights_from_rem(const Raster<double>& r, double floor = 0.0);

}  // namespace hsiad

#endif  // HSIAD_REM_HPP
