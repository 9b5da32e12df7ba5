#ifndef HSIAD_DETECT_HPP
#define HSIAD_DETECT_HPP

#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "hsiad/core.hpp"

namespace hsiad {

/// Weighted background statistics. The factor caches chol(C + beta I).
struct WeightedStats {
  Vector<double> mean;
  Matrix<double> covariance;
  double beta = 0.0;
  Eigen::LLT<Matrix<double>> factor;
};

/// Relative regularizer: beta = kBetaScale * trace(C) / L unless given.
inline constexpr double kBetaScale = 1e-3;

/// m = sum w_i f_i, C = sum w_i (f_i - m)(f_i - m)^T. Weights must sum to 1
/// (1e-9); a missing beta selects kBetaScale * trace(C) / L.
WeightedStats weighted_stats(const HsiCube& cube, const Raster<double>& weights,
                             std::optional<double> beta = std::nullopt);

/// (f_i - m)^T (C + beta I)^{-1} (f_i - m) for every pixel.
Raster<double> wrx_scores(const HsiCube& cube, const WeightedStats& stats);

/// Global RX with uniform weights; equivalent to weighted_stats with 1/N.
Raster<double> rx_scores(const HsiCube& cube, std::optional<double> beta = std::nullopt);

/// Weights for the classical WRX: inverse global RX scores, floored and
/// normalized like REM weights.
Raster<double> rx_weights(const HsiCube& cube, std::optional<double> beta = std::nullopt);

struct WindowSpec {
  Index inner = 1;
  Index outer = 15;
};

void validate_window(const WindowSpec& win);

/// Dual-window detector. Each test pixel is scored against the statistics of
/// its annulus: the outer window minus the inner window, both centred on the
/// pixel and clipped to the image. Weights, when given, are renormalized over
/// each annulus. beta follows weighted_stats per window.
Raster<double> local_scores(const HsiCube& cube, const Raster<double>* weights, const WindowSpec& win,
                            std::optional<double> beta = std::nullopt);

/// Min-max normalizes every map to [0, 1] (constant maps become 0) and mixes
/// them with nonnegative weights summing to 1.
Raster<double> combine_scores(const std::vector<Raster<double>>& maps, const std::vector<double>& weights);

Raster<double> minmax_normalize(const Raster<double>& r);

inline const std::vector<double> kCombinationWeights = {0.01, 0.5, 0.49};

}  // namespace hsiad

#endif  // HSIAD_DETECT_HPP
