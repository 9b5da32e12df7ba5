#ifndef HSIAD_PURIFY_HPP
#define HSIAD_PURIFY_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <type_traits>

#include <Eigen/Cholesky>

#include "hsiad/core.hpp"

namespace hsiad {

/// Global mean and 1/N covariance of all spectral vectors, with the ridge
/// already folded into the cached Cholesky factor.
template <typename Scalar>
struct GlobalStats {
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
  Scalar ridge = 0;
  Eigen::LLT<Matrix<Scalar>> factor;
};

/// Ridge of 1e-6 * trace / L; a zero-variance image falls back to 1e-12 so the
/// regularized covariance stays positive definite.
template <typename Scalar>
Scalar default_ridge(const Matrix<Scalar>& covariance) {
  const Scalar r = Scalar(1e-6) * covariance.trace() / Scalar(covariance.rows());
  return r > Scalar(0) ? r : Scalar(1e-12);
}

template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> regularized_cholesky(const Matrix<Scalar>& covariance, Scalar ridge) {
  Matrix<Scalar> c = covariance;
  c.diagonal().array() += ridge;
  Eigen::LLT<Matrix<Scalar>> llt(c);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("covariance not positive definite after ridge " + std::to_string(double(ridge)));
  return llt;
}

template <typename Scalar>
GlobalStats<Scalar> global_stats(const Cube<Scalar>& cube, std::type_identity_t<std::optional<Scalar>> ridge = std::nullopt) {
  if (cube.pixel_count() < 2) throw InvalidArgument("global statistics need at least two pixels");
  GlobalStats<Scalar> g;
  const auto& x = cube.pixels();
  g.mean = x.colwise().mean().transpose();
  const Matrix<Scalar> centered = x.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / Scalar(cube.pixel_count());
  g.ridge = ridge ? *ridge : default_ridge(g.covariance);
  if (g.ridge < Scalar(0)) throw InvalidArgument("ridge must be nonnegative");
  g.factor = regularized_cholesky(g.covariance, g.ridge);
  return g;
}

/// (x - mean)^T (C + ridge I)^{-1} (x - mean) for every row x of `pixels`,
/// through triangular solves against the cached factor.
template <typename Scalar, typename Derived>
Vector<Scalar> mahalanobis_rows(const Eigen::MatrixBase<Derived>& pixels, const Vector<Scalar>& mean,
                                const Eigen::LLT<Matrix<Scalar>>& factor) {
  Matrix<Scalar> centered = (pixels.rowwise() - mean.transpose()).transpose();
  factor.matrixL().solveInPlace(centered);
  return centered.colwise().squaredNorm().transpose();
}

template <typename Scalar>
Raster<Scalar> mahalanobis_scores(const Cube<Scalar>& cube, const GlobalStats<Scalar>& g) {
  if (g.mean.size() != cube.bands()) throw ShapeError("statistics band count differs from cube");
  const Vector<Scalar> s = mahalanobis_rows<Scalar>(cube.pixels(), g.mean, g.factor);
  return Eigen::Map<const Raster<Scalar>>(s.data(), cube.height(), cube.width());
}

struct BackgroundMask {
  Mask mask;  // 1 = anomaly
  double threshold = 0.0;
  double confidence = 0.0;

  Index background_count() const { return mask.size() - static_cast<Index>(mask.cast<Index>().sum()); }
};

/// alpha is the order statistic at rank ceil(gamma * N); pixels scoring
/// strictly above alpha are flagged.
BackgroundMask threshold_by_confidence(const Raster<double>& scores, double gamma);

/// One AEAN training set. Samples are stored one per column, flattened in
/// (channel, row, col) order: d=1 is 1 x 1 x L, d=2 is 1 x m x m, d=3 is
/// L x m x m.
struct TrainingSet {
  int dim = 1;
  Index block = 0;
  Index step = 0;
  Index bands = 0;
  Matrix<double> samples;

  Index count() const { return samples.cols(); }
  Index channels() const { return dim == 3 ? bands : 1; }
  Index sample_height() const { return dim == 1 ? 1 : block; }
  Index sample_width() const { return dim == 1 ? bands : block; }
};

/// Top-left corners of every m x m window (sliding with `step`) whose
/// footprint is entirely background.
std::vector<std::array<Index, 2>> background_footprints(const Mask& mask, Index block, Index step);

TrainingSet extract_training_set(const HsiCube& cube, const Mask& mask, int dim, Index block, Index step);

std::array<TrainingSet, 3> extract_training_sets(const HsiCube& cube, const Mask& mask, Index block, Index step);

/// Container: "HSTS", u8 d, u32 m, u32 L, u32 count, float32 LE samples.
void save_training_set(const TrainingSet& set, const std::filesystem::path& path);
TrainingSet load_training_set(const std::filesystem::path& path);

}  // namespace hsiad

#endif  // HSIAD_PURIFY_HPP
