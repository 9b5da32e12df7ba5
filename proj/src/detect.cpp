#include "hsiad/detect.hpp"

#include <cmath>

#include "hsiad/purify.hpp"
#include "hsiad/rem.hpp"

namespace hsiad {

namespace {

constexpr double kWeightSumTolerance = 1e-9;

// Weighted mean/covariance of the rows of `x`; `w` sums to 1.
void accumulate(const Matrix<double>& x, const Vector<double>& w, Vector<double>& mean, Matrix<double>& cov) {
  mean = x.transpose() * w;
  const Matrix<double> centered = x.rowwise() - mean.transpose();
  cov.noalias() = centered.transpose() * (centered.array().colwise() * w.array()).matrix();
}

double resolve_beta(const Matrix<double>& cov, std::optional<double> beta) {
  if (beta) {
    if (!(*beta >= 0.0)) throw InvalidArgument("beta must be nonnegative");
    return *beta;
  }
  return kBetaScale * cov.trace() / double(cov.rows());
}

Eigen::LLT<Matrix<double>> factorize(const Matrix<double>& cov, double beta) {
  Matrix<double> c = cov;
  c.diagonal().array() += beta;
  Eigen::LLT<Matrix<double>> llt(c);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("weighted covariance not positive definite with beta " + std::to_string(beta));
  return llt;
}

}  // namespace

WeightedStats weighted_stats(const HsiCube& cube, const Raster<double>& weights, std::optional<double> beta) {
  if (weights.rows() != cube.height() || weights.cols() != cube.width())
    throw ShapeError("weight map dimensions differ from cube");
  if ((weights < 0.0).any()) throw InvalidArgument("weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > kWeightSumTolerance) throw InvalidArgument("weights must sum to 1");
  WeightedStats s;
  const Vector<double> w = Eigen::Map<const Vector<double>>(weights.data(), weights.size());
  accumulate(cube.pixels(), w, s.mean, s.covariance);
  s.beta = resolve_beta(s.covariance, beta);
  s.factor = factorize(s.covariance, s.beta);
  return s;
}

Raster<double> wrx_scores(const HsiCube& cube, const WeightedStats& stats) {
  if (stats.mean.size() != cube.bands()) throw ShapeError("statistics band count differs from cube");
  const Vector<double> v = mahalanobis_rows<double>(cube.pixels(), stats.mean, stats.factor);
  return Eigen::Map<const Raster<double>>(v.data(), cube.height(), cube.width());
}

Raster<double> rx_scores(const HsiCube& cube, std::optional<double> beta) {
  const Raster<double> uniform = Raster<double>::Constant(cube.height(), cube.width(), 1.0 / double(cube.pixel_count()));
  return wrx_scores(cube, weighted_stats(cube, uniform, beta));
}

Raster<double> rx_weights(const HsiCube& cube, std::optional<double> beta) {
  return weights_from_rem(rx_scores(cube, beta)).weights;
}

void validate_window(const WindowSpec& win) {
  if (win.inner < 1 || win.inner % 2 == 0 || win.outer % 2 == 0 || win.outer <= win.inner)
    throw InvalidArgument("window sizes must be odd with 1 <= inner < outer (got " + std::to_string(win.inner) +
                          ", " + std::to_string(win.outer) + ")");
}

Raster<double> local_scores(const HsiCube& cube, const Raster<double>* weights, const WindowSpec& win,
                            std::optional<double> beta) {
  validate_window(win);
  if (weights && (weights->rows() != cube.height() || weights->cols() != cube.width()))
    throw ShapeError("weight map dimensions differ from cube");
  if (weights && (*weights < 0.0).any()) throw InvalidArgument("weights must be nonnegative");
  if (beta && !(*beta >= 0.0)) throw InvalidArgument("beta must be nonnegative");

  const Index h = cube.height(), w = cube.width(), bands = cube.bands();
  const Index ro = win.outer / 2, ri = win.inner / 2;
  Raster<double> out(h, w);
  Matrix<double> x;
  Vector<double> wt, mean;
  Matrix<double> cov;
  std::vector<Index> ring;
  ring.reserve(std::size_t(win.outer * win.outer));

  for (Index y = 0; y < h; ++y)
    for (Index c = 0; c < w; ++c) {
      ring.clear();
      for (Index yy = std::max<Index>(0, y - ro); yy <= std::min(h - 1, y + ro); ++yy)
        for (Index cc = std::max<Index>(0, c - ro); cc <= std::min(w - 1, c + ro); ++cc)
          if (std::abs(yy - y) > ri || std::abs(cc - c) > ri) ring.push_back(yy * w + cc);
      const auto n = Index(ring.size());
      if (n < 2)
        throw InvalidArgument("annulus at (" + std::to_string(y) + ", " + std::to_string(c) + ") holds " +
                              std::to_string(n) + " pixels; need at least 2");
      x.resize(n, bands);
      wt.resize(n);
      for (Index k = 0; k < n; ++k) {
        x.row(k) = cube.pixel(ring[std::size_t(k)]);
        wt(k) = weights ? weights->data()[ring[std::size_t(k)]] : 1.0;
      }
      const double total = wt.sum();
      if (!(total > 0.0))
        throw InvalidArgument("annulus weights at (" + std::to_string(y) + ", " + std::to_string(c) + ") sum to 0");
      wt /= total;
      accumulate(x, wt, mean, cov);
      const auto llt = factorize(cov, beta ? *beta : kBetaScale * cov.trace() / double(bands));
      Vector<double> d = cube.pixel(y * w + c).transpose() - mean;
      llt.matrixL().solveInPlace(d);
      out(y, c) = d.squaredNorm();
    }
  return out;
}

Raster<double> minmax_normalize(const Raster<double>& r) {
  const double lo = r.minCoeff(), hi = r.maxCoeff();
  if (hi == lo) return Raster<double>::Zero(r.rows(), r.cols());
  return (r - lo) / (hi - lo);
}

Raster<double> combine_scores(const std::vector<Raster<double>>& maps, const std::vector<double>& weights) {
  if (maps.empty()) throw InvalidArgument("no score maps to combine");
  if (maps.size() != weights.size())
    throw InvalidArgument(std::to_string(maps.size()) + " maps but " + std::to_string(weights.size()) + " weights");
  double total = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0)) throw InvalidArgument("combination weights must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) throw InvalidArgument("combination weights must sum to 1");
  Raster<double> out = Raster<double>::Zero(maps[0].rows(), maps[0].cols());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].rows() != out.rows() || maps[k].cols() != out.cols())
      throw ShapeError("score map " + std::to_string(k) + " differs in size");
    out += weights[k] * minmax_normalize(maps[k]);
  }
  return out;
}

}  // namespace hsiad
