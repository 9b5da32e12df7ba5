#include "hsiad/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace hsiad {

namespace {

using Rng = std::mt19937_64;

constexpr Index kVariationRank = 3;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Sum of a few low-frequency plane waves; values roughly in [-1, 1].
Raster<double> smooth_field(Rng& rng, Index h, Index w, int waves) {
  Raster<double> f = Raster<double>::Zero(h, w);
  for (int k = 0; k < waves; ++k) {
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double freq = uniform(rng, 0.5, 2.0) * 2.0 * std::numbers::pi / double(std::max(h, w));
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double fy = freq * std::sin(angle), fx = freq * std::cos(angle);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) f(y, x) += std::cos(fy * double(y) + fx * double(x) + phase) / waves;
  }
  return f;
}

// Baseline plus Gaussian bumps along the band axis.
Vector<double> smooth_spectrum(Rng& rng, Index bands, double base, double amplitude) {
  Vector<double> s = Vector<double>::Constant(bands, base);
  for (int k = 0; k < 3; ++k) {
    const double centre = uniform(rng, 0.0, double(bands - 1));
    const double width = uniform(rng, 0.1, 0.3) * double(bands);
    const double a = uniform(rng, -amplitude, amplitude);
    for (Index b = 0; b < bands; ++b) s(b) += a * std::exp(-0.5 * std::pow((double(b) - centre) / width, 2));
  }
  return s;
}

}  // namespace

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.height < 1 || spec.width < 1 || spec.bands < 1) throw InvalidArgument("scene dimensions must be positive");
  if (spec.classes < 1) throw InvalidArgument("scene needs at least one background class");
  if (spec.anomalies < 0 || spec.anomaly_height < 1 || spec.anomaly_width < 1)
    throw InvalidArgument("anomaly count must be nonnegative and sizes positive");
  if (!(spec.abundance_min >= 0.0 && spec.abundance_min <= 1.0))
    throw InvalidArgument("anomaly abundance floor must lie in [0, 1]");
  if (spec.noise < 0.0 || spec.class_spread < 0.0 || spec.illumination < 0.0 || spec.offset < 0.0)
    throw InvalidArgument("noise, spread, illumination and offset must be nonnegative");
  const double covered = double(spec.anomalies * spec.anomaly_height * spec.anomaly_width);
  if (covered >= kMaxAnomalyFraction * double(spec.height * spec.width))
    throw InvalidArgument("anomalies cover " + std::to_string(covered) + " pixels, at or above 2% of the scene");
}

SynthScene generate_synthetic_hsi(const SynthSpec& spec) {
  validate_synth_spec(spec);
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index h = spec.height, w = spec.width, bands = spec.bands;

  // Segmentation: argmax over one smooth field per class.
  std::vector<Raster<double>> fields;
  for (Index k = 0; k < spec.classes; ++k) fields.push_back(smooth_field(rng, h, w, 4));
  SynthScene scene;
  scene.labels.resize(h, w);
  for (Index i = 0; i < h * w; ++i) {
    int best = 0;
    for (Index k = 1; k < spec.classes; ++k)
      if (fields[std::size_t(k)].data()[i] > fields[std::size_t(best)].data()[i]) best = int(k);
    scene.labels.data()[i] = best;
  }

  std::vector<Vector<double>> means;
  std::vector<Matrix<double>> bases;
  for (Index k = 0; k < spec.classes; ++k) {
    means.push_back(smooth_spectrum(rng, bands, uniform(rng, 0.3, 0.6), 0.25));
    Matrix<double> basis(bands, kVariationRank);
    for (Index j = 0; j < kVariationRank; ++j) basis.col(j) = smooth_spectrum(rng, bands, 0.0, 1.0).normalized();
    bases.push_back(basis);
  }
  // Within-class abundances drift smoothly across the scene.
  std::vector<Raster<double>> drift;
  for (Index j = 0; j < kVariationRank; ++j) drift.push_back(smooth_field(rng, h, w, 3));
  const Raster<double> gain = 1.0 + spec.illumination * smooth_field(rng, h, w, 3);

  Matrix<double> pixels(h * w, bands);
  for (Index i = 0; i < h * w; ++i) {
    const auto k = std::size_t(scene.labels.data()[i]);
    Vector<double> coeff(kVariationRank);
    for (Index j = 0; j < kVariationRank; ++j) coeff(j) = drift[std::size_t(j)].data()[i];
    Vector<double> f = means[k] + spec.class_spread * bases[k] * coeff;
    f *= gain.data()[i];
    for (Index b = 0; b < bands; ++b) f(b) += spec.noise * normal(rng);
    pixels.row(i) = f.transpose();
  }

  // Offset direction drawn inside the span of the background variation, so
  // anomalies stand out against their surroundings rather than as global
  // outliers. Scaled to per-band RMS `offset`.
  Vector<double> direction = Vector<double>::Zero(bands);
  for (Index k = 0; k < spec.classes; ++k) {
    for (Index j = 0; j < kVariationRank; ++j) direction += normal(rng) * bases[std::size_t(k)].col(j);
    direction += normal(rng) * (means[std::size_t(k)] - means[0]);
  }
  if (direction.norm() > 0.0) direction *= spec.offset * std::sqrt(double(bands)) / direction.norm();

  scene.reference = Mask::Zero(h, w);
  // Rectangles keep a one-pixel gap from each other so the count of planted
  // pixels is exact.
  Mask occupied = Mask::Zero(h, w);
  const Index ah = spec.anomaly_height, aw = spec.anomaly_width;
  if (spec.anomalies > 0 && (ah > h || aw > w)) throw InvalidArgument("anomaly larger than the scene");
  for (Index a = 0; a < spec.anomalies; ++a) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const Index r0 = std::uniform_int_distribution<Index>(0, h - ah)(rng);
      const Index c0 = std::uniform_int_distribution<Index>(0, w - aw)(rng);
      if (occupied.block(r0, c0, ah, aw).cast<int>().sum() > 0) continue;
      scene.reference.block(r0, c0, ah, aw).setOnes();
      const Index gr = std::max<Index>(0, r0 - 1), gc = std::max<Index>(0, c0 - 1);
      occupied.block(gr, gc, std::min(h, r0 + ah + 1) - gr, std::min(w, c0 + aw + 1) - gc).setOnes();
      for (Index r = r0; r < r0 + ah; ++r)
        for (Index c = c0; c < c0 + aw; ++c)
          pixels.row(r * w + c) += uniform(rng, spec.abundance_min, 1.0) * direction.transpose();
      placed = true;
    }
    if (!placed) throw InvalidArgument("could not place anomaly " + std::to_string(a) + " without overlap");
  }
  scene.cube = HsiCube(h, w, std::move(pixels));
  return scene;
}

}  // namespace hsiad
