#ifndef HSIAD_SYNTH_HPP
#define HSIAD_SYNTH_HPP

#include <cstdint>

#include "hsiad/core.hpp"

namespace hsiad {

/// Seeded scene: a smooth segmentation into `classes` regions, each with its
/// own smooth mean spectrum and a rank-3 within-class variation whose
/// abundances drift smoothly in space (amplitude `class_spread`), a smooth
/// illumination gain, white noise, and `anomalies` non-touching rectangles
/// whose spectra are the local background shifted by a fixed offset of
/// per-band RMS `offset`, scaled per pixel by an abundance drawn from
/// [abundance_min, 1] (mixed pixels). The offset lies in the span of the
/// background variation.
struct SynthSpec {
  Index height = 48;
  Index width = 48;
  Index bands = 16;
  Index classes = 3;
  double class_spread = 0.2;
  double illumination = 0.1;
  Index anomalies = 4;
  Index anomaly_height = 2;
  Index anomaly_width = 3;
  double offset = 0.1;
  double abundance_min = 0.5;
  double noise = 0.02;
  std::uint64_t seed = 1;
};

struct SynthScene {
  HsiCube cube;
  Mask reference;
  Raster<int> labels;
};

/// Anomalies may cover less than this fraction of the pixels.
inline constexpr double kMaxAnomalyFraction = 0.02;

void validate_synth_spec(const SynthSpec& spec);

SynthScene generate_synthetic_hsi(const SynthSpec& spec);

}  // namespace hsiad

#endif  // HSIAD_SYNTH_HPP
