#include "hsiad/purify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace hsiad {

BackgroundMask threshold_by_confidence(const Raster<double>& scores, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("confidence must lie in (0, 1]");
  const Index n = scores.size();
  if (n == 0) throw InvalidArgument("empty score raster");
  std::vector<double> sorted(scores.data(), scores.data() + n);
  std::sort(sorted.begin(), sorted.end());
  // 1e-9 absorbs representation error in gamma * N (0.95 * 100 must give 95).
  auto rank = static_cast<Index>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
  rank = std::clamp<Index>(rank, 1, n);

  BackgroundMask out;
  out.confidence = gamma;
  out.threshold = sorted[rank - 1];
  out.mask = (scores > out.threshold).cast<std::uint8_t>();
  return out;
}

std::vector<std::array<Index, 2>> background_footprints(const Mask& mask, Index block, Index step) {
  if (block < 1 || step < 1) throw InvalidArgument("block size and step must be positive");
  if (block > std::min(mask.rows(), mask.cols()))
    throw InvalidArgument("block size " + std::to_string(block) + " exceeds image size");
  // Summed-area table of anomaly labels for O(1) footprint tests.
  Matrix<Index> sat = Matrix<Index>::Zero(mask.rows() + 1, mask.cols() + 1);
  for (Index r = 0; r < mask.rows(); ++r)
    for (Index c = 0; c < mask.cols(); ++c)
      sat(r + 1, c + 1) = mask(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);

  std::vector<std::array<Index, 2>> corners;
  for (Index r = 0; r + block <= mask.rows(); r += step)
    for (Index c = 0; c + block <= mask.cols(); c += step) {
      const Index hits = sat(r + block, c + block) - sat(r, c + block) - sat(r + block, c) + sat(r, c);
      if (hits == 0) corners.push_back({r, c});
    }
  return corners;
}

TrainingSet extract_training_set(const HsiCube& cube, const Mask& mask, int dim, Index block, Index step) {
  if (mask.rows() != cube.height() || mask.cols() != cube.width())
    throw ShapeError("mask dimensions differ from cube");
  if (dim < 1 || dim > 3) throw InvalidArgument("training-set dimension must be 1, 2 or 3");
  TrainingSet set;
  set.dim = dim;
  set.block = block;
  set.step = step;
  set.bands = cube.bands();
  const Index bands = cube.bands();

  if (dim == 1) {
    std::vector<Index> background;
    for (Index i = 0; i < mask.size(); ++i)
      if (mask.data()[i] == 0) background.push_back(i);
    set.samples.resize(bands, static_cast<Index>(background.size()));
    for (std::size_t k = 0; k < background.size(); ++k)
      set.samples.col(static_cast<Index>(k)) = cube.pixel(background[k]).transpose();
  } else {
    const auto corners = background_footprints(mask, block, step);
    const Index area = block * block;
    const Index per_footprint = dim == 2 ? bands : 1;
    set.samples.resize(dim == 2 ? area : area * bands, static_cast<Index>(corners.size()) * per_footprint);
    Index col = 0;
    for (const auto& [r0, c0] : corners) {
      for (Index b = 0; b < bands; ++b) {
        const auto patch = cube.band(b).block(r0, c0, block, block);
        const Index row_offset = dim == 2 ? 0 : b * area;
        const Index target = dim == 2 ? col + b : col;
        for (Index r = 0; r < block; ++r)
          for (Index c = 0; c < block; ++c) set.samples(row_offset + r * block + c, target) = patch(r, c);
      }
      col += per_footprint;
    }
  }
  if (set.count() == 0) throw EmptyTrainingSetError(dim);
  return set;
}

std::array<TrainingSet, 3> extract_training_sets(const HsiCube& cube, const Mask& mask, Index block, Index step) {
  return {extract_training_set(cube, mask, 1, block, step), extract_training_set(cube, mask, 2, block, step),
          extract_training_set(cube, mask, 3, block, step)};
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_training_set(const TrainingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write("HSTS", 4);
  const auto d = static_cast<std::uint8_t>(set.dim);
  out.write(reinterpret_cast<const char*>(&d), 1);
  put_u32(out, static_cast<std::uint32_t>(set.block));
  put_u32(out, static_cast<std::uint32_t>(set.bands));
  put_u32(out, static_cast<std::uint32_t>(set.count()));
  const Matrix<float> f = set.samples.cast<float>();
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
}

TrainingSet load_training_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "HSTS", 4) != 0) throw FormatError(path.string() + ": bad training-set magic");
  std::uint8_t d = 0;
  in.read(reinterpret_cast<char*>(&d), 1);
  TrainingSet set;
  set.dim = d;
  set.block = get_u32(in);
  set.bands = get_u32(in);
  const Index count = get_u32(in);
  if (!in || d < 1 || d > 3) throw FormatError(path.string() + ": bad training-set header");
  const Index rows = set.channels() * set.sample_height() * set.sample_width();
  Matrix<float> f(rows, count);
  in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!in || in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": payload size mismatch");
  set.samples = f.cast<double>();
  return set;
}

}  // namespace hsiad
