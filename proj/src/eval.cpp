#include "hsiad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace hsiad {

namespace {

void check_reference(const Raster<double>& scores, const Mask& reference) {
  if (scores.rows() != reference.rows() || scores.cols() != reference.cols())
    throw ShapeError("score map and reference differ in size");
  if (!is_binary(reference)) throw InvalidArgument("reference map must be binary");
  if (first_non_finite(scores) >= 0) throw NonFiniteError("score map contains non-finite values");
  const Index pos = reference.cast<Index>().sum();
  if (pos == 0 || pos == reference.size())
    throw InvalidArgument("reference map must contain both anomaly and background pixels");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RocCurve roc_curve(const Raster<double>& scores, const Mask& reference) {
  check_reference(scores, reference);
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores.data()[a] > scores.data()[b]; });

  RocCurve roc;
  roc.positives = reference.cast<Index>().sum();
  roc.negatives = n - roc.positives;
  const auto p = double(roc.positives), q = double(roc.negatives);
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

  // Twice the area in units of 1/(P*N): each group adds fp * (2 tp_before + tp).
  long long doubled_area = 0;
  Index tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = scores.data()[order[k]];
    Index gtp = 0, gfp = 0;
    for (; k < order.size() && scores.data()[order[k]] == t; ++k) (reference.data()[order[k]] ? gtp : gfp)++;
    doubled_area += static_cast<long long>(gfp) * (2 * tp + gtp);
    tp += gtp;
    fp += gfp;
    roc.points.push_back({t, double(fp) / q, double(tp) / p});
  }
  roc.auc = double(doubled_area) / (2.0 * p * q);
  return roc;
}

DetectionMap detection_map(const Raster<double>& scores, const Mask& reference, double far) {
  if (!(far >= 0.0 && far <= 1.0)) throw InvalidArgument("false-alarm rate must lie in [0, 1]");
  check_reference(scores, reference);
  std::vector<double> background;
  for (Index i = 0; i < scores.size(); ++i)
    if (!reference.data()[i]) background.push_back(scores.data()[i]);
  std::sort(background.begin(), background.end(), std::greater<>());
  // Allowed false positives; 1e-9 absorbs representation error in far * N.
  const auto allowed = static_cast<std::size_t>(std::floor(far * double(background.size()) + 1e-9));

  DetectionMap out;
  out.threshold = allowed < background.size() ? background[allowed] : std::numeric_limits<double>::lowest();
  out.map = (scores > out.threshold).cast<std::uint8_t>();
  for (Index i = 0; i < scores.size(); ++i)
    if (!reference.data()[i] && out.map.data()[i]) ++out.false_positives;
  return out;
}

void save_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "threshold;fpr;tpr\n";
  for (const auto& pt : roc.points)
    f << (std::isinf(pt.threshold) ? std::string("inf") : format_double(pt.threshold)) << ';' << format_double(pt.fpr)
      << ';' << format_double(pt.tpr) << '\n';
  if (!f) throw Error("failed writing " + path.string());
}

void append_result(const std::filesystem::path& path, const std::string& image, const std::string& detector,
                   std::uint64_t seed, double auc) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::app);
  if (!f) throw Error("cannot append to " + path.string());
  if (fresh) f << "image;detector;seed;auc\n";
  f << image << ';' << detector << ';' << seed << ';' << format_double(auc) << '\n';
}

}  // namespace hsiad
