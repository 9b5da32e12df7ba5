#ifndef HSIAD_EVAL_HPP
#define HSIAD_EVAL_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "hsiad/core.hpp"

namespace hsiad {

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Points run from (0, 0) to (1, 1). The first point carries threshold +inf;
/// point k > 0 counts every pixel with score >= its threshold as detected.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  Index positives = 0;
  Index negatives = 0;
};

/// Thresholds sweep the distinct scores in descending order, so tied scores
/// enter together and contribute one trapezoid. The area is accumulated in
/// integers and divided once.
RocCurve roc_curve(const Raster<double>& scores, const Mask& reference);

/// Flags scores strictly above the smallest threshold whose background
/// false-alarm fraction does not exceed `far`.
struct DetectionMap {
  Mask map;
  double threshold = 0.0;
  Index false_positives = 0;
};

DetectionMap detection_map(const Raster<double>& scores, const Mask& reference, double far);

/// CSV with header "threshold;fpr;tpr".
void save_roc_csv(const RocCurve& roc, const std::filesystem::path& path);

/// Appends "image;detector;seed;auc", writing the header for a new file.
void append_result(const std::filesystem::path& path, const std::string& image, const std::string& detector,
                   std::uint64_t seed, double auc);

}  // namespace hsiad

#endif  // HSIAD_EVAL_HPP
