#ifndef HSIAD_PIPELINE_HPP
#define HSIAD_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsiad/detect.hpp"
#include "hsiad/synth.hpp"

namespace hsiad {

enum class Detector { Rx, Wrx, Lrx, Wlrx, AeanRem, AeanWlrx, Comb };

Detector parse_detector(const std::string& name);
std::string detector_name(Detector d);
bool detector_uses_aean(Detector d);

/// Stages in execution order; each failing stage has its own exit code.
enum class Stage { Config, Input, Purify, Train, Reconstruct, Detect, Eval };

std::string stage_name(Stage s);
int stage_exit_code(Stage s);

/// Error tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what) : Error(stage_name(stage) + ": " + what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct PipelineConfig {
  // [input] An empty cube path selects the synthetic scene from [synth].
  std::filesystem::path cube;
  std::string cube_format = "envi";
  std::filesystem::path reference;
  std::string image_name;
  SynthSpec synth;

  // [purify]
  double gamma = 0.99;
  Index block = 16;
  Index step = 8;

  // [train] Zero epochs or batch selects the per-dimension default.
  std::vector<int> dims = {2};
  double lambda = 10.0;
  int epochs = 0;
  int batch_size = 0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int log_interval = 1;

  // [detect]
  Detector detector = Detector::AeanWlrx;
  std::vector<double> comb_weights = kCombinationWeights;
  bool close = true;
  Index se_size = 3;
  WindowSpec window;
  std::optional<double> beta;

  // [eval]
  double far = 0.01;

  // [run]
  std::uint64_t seed = 1;
  std::filesystem::path output = "results";
};

/// key=value lines grouped under [section] headers; '#' starts a comment.
using ConfigTable = std::map<std::string, std::map<std::string, std::string>>;

ConfigTable parse_config_text(const std::string& text);
ConfigTable read_config_file(const std::filesystem::path& path);

/// Applies `table` on top of `cfg`. Unknown sections or keys are errors.
void apply_config(PipelineConfig& cfg, const ConfigTable& table);

/// Every tunable as a ConfigTable, so a manifest reloads as a config.
ConfigTable config_table(const PipelineConfig& cfg);
std::string format_config(const ConfigTable& table);

void validate_config(const PipelineConfig& cfg);

struct PipelineResult {
  double auc = 0.0;
  std::filesystem::path output;
  std::vector<std::string> artifacts;
};

/// purify -> train per d -> synthesize -> REM -> close -> weights -> detect ->
/// eval, persisting every intermediate artifact in cfg.output.
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct SweepResult {
  std::vector<std::pair<std::uint64_t, double>> per_seed;
  double mean_auc = 0.0;
};

/// One run per seed in "<output>/seed-<s>"; per-seed and mean AUC go to
/// "<output>/sweep.csv".
SweepResult run_sweep(const PipelineConfig& cfg, const std::vector<std::uint64_t>& seeds);

/// Deterministic child seed for a named sub-stream of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace hsiad

#endif  // HSIAD_PIPELINE_HPP
