#include "hsiad/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hsiad/aean.hpp"
#include "hsiad/eval.hpp"
#include "hsiad/io.hpp"
#include "hsiad/purify.hpp"
#include "hsiad/rem.hpp"

namespace hsiad {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<Detector, std::string>> kDetectorNames = {
    {Detector::Rx, "rx"},           {Detector::Wrx, "wrx"},        {Detector::Lrx, "lrx"},  {Detector::Wlrx, "wlrx"},
    {Detector::AeanRem, "aean-rem"}, {Detector::AeanWlrx, "aean-wlrx"}, {Detector::Comb, "comb"}};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw InvalidArgument(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw InvalidArgument(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
  return out;
}

// Artifact name, suffixed with the dimension when a run trains several models.
std::string per_dim(const std::string& stem, const std::string& ext, int d, bool several) {
  return several ? stem + "-" + std::to_string(d) + "d" + ext : stem + ext;
}

void save_trace(const std::vector<LossRecord>& trace, const fs::path& path) {
  std::ofstream f(path);
  f << "step;adversarial;reconstruction;total\n";
  for (const auto& r : trace)
    f << r.step << ';' << fmt(r.adversarial) << ';' << fmt(r.reconstruction) << ';' << fmt(r.total) << '\n';
  if (!f) throw Error("failed writing " + path.string());
}

template <typename F>
auto in_stage(Stage stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

Detector parse_detector(const std::string& name) {
  for (const auto& [d, n] : kDetectorNames)
    if (n == name) return d;
  throw InvalidArgument("unknown detector '" + name + "' (rx, wrx, lrx, wlrx, aean-rem, aean-wlrx, comb)");
}

std::string detector_name(Detector d) {
  for (const auto& [k, n] : kDetectorNames)
    if (k == d) return n;
  return "?";
}

bool detector_uses_aean(Detector d) { return d == Detector::AeanRem || d == Detector::AeanWlrx || d == Detector::Comb; }

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Config: return "config";
    case Stage::Input: return "input";
    case Stage::Purify: return "purify";
    case Stage::Train: return "train";
    case Stage::Reconstruct: return "reconstruct";
    case Stage::Detect: return "detect";
    case Stage::Eval: return "eval";
  }
  return "?";
}

int stage_exit_code(Stage s) { return 2 + static_cast<int>(s); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  std::string section;
  std::stringstream ss(text);
  int lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidArgument("line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw InvalidArgument("line " + std::to_string(lineno) + ": key outside a section");
    table[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return table;
}

ConfigTable read_config_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(PipelineConfig& cfg, const ConfigTable& table) {
  bool dims_given = false;
  for (const auto& [section, entries] : table)
    for (const auto& [key, v] : entries) {
      const std::string k = section + "." + key;
      if (k == "input.cube") cfg.cube = v;
      else if (k == "input.format") cfg.cube_format = v;
      else if (k == "input.reference") cfg.reference = v;
      else if (k == "input.name") cfg.image_name = v;
      else if (k == "synth.height") cfg.synth.height = to_int(k, v);
      else if (k == "synth.width") cfg.synth.width = to_int(k, v);
      else if (k == "synth.bands") cfg.synth.bands = to_int(k, v);
      else if (k == "synth.classes") cfg.synth.classes = to_int(k, v);
      else if (k == "synth.class_spread") cfg.synth.class_spread = to_double(k, v);
      else if (k == "synth.illumination") cfg.synth.illumination = to_double(k, v);
      else if (k == "synth.anomalies") cfg.synth.anomalies = to_int(k, v);
      else if (k == "synth.anomaly_height") cfg.synth.anomaly_height = to_int(k, v);
      else if (k == "synth.anomaly_width") cfg.synth.anomaly_width = to_int(k, v);
      else if (k == "synth.offset") cfg.synth.offset = to_double(k, v);
      else if (k == "synth.abundance_min") cfg.synth.abundance_min = to_double(k, v);
      else if (k == "synth.noise") cfg.synth.noise = to_double(k, v);
      else if (k == "synth.seed") cfg.synth.seed = std::uint64_t(to_int(k, v));
      else if (k == "purify.gamma") cfg.gamma = to_double(k, v);
      else if (k == "purify.block") cfg.block = to_int(k, v);
      else if (k == "purify.step") cfg.step = to_int(k, v);
      else if (k == "train.dims") {
        cfg.dims.clear();
        for (const auto& s : split_list(v)) cfg.dims.push_back(int(to_int(k, s)));
        dims_given = true;
      } else if (k == "train.lambda") cfg.lambda = to_double(k, v);
      else if (k == "train.epochs") cfg.epochs = int(to_int(k, v));
      else if (k == "train.batch") cfg.batch_size = int(to_int(k, v));
      else if (k == "train.lr") cfg.lr = to_double(k, v);
      else if (k == "train.beta1") cfg.beta1 = to_double(k, v);
      else if (k == "train.beta2") cfg.beta2 = to_double(k, v);
      else if (k == "train.log_interval") cfg.log_interval = int(to_int(k, v));
      else if (k == "detect.detector") cfg.detector = parse_detector(v);
      else if (k == "detect.weights") {
        cfg.comb_weights.clear();
        for (const auto& s : split_list(v)) cfg.comb_weights.push_back(to_double(k, s));
      } else if (k == "detect.close") cfg.close = to_bool(k, v);
      else if (k == "detect.se") cfg.se_size = to_int(k, v);
      else if (k == "detect.inner") cfg.window.inner = to_int(k, v);
      else if (k == "detect.outer") cfg.window.outer = to_int(k, v);
      else if (k == "detect.beta") cfg.beta = v == "auto" ? std::nullopt : std::optional<double>(to_double(k, v));
      else if (k == "eval.far") cfg.far = to_double(k, v);
      else if (k == "run.seed") cfg.seed = std::uint64_t(to_int(k, v));
      else if (k == "run.output") cfg.output = v;
      else throw InvalidArgument("unknown config key '" + k + "'");
    }
  if (cfg.detector == Detector::Comb && !dims_given) cfg.dims = {1, 2, 3};
}

ConfigTable config_table(const PipelineConfig& cfg) {
  ConfigTable t;
  t["input"] = {{"cube", cfg.cube.string()}, {"format", cfg.cube_format}, {"reference", cfg.reference.string()},
                {"name", cfg.image_name}};
  if (cfg.cube.empty()) {
    const auto& s = cfg.synth;
    t["synth"] = {{"height", std::to_string(s.height)},
                  {"width", std::to_string(s.width)},
                  {"bands", std::to_string(s.bands)},
                  {"classes", std::to_string(s.classes)},
                  {"class_spread", fmt(s.class_spread)},
                  {"illumination", fmt(s.illumination)},
                  {"anomalies", std::to_string(s.anomalies)},
                  {"anomaly_height", std::to_string(s.anomaly_height)},
                  {"anomaly_width", std::to_string(s.anomaly_width)},
                  {"offset", fmt(s.offset)},
                  {"abundance_min", fmt(s.abundance_min)},
                  {"noise", fmt(s.noise)},
                  {"seed", std::to_string(s.seed)}};
  }
  t["purify"] = {{"gamma", fmt(cfg.gamma)}, {"block", std::to_string(cfg.block)}, {"step", std::to_string(cfg.step)}};
  t["train"] = {{"dims", join(cfg.dims)},
                {"lambda", fmt(cfg.lambda)},
                {"epochs", std::to_string(cfg.epochs)},
                {"batch", std::to_string(cfg.batch_size)},
                {"lr", fmt(cfg.lr)},
                {"beta1", fmt(cfg.beta1)},
                {"beta2", fmt(cfg.beta2)},
                {"log_interval", std::to_string(cfg.log_interval)}};
  t["detect"] = {{"detector", detector_name(cfg.detector)},
                 {"weights", join(cfg.comb_weights)},
                 {"close", cfg.close ? "true" : "false"},
                 {"se", std::to_string(cfg.se_size)},
                 {"inner", std::to_string(cfg.window.inner)},
                 {"outer", std::to_string(cfg.window.outer)},
                 {"beta", cfg.beta ? fmt(*cfg.beta) : "auto"}};
  t["eval"] = {{"far", fmt(cfg.far)}};
  t["run"] = {{"seed", std::to_string(cfg.seed)}, {"output", cfg.output.string()}};
  return t;
}

std::string format_config(const ConfigTable& table) {
  std::string out;
  for (const auto& [section, entries] : table) {
    out += "[" + section + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

void validate_config(const PipelineConfig& cfg) {
  if (cfg.cube.empty()) validate_synth_spec(cfg.synth);
  else if (cfg.reference.empty()) throw InvalidArgument("a reference map is required to evaluate a user cube");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
  if (cfg.block < 1 || cfg.step < 1) throw InvalidArgument("block and step must be positive");
  if (!(cfg.far >= 0.0 && cfg.far <= 1.0)) throw InvalidArgument("far must lie in [0, 1]");
  if (cfg.se_size < 1 || cfg.se_size % 2 == 0) throw InvalidArgument("structuring element size must be odd");
  validate_window(cfg.window);
  if (cfg.beta && *cfg.beta < 0.0) throw InvalidArgument("beta must be nonnegative");
  if (cfg.epochs < 0 || cfg.batch_size < 0 || cfg.log_interval < 1 || !(cfg.lambda > 0.0) || !(cfg.lr > 0.0))
    throw InvalidArgument("training parameters out of range");
  if (!detector_uses_aean(cfg.detector)) return;
  if (cfg.dims.empty()) throw InvalidArgument("no AEAN dimension selected");
  for (int d : cfg.dims)
    if (d < 1 || d > 3) throw InvalidArgument("AEAN dimension must be 1, 2 or 3");
  if (cfg.detector == Detector::Comb) {
    if (cfg.comb_weights.size() != cfg.dims.size())
      throw InvalidArgument("comb needs one weight per trained dimension");
  } else if (cfg.dims.size() != 1) {
    throw InvalidArgument(detector_name(cfg.detector) + " uses exactly one AEAN dimension");
  }
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  in_stage(Stage::Config, [&] {
    validate_config(cfg);
    return 0;
  });
  PipelineResult result;
  result.output = cfg.output;
  auto out = [&](const std::string& name) {
    result.artifacts.push_back(name);
    return cfg.output / name;
  };
  in_stage(Stage::Config, [&] {
    fs::create_directories(cfg.output);
    std::ofstream(out("manifest.txt")) << format_config(config_table(cfg));
    return 0;
  });

  HsiCube cube;
  Mask reference;
  std::string image = cfg.image_name;
  in_stage(Stage::Input, [&] {
    if (cfg.cube.empty()) {
      auto scene = generate_synthetic_hsi(cfg.synth);
      save_cube_envi(scene.cube, out("scene.f32"));
      result.artifacts.push_back("scene.hdr");
      save_mask(scene.reference, out("reference.pgm"));
      cube = std::move(scene.cube);
      reference = std::move(scene.reference);
      if (image.empty()) image = "synthetic-" + std::to_string(cfg.synth.seed);
    } else {
      cube = load_cube(cfg.cube, parse_cube_format(cfg.cube_format));
      reference = load_mask(cfg.reference);
      if (reference.rows() != cube.height() || reference.cols() != cube.width())
        throw ShapeError("reference map size differs from cube");
      if (image.empty()) image = cfg.cube.stem().string();
    }
    cube = normalize_cube(cube);
    return 0;
  });

  Raster<double> scores;
  if (detector_uses_aean(cfg.detector)) {
    const bool several = cfg.dims.size() > 1;
    const Mask mask = in_stage(Stage::Purify, [&] {
      const auto g = global_stats(cube);
      const auto bg = threshold_by_confidence(mahalanobis_scores(cube, g), cfg.gamma);
      save_mask(bg.mask, out("mask.pgm"));
      return bg.mask;
    });

    std::vector<Raster<double>> maps;
    for (int d : cfg.dims) {
      const auto set = in_stage(Stage::Purify, [&] {
        auto s = extract_training_set(cube, mask, d, cfg.block, cfg.step);
        save_training_set(s, out(per_dim("train", ".hsts", d, several)));
        return s;
      });
      auto model = in_stage(Stage::Train, [&] {
        auto m = build_aean<float>(d, cube.bands(), cfg.block, derive_seed(cfg.seed, 10 + std::uint64_t(d)), cfg.lambda);
        auto tc = TrainConfig::defaults_for(d);
        if (cfg.epochs > 0) tc.epochs = cfg.epochs;
        if (cfg.batch_size > 0) tc.batch_size = cfg.batch_size;
        tc.seed = derive_seed(cfg.seed, 20 + std::uint64_t(d));
        tc.lambda = cfg.lambda;
        tc.lr_autoencoder = tc.lr_discriminator = cfg.lr;
        tc.beta1 = cfg.beta1;
        tc.beta2 = cfg.beta2;
        tc.log_interval = cfg.log_interval;
        save_trace(train_aean(m, set, tc), out(per_dim("loss", ".csv", d, several)));
        save_checkpoint(m, out(per_dim("model", ".aean", d, several)));
        return m;
      });
      const auto rem = in_stage(Stage::Reconstruct, [&] {
        const HsiCube recon = synthesize_hsi(model, cube);
        save_cube_envi(recon, out(per_dim("reconstruction", ".f32", d, several)));
        result.artifacts.push_back(per_dim("reconstruction", ".hdr", d, several));
        Raster<double> r = compute_rem(cube, recon);
        save_raster(r, out(per_dim("rem", ".f32", d, several)), RasterFormat::RawF32);
        if (cfg.close) {
          r = morphological_close(r, cfg.se_size);
          save_raster(r, out(per_dim("rem-closed", ".f32", d, several)), RasterFormat::RawF32);
        }
        return r;
      });
      maps.push_back(in_stage(Stage::Detect, [&] {
        if (cfg.detector == Detector::AeanRem) return rem;
        const auto w = weights_from_rem(rem);
        save_raster(w.weights, out(per_dim("weights", ".f32", d, several)), RasterFormat::RawF32);
        Raster<double> s = local_scores(cube, &w.weights, cfg.window, cfg.beta);
        if (several) save_raster(s, out(per_dim("scores", ".f32", d, true)), RasterFormat::RawF32);
        return s;
      }));
    }
    scores = in_stage(Stage::Detect, [&] {
      return cfg.detector == Detector::Comb ? combine_scores(maps, cfg.comb_weights) : maps.front();
    });
  } else {
    scores = in_stage(Stage::Detect, [&] {
      switch (cfg.detector) {
        case Detector::Rx: return rx_scores(cube, cfg.beta);
        case Detector::Wrx: return wrx_scores(cube, weighted_stats(cube, rx_weights(cube, cfg.beta), cfg.beta));
        case Detector::Lrx: return local_scores(cube, nullptr, cfg.window, cfg.beta);
        default: {
          const Raster<double> w = rx_weights(cube, cfg.beta);
          return local_scores(cube, &w, cfg.window, cfg.beta);
        }
      }
    });
  }

  in_stage(Stage::Eval, [&] {
    save_raster(scores, out("scores.f32"), RasterFormat::RawF32);
    result.artifacts.push_back("scores.f32.hdr");
    const auto roc = roc_curve(scores, reference);
    save_roc_csv(roc, out("roc.csv"));
    save_mask(detection_map(scores, reference, cfg.far).map, out("detection.pgm"));
    append_result(out("results.csv"), image, detector_name(cfg.detector), cfg.seed, roc.auc);
    result.auc = roc.auc;
    return 0;
  });
  return result;
}

SweepResult run_sweep(const PipelineConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw StageError(Stage::Config, "empty seed list");
  SweepResult sweep;
  for (auto s : seeds) {
    PipelineConfig c = cfg;
    c.seed = s;
    c.output = cfg.output / ("seed-" + std::to_string(s));
    sweep.per_seed.emplace_back(s, run_pipeline(c).auc);
  }
  double total = 0.0;
  for (const auto& [s, auc] : sweep.per_seed) total += auc;
  sweep.mean_auc = total / double(seeds.size());
  std::ofstream f(cfg.output / "sweep.csv");
  f << "seed;auc\n";
  for (const auto& [s, auc] : sweep.per_seed) f << s << ';' << fmt(auc) << '\n';
  f << "mean;" << fmt(sweep.mean_auc) << '\n';
  return sweep;
}

}  // namespace hsiad
