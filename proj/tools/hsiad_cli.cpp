// hsiad: command-line front end for the anomaly-detection pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "hsiad/aean.hpp"
#include "hsiad/eval.hpp"
#include "hsiad/io.hpp"
#include "hsiad/pipeline.hpp"
#include "hsiad/purify.hpp"
#include "hsiad/rem.hpp"

using namespace hsiad;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageExit = 1;

template <typename F>
void stage(Stage s, F&& f) {
  try {
    f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(s, e.what());
  }
}

HsiCube read_normalized(const fs::path& path, const std::string& format) {
  HsiCube cube;
  stage(Stage::Input, [&] { cube = normalize_cube(load_cube(path, parse_cube_format(format))); });
  return cube;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  for (std::string s; std::getline(ss, s, ',');) out.push_back(std::stoull(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised hyperspectral anomaly detection"};
  app.require_subcommand(1);

  // synth
  SynthSpec spec;
  fs::path synth_out, synth_ref;
  std::string synth_format = "envi";
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic scene and its reference map");
  synth->add_option("-o,--out", synth_out, "Cube path")->required();
  synth->add_option("-r,--reference", synth_ref, "Reference map (PGM)")->required();
  synth->add_option("--format", synth_format, "envi or csv");
  synth->add_option("--height", spec.height);
  synth->add_option("--width", spec.width);
  synth->add_option("--bands", spec.bands);
  synth->add_option("--classes", spec.classes);
  synth->add_option("--class-spread", spec.class_spread);
  synth->add_option("--illumination", spec.illumination);
  synth->add_option("--anomalies", spec.anomalies);
  synth->add_option("--anomaly-height", spec.anomaly_height);
  synth->add_option("--anomaly-width", spec.anomaly_width);
  synth->add_option("--offset", spec.offset);
  synth->add_option("--abundance-min", spec.abundance_min);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--seed", spec.seed);

  // purify
  fs::path cube_path, mask_out, train_dir;
  std::string cube_format = "envi";
  double gamma = 0.99;
  Index block = 16, step = 8;
  std::vector<int> dims = {1, 2, 3};
  auto* purify = app.add_subcommand("purify", "Background purification and training-set extraction");
  purify->add_option("-c,--cube", cube_path)->required();
  purify->add_option("--format", cube_format);
  purify->add_option("--gamma", gamma, "Confidence level");
  purify->add_option("--block", block);
  purify->add_option("--step", step);
  purify->add_option("--dims", dims)->delimiter(',');
  purify->add_option("-m,--mask", mask_out, "Background mask (PGM, 1 = anomaly)")->required();
  purify->add_option("-t,--train-dir", train_dir, "Directory for train-<d>d.hsts");

  // train
  fs::path set_path, model_out, trace_out;
  int epochs = 0, batch = 0, log_interval = 1;
  double lambda = 10.0, lr = 2e-4, beta1 = 0.5, beta2 = 0.999;
  std::uint64_t seed = 1;
  auto* train = app.add_subcommand("train", "Train one AEAN on a training set");
  train->add_option("-s,--set", set_path)->required();
  train->add_option("-o,--out", model_out)->required();
  train->add_option("--trace", trace_out, "Loss trace CSV");
  train->add_option("--epochs", epochs, "0 = default for the dimension");
  train->add_option("--batch", batch, "0 = default for the dimension");
  train->add_option("--lambda", lambda);
  train->add_option("--lr", lr);
  train->add_option("--beta1", beta1);
  train->add_option("--beta2", beta2);
  train->add_option("--log-interval", log_interval);
  train->add_option("--seed", seed);

  // reconstruct
  fs::path model_path, recon_out, rem_out;
  bool close = true;
  Index se = 3;
  auto* reconstruct = app.add_subcommand("reconstruct", "Synthesize the cube and compute its REM");
  reconstruct->add_option("-m,--model", model_path)->required();
  reconstruct->add_option("-c,--cube", cube_path)->required();
  reconstruct->add_option("--format", cube_format);
  reconstruct->add_option("-o,--out", recon_out, "Reconstructed cube (ENVI)");
  reconstruct->add_option("--rem", rem_out, "REM raster (raw f32)")->required();
  reconstruct->add_flag("--close,!--no-close", close, "Apply morphological closing to the REM");
  reconstruct->add_option("--se", se, "Structuring element size (odd)");

  // detect
  std::string detector = "rx";
  std::vector<fs::path> rems;
  std::vector<double> comb_weights = kCombinationWeights;
  WindowSpec window;
  std::optional<double> beta;
  fs::path scores_out;
  auto* detect = app.add_subcommand("detect", "Score every pixel");
  detect->add_option("-c,--cube", cube_path)->required();
  detect->add_option("--format", cube_format);
  detect->add_option("-d,--detector", detector, "rx, wrx, lrx, wlrx, aean-rem, aean-wlrx or comb");
  detect->add_option("--rem", rems, "REM raster(s); comb takes one per model");
  detect->add_option("--weights", comb_weights, "Combination weights")->delimiter(',');
  detect->add_option("--inner", window.inner);
  detect->add_option("--outer", window.outer);
  detect->add_option("--beta", beta, "Covariance regularizer (default: relative)");
  detect->add_option("-o,--out", scores_out)->required();

  // eval
  fs::path scores_path, ref_path, roc_out, map_out, results_out;
  double far = 0.01;
  std::string image = "image";
  auto* eval = app.add_subcommand("eval", "ROC, AUC and detection map");
  eval->add_option("-s,--scores", scores_path)->required();
  eval->add_option("-r,--reference", ref_path)->required();
  eval->add_option("--far", far);
  eval->add_option("--roc", roc_out);
  eval->add_option("--map", map_out);
  eval->add_option("--results", results_out);
  eval->add_option("--image", image);
  eval->add_option("-d,--detector", detector);
  eval->add_option("--seed", seed);

  // pipeline
  fs::path config_path;
  std::string seeds;
  std::vector<std::string> overrides;
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage and persist all artifacts");
  pipeline->add_option("--config", config_path, "key=value config with [sections]");
  pipeline->add_option("--set", overrides, "Override as section.key=value")->take_all();
  pipeline->add_option("--seeds", seeds, "Comma-separated seed sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    if (synth->parsed()) {
      stage(Stage::Input, [&] {
        const auto scene = generate_synthetic_hsi(spec);
        if (parse_cube_format(synth_format) == CubeFormat::Csv) save_cube_csv(scene.cube, synth_out);
        else save_cube_envi(scene.cube, synth_out);
        save_mask(scene.reference, synth_ref);
        std::cout << "anomaly pixels: " << scene.reference.cast<int>().sum() << "\n";
      });
    } else if (purify->parsed()) {
      const HsiCube cube = read_normalized(cube_path, cube_format);
      stage(Stage::Purify, [&] {
        const auto bg = threshold_by_confidence(mahalanobis_scores(cube, global_stats(cube)), gamma);
        save_mask(bg.mask, mask_out);
        std::cout << "threshold " << bg.threshold << ", background pixels " << bg.background_count() << "\n";
        if (train_dir.empty()) return;
        fs::create_directories(train_dir);
        for (int d : dims) {
          const auto set = extract_training_set(cube, bg.mask, d, block, step);
          save_training_set(set, train_dir / ("train-" + std::to_string(d) + "d.hsts"));
          std::cout << d << "D samples: " << set.count() << "\n";
        }
      });
    } else if (train->parsed()) {
      stage(Stage::Train, [&] {
        const auto set = load_training_set(set_path);
        auto model = build_aean<float>(set.dim, set.bands, set.block, derive_seed(seed, 10 + std::uint64_t(set.dim)), lambda);
        auto tc = TrainConfig::defaults_for(set.dim);
        if (epochs > 0) tc.epochs = epochs;
        if (batch > 0) tc.batch_size = batch;
        tc.seed = derive_seed(seed, 20 + std::uint64_t(set.dim));
        tc.lambda = lambda;
        tc.lr_autoencoder = tc.lr_discriminator = lr;
        tc.beta1 = beta1;
        tc.beta2 = beta2;
        tc.log_interval = log_interval;
        const auto trace = train_aean(model, set, tc);
        save_checkpoint(model, model_out);
        if (!trace_out.empty()) {
          std::ofstream f(trace_out);
          f << "step;adversarial;reconstruction;total\n";
          for (const auto& r : trace) f << r.step << ';' << r.adversarial << ';' << r.reconstruction << ';' << r.total << '\n';
        }
        if (!trace.empty()) std::cout << "final L_R " << trace.back().reconstruction << "\n";
      });
    } else if (reconstruct->parsed()) {
      const HsiCube cube = read_normalized(cube_path, cube_format);
      stage(Stage::Reconstruct, [&] {
        auto model = load_checkpoint<float>(model_path);
        const HsiCube recon = synthesize_hsi(model, cube);
        if (!recon_out.empty()) save_cube_envi(recon, recon_out);
        Raster<double> rem = compute_rem(cube, recon);
        if (close) rem = morphological_close(rem, se);
        save_raster(rem, rem_out, RasterFormat::RawF32);
      });
    } else if (detect->parsed()) {
      const HsiCube cube = read_normalized(cube_path, cube_format);
      stage(Stage::Detect, [&] {
        const Detector det = parse_detector(detector);
        Raster<double> scores;
        if (detector_uses_aean(det)) {
          if (rems.empty()) throw InvalidArgument(detector + " needs --rem");
          if (det != Detector::Comb && rems.size() != 1) throw InvalidArgument(detector + " takes one --rem");
          std::vector<Raster<double>> maps;
          for (const auto& p : rems) {
            const Raster<double> rem = load_raster(p, RasterFormat::RawF32);
            if (det == Detector::AeanRem) {
              maps.push_back(rem);
            } else {
              const auto w = weights_from_rem(rem);
              maps.push_back(local_scores(cube, &w.weights, window, beta));
            }
          }
          scores = det == Detector::Comb ? combine_scores(maps, comb_weights) : maps.front();
        } else if (det == Detector::Rx) {
          scores = rx_scores(cube, beta);
        } else if (det == Detector::Wrx) {
          scores = wrx_scores(cube, weighted_stats(cube, rx_weights(cube, beta), beta));
        } else if (det == Detector::Lrx) {
          scores = local_scores(cube, nullptr, window, beta);
        } else {
          const Raster<double> w = rx_weights(cube, beta);
          scores = local_scores(cube, &w, window, beta);
        }
        save_raster(scores, scores_out, RasterFormat::RawF32);
      });
    } else if (eval->parsed()) {
      Raster<double> scores;
      Mask ref;
      stage(Stage::Input, [&] {
        scores = load_raster(scores_path, RasterFormat::RawF32);
        ref = load_mask(ref_path);
      });
      stage(Stage::Eval, [&] {
        const auto roc = roc_curve(scores, ref);
        if (!roc_out.empty()) save_roc_csv(roc, roc_out);
        if (!map_out.empty()) save_mask(detection_map(scores, ref, far).map, map_out);
        if (!results_out.empty()) append_result(results_out, image, detector, seed, roc.auc);
        std::cout << "AUC " << roc.auc << "\n";
      });
    } else if (pipeline->parsed()) {
      PipelineConfig cfg;
      stage(Stage::Config, [&] {
        ConfigTable table;
        if (!config_path.empty()) table = read_config_file(config_path);
        for (const auto& o : overrides) {
          const auto dot = o.find('.'), eq = o.find('=');
          if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw InvalidArgument("override '" + o + "' is not section.key=value");
          table[o.substr(0, dot)][o.substr(dot + 1, eq - dot - 1)] = o.substr(eq + 1);
        }
        apply_config(cfg, table);
      });
      if (seeds.empty()) {
        const auto r = run_pipeline(cfg);
        std::cout << "AUC " << r.auc << "\n";
      } else {
        std::vector<std::uint64_t> list;
        stage(Stage::Config, [&] { list = parse_seeds(seeds); });
        const auto sweep = run_sweep(cfg, list);
        for (const auto& [s, auc] : sweep.per_seed) std::cout << "seed " << s << " AUC " << auc << "\n";
        std::cout << "mean AUC " << sweep.mean_auc << "\n";
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stage_exit_code(e.stage());
  }
  return 0;
}
