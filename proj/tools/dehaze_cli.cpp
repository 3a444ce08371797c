// Command-line front end: classical dehazing, dataset synthesis, training,
// evaluation, the preset ablation and the gradient suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dehaze/dataset_io.hpp"
#include "dehaze/dcp.hpp"
#include "dehaze/gradcheck_suite.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/train.hpp"

namespace fs = std::filesystem;
using namespace dehaze;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 2;
}

void write_report(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

// A preset name, or else a configuration file.
NetworkConfig resolve_config(const std::string& spec) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return preset_config(spec);
  if (fs::exists(spec)) return load_config_file(spec);
  throw ConfigError("'" + spec + "' is neither a preset name nor a readable config file");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

struct AugFlags {
  std::size_t crop = 0;
  double hflip = 0.0;
  double mosaic = 0.0;
  std::size_t cutout = 0;

  void add_to(CLI::App* app) {
    app->add_option("--crop", crop, "Random square crop extent (0 = none)")->capture_default_str();
    app->add_option("--hflip", hflip, "Horizontal flip probability")->capture_default_str();
    app->add_option("--mosaic", mosaic, "Four-image mosaic probability")->capture_default_str();
    app->add_option("--cutout", cutout, "Cutout rectangles per sample (0 = none)")->capture_default_str();
  }
  AugmentSpec spec(std::uint64_t seed) const {
    AugmentSpec a;
    if (crop > 0) a.crop = crop;
    a.hflip_prob = hflip;
    a.mosaic_prob = mosaic;
    if (cutout > 0) a.cutout = CutoutSpec{cutout, 0.1};
    a.seed = seed;
    return a;
  }
};

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Haze removal toolkit: dark-channel prior, synthetic data, U-Net style generators."};
  app.require_subcommand(1);

  // dehaze-dcp
  auto* dcp = app.add_subcommand("dehaze-dcp", "Dehaze one image with the dark channel prior");
  std::string dcp_in, dcp_out, dcp_t_out;
  DcpParams dp;
  dcp->add_option("--in", dcp_in, "Hazy input image (PPM/PGM)")->required();
  dcp->add_option("--out", dcp_out, "Dehazed output image (PPM)")->required();
  dcp->add_option("--t-out", dcp_t_out, "Refined transmission map output (gray PPM)");
  dcp->add_option("--omega", dp.omega, "Haze retention factor omega")->capture_default_str();
  dcp->add_option("--patch", dp.patch, "Dark channel patch size (odd)")->capture_default_str();
  dcp->add_option("--t-floor", dp.t_floor, "Lower bound on t during recovery")->capture_default_str();
  dcp->add_option("--bright-fraction", dp.bright_fraction, "Brightest dark-channel fraction for A")->capture_default_str();
  dcp->add_option("--guided-radius", dp.guided_radius, "Guided filter radius")->capture_default_str();
  dcp->add_option("--guided-eps", dp.guided_eps, "Guided filter regularizer")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic hazy/clean dataset");
  std::string synth_out;
  std::size_t n_train = 32, n_val = 8, size = 48;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--train", n_train, "Training pairs")->capture_default_str();
  synth->add_option("--val", n_val, "Validation pairs")->capture_default_str();
  synth->add_option("--size", size, "Square image extent")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Dataset seed")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train a generator (and discriminator) on a dataset");
  std::string train_data, train_config = "EDN-GTM", train_out, train_report;
  TrainPlan plan;
  AugFlags train_aug;
  trn->add_option("--data", train_data, "Dataset directory written by synth")->required();
  trn->add_option("--config", train_config, "Preset name or config file")->capture_default_str();
  trn->add_option("--out", train_out, "Checkpoint output path")->required();
  trn->add_option("--report", train_report, "Training report output (JSON)");
  trn->add_option("--iters", plan.iterations, "Iterations")->capture_default_str();
  trn->add_option("--batch", plan.batch, "Batch size")->capture_default_str();
  trn->add_option("--seed", plan.seed, "Training seed")->capture_default_str();
  trn->add_option("--lr-g", plan.lr_g, "Generator learning rate")->capture_default_str();
  trn->add_option("--lr-d", plan.lr_d, "Discriminator learning rate")->capture_default_str();
  trn->add_option("--lambda-adv", plan.weights.lambda_adv, "Adversarial loss weight")->capture_default_str();
  trn->add_option("--lambda-rec", plan.weights.lambda_rec, "Reconstruction loss weight")->capture_default_str();
  trn->add_option("--eval-every", plan.eval_every, "Validation interval in iterations (0 = end only)")->capture_default_str();
  std::size_t train_nan_at = 0;
  trn->add_option("--inject-nan-at", train_nan_at, "Fault injection: poison the input at this 1-based iteration");
  train_aug.add_to(trn);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the validation split");
  std::string eval_ckpt, eval_data, eval_report;
  ev->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  ev->add_option("--data", eval_data, "Dataset directory")->required();
  ev->add_option("--report", eval_report, "Metrics report output (JSON)")->required();

  // ablate
  auto* abl = app.add_subcommand("ablate", "Train and score each preset under one plan");
  std::string abl_data, abl_report, abl_presets;
  TrainPlan abl_plan;
  std::size_t abl_width = 16;
  AugFlags abl_aug;
  abl->add_option("--data", abl_data, "Dataset directory")->required();
  abl->add_option("--report", abl_report, "Ablation table output (JSON)")->required();
  abl->add_option("--presets", abl_presets, "Comma-separated preset names (default: the six table presets)");
  abl->add_option("--iters", abl_plan.iterations, "Iterations per preset")->capture_default_str();
  abl->add_option("--batch", abl_plan.batch, "Batch size")->capture_default_str();
  abl->add_option("--seed", abl_plan.seed, "Shared seed")->capture_default_str();
  abl->add_option("--lr", abl_plan.lr_g, "Learning rate for both networks")->capture_default_str();
  abl->add_option("--base-width", abl_width, "Stage-0 channel width for every preset")->capture_default_str();
  abl_aug.add_to(abl);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  SuiteOptions suite;
  suite.all_presets = true;
  bool gc_quick = false;
  std::string gc_report;
  gc->add_flag("--quick", gc_quick, "Check only the EDN-GTM generator among the presets");
  gc->add_option("--report", gc_report, "Per-check report output (JSON)");
  gc->add_option("--seed", suite.check.seed, "Coordinate sampling seed")->capture_default_str();
  gc->add_option("--samples", suite.check.samples_per_tensor, "Coordinates sampled per tensor")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    return app.exit(CLI::CallForHelp());
  } catch (const CLI::CallForAllHelp&) {
    return app.exit(CLI::CallForAllHelp());
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[E_USAGE]: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*dcp) {
      const DcpResult r = dcp_dehaze(load_image(dcp_in), dp);
      save_image(r.dehazed, dcp_out);
      if (!dcp_t_out.empty()) save_gray(r.transmission, dcp_t_out);
      std::printf("A = (%.6f, %.6f, %.6f)\n", r.light.rgb[0], r.light.rgb[1], r.light.rgb[2]);
    } else if (*synth) {
      const Dataset ds = make_dataset(n_train, n_val, size, synth_seed);
      write_dataset(ds, synth_out);
      std::printf("wrote %zu train / %zu val pairs (%zux%zu) to %s\n", n_train, n_val, size, size, synth_out.c_str());
    } else if (*trn) {
      plan.config = resolve_config(train_config);
      plan.aug = train_aug.spec(plan.seed);
      plan.checkpoint = train_out;
      if (train_nan_at > 0) plan.poison_iteration = train_nan_at - 1;
      const Dataset ds = read_dataset(train_data);
      const TrainReport r = train(plan, ds);
      if (!train_report.empty()) write_report(train_report, to_json(r));
      std::printf("%s: %zu iterations, rec %.6f -> %.6f", r.config.c_str(), r.rec.size(), r.rec.front(), r.rec.back());
      if (!r.evals.empty()) {
        std::printf(", val PSNR %.3f dB (hazy %.3f), SSIM %.4f (hazy %.4f)", r.evals.back().mean_psnr,
                    r.evals.back().baseline_mean_psnr, r.evals.back().mean_ssim, r.evals.back().baseline_mean_ssim);
      }
      std::printf("\ncheckpoint: %s (%.1f s)\n", train_out.c_str(), r.wall_seconds);
    } else if (*ev) {
      const Dataset ds = read_dataset(eval_data);
      const MetricsRecord r = evaluate(eval_ckpt, ds.val, fs::path(eval_data).filename().string());
      write_report(eval_report, to_json(r));
      std::printf("%s: PSNR %.3f dB (hazy %.3f), SSIM %.4f (hazy %.4f) over %zu images\n", r.config.c_str(), r.mean_psnr,
                  r.baseline_mean_psnr, r.mean_ssim, r.baseline_mean_ssim, r.psnr.size());
    } else if (*abl) {
      const auto names = abl_presets.empty() ? table_preset_names() : split_list(abl_presets);
      abl_plan.lr_d = abl_plan.lr_g;
      abl_plan.config.base_width = abl_width;
      abl_plan.aug = abl_aug.spec(abl_plan.seed);
      const Dataset ds = read_dataset(abl_data);
      const AblationTable t = run_ablation(names, abl_plan, ds);
      write_report(abl_report, to_json(t));
      for (const auto& row : t.rows) {
        std::printf("%-30s PSNR %7.3f  SSIM %.4f\n", row.name.c_str(), row.metrics.mean_psnr, row.metrics.mean_ssim);
      }
    } else if (*gc) {
      suite.all_presets = !gc_quick;
      std::size_t failed = 0;
      const auto entries = run_gradcheck_suite(suite, [&](const SuiteEntry& e) {
        if (!e.passed) ++failed;
        std::printf("%-4s %-40s max rel err %.3e (tol %.0e, %zu coords, %zu skipped)\n", e.passed ? "ok" : "FAIL",
                    e.name.c_str(), e.max_rel_error, e.tolerance, e.coordinates, e.skipped_kinks);
        std::fflush(stdout);
      });
      if (!gc_report.empty()) {
        auto j = nlohmann::ordered_json::array();
        for (const auto& e : entries) {
          j.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"tolerance", e.tolerance},
                       {"coordinates", e.coordinates}, {"skipped_kinks", e.skipped_kinks}, {"passed", e.passed}});
        }
        write_report(gc_report, j);
      }
      std::printf("gradcheck: %zu/%zu passed\n", entries.size() - failed, entries.size());
      if (failed > 0) {
        std::cerr << "error[E_GRADCHECK]: " << failed << " gradient check(s) failed\n";
        return 3;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error[E_FORMAT]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[E_INTERNAL]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int main(int argc, char** argv) { return run_cli(argc, argv); }
