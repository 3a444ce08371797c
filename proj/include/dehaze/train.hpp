#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dehaze/augment.hpp"
#include "dehaze/checkpoint.hpp"
#include "dehaze/config.hpp"
#include "dehaze/losses.hpp"
#include "dehaze/metrics.hpp"
#include "dehaze/network.hpp"
#include "dehaze/optim.hpp"
#include "dehaze/synth.hpp"

namespace dehaze {

struct TrainPlan {
  NetworkConfig config{};
  LossWeights weights{};
  AugmentSpec aug{};
  double lr_g = 1e-4;
  double lr_d = 1e-4;  // unused for the segmentation core
  std::size_t batch = 2;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0: evaluate once, after the last iteration
  std::string dataset_tag = "synthetic";
  // Written after training, and with the last good weights on a numerical abort.
  std::optional<std::filesystem::path> checkpoint;
  // Test hook: overwrite one input sample with NaN at this iteration.
  std::optional<std::size_t> poison_iteration;

  void validate() const {
    config.validate();
    weights.validate();
    aug.validate();
    if (batch < 1) throw ParameterError("batch must be >= 1");
    if (iterations < 1) throw ParameterError("iterations must be >= 1");
    if (!(lr_g > 0.0) || (config.core == Core::generative && !(lr_d > 0.0))) {
      throw ParameterError("learning rates must be > 0");
    }
    if (config.core == Core::segmentation && weights.lambda_rec == 0.0) {
      throw ParameterError("the segmentation core trains on the reconstruction term alone; lambda_rec must be > 0");
    }
  }
};

struct TrainReport {
  std::string config;
  std::vector<double> rec;
  std::vector<double> adv_g;
  std::vector<double> loss_d;
  std::vector<std::size_t> eval_iterations;
  std::vector<MetricsRecord> evals;
  double wall_seconds = 0.0;
  std::string checkpoint;
};

namespace detail {

// (n, 3 or 4, H, W): RGB planes, then t_dcp when the config asks for it.
inline Tensor<float> assemble_input(std::span<const HazePair* const> pairs, const NetworkConfig& cfg) {
  const std::size_t h = pairs[0]->hazy.height(), w = pairs[0]->hazy.width();
  Tensor<float> x(Shape{pairs.size(), cfg.input_channels, h, w});
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const HazePair& p = *pairs[n];
    if (p.hazy.height() != h || p.hazy.width() != w) throw ConfigError("batch samples differ in extent");
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        for (std::size_t c = 0; c < 3; ++c) x.at(n, c, y, xx) = static_cast<float>(p.hazy(y, xx, c));
        if (cfg.input_channels == 4) x.at(n, 3, y, xx) = static_cast<float>(p.t_dcp(y, xx));
      }
  }
  return x;
}

inline Tensor<float> assemble_target(std::span<const HazePair* const> pairs) {
  const std::size_t h = pairs[0]->clean.height(), w = pairs[0]->clean.width();
  Tensor<float> x(Shape{pairs.size(), 3, h, w});
  for (std::size_t n = 0; n < pairs.size(); ++n)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        for (std::size_t c = 0; c < 3; ++c) x.at(n, c, y, xx) = static_cast<float>(pairs[n]->clean(y, xx, c));
  return x;
}

inline std::vector<double> scores_of(const Tensor<float>& t) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i];
  return out;
}

inline void require_finite(double v, const char* what, std::size_t iteration) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
  }
}

inline std::size_t sample_extent(const Dataset& data, const AugmentSpec& aug) {
  return aug.crop ? *aug.crop : data.extent;
}

}  // namespace detail

// Shape checks that must hold before any step is taken.
inline void check_training_shapes(const TrainPlan& plan, const Dataset& data) {
  if (data.train.empty()) throw ParameterError("training split is empty");
  for (const auto* split : {&data.train, &data.val}) {
    for (const auto& p : *split) {
      if (p.hazy.height() != data.extent || p.hazy.width() != data.extent || p.clean.height() != data.extent ||
          p.t_dcp.height() != data.extent) {
        throw ConfigError("dataset sample extent differs from the declared " + std::to_string(data.extent));
      }
    }
  }
  if (plan.aug.crop && *plan.aug.crop > data.extent) {
    throw ConfigError("crop " + std::to_string(*plan.aug.crop) + " exceeds dataset extent " + std::to_string(data.extent));
  }
  const std::size_t e = detail::sample_extent(data, plan.aug);
  plan.config.check_extent(e, e);
  if (!data.val.empty()) plan.config.check_extent(data.extent, data.extent);
}

// Generator output for one pair, as an image. zero_t blanks the guidance plane.
inline ImageRGB predict(const Generator<float>& gen, const HazePair& pair, bool zero_t = false) {
  const HazePair* one[1] = {&pair};
  Tensor<float> x = detail::assemble_input(std::span<const HazePair* const>(one, 1), gen.config());
  if (zero_t && gen.config().input_channels == 4) {
    for (std::size_t y = 0; y < x.shape().h; ++y)
      for (std::size_t xx = 0; xx < x.shape().w; ++xx) x.at(0, 3, y, xx) = 0.0f;
  }
  Tape<float> tape;
  const Tensor<float>& out = gen(tape.constant(std::move(x))).value();
  ImageRGB img(out.shape().h, out.shape().w);
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t xx = 0; xx < img.width(); ++xx)
      for (std::size_t c = 0; c < 3; ++c) img(y, xx, c) = std::clamp(static_cast<double>(out.at(0, c, y, xx)), 0.0, 1.0);
  return img;
}

inline MetricsRecord evaluate(const Generator<float>& gen, std::span<const HazePair> val, std::string config_label,
                              std::string dataset_tag) {
  if (val.empty()) throw ParameterError("evaluation split is empty");
  MetricsRecord r;
  r.config = std::move(config_label);
  r.dataset = std::move(dataset_tag);
  for (const HazePair& p : val) {
    gen.config().check_extent(p.hazy.height(), p.hazy.width());
    const ImageRGB out = predict(gen, p);
    r.psnr.push_back(psnr(out, p.clean));
    r.ssim.push_back(ssim(out, p.clean));
    r.baseline_psnr.push_back(psnr(p.hazy, p.clean));
    r.baseline_ssim.push_back(ssim(p.hazy, p.clean));
  }
  r.finalize();
  return r;
}

inline MetricsRecord evaluate(const std::filesystem::path& checkpoint, std::span<const HazePair> val,
                              std::string dataset_tag) {
  const Model model = load_checkpoint(checkpoint);
  return evaluate(model.generator, val, config_name(model.config()), std::move(dataset_tag));
}

// Adversarial (or reconstruction-only) training. Deterministic given plan and data.
inline TrainReport train(const TrainPlan& plan, const Dataset& data, Model* out_model = nullptr) {
  plan.validate();
  check_training_shapes(plan, data);
  const auto start = std::chrono::steady_clock::now();
  const NetworkConfig& cfg = plan.config;
  const bool adversarial = cfg.core == Core::generative;
  Model model(cfg, plan.seed);
  AugmentSpec aug = plan.aug;
  Rng rng(sample_seed(plan.seed, 2, aug.seed));
  const AdamSettings g_opt{plan.lr_g}, d_opt{plan.lr_d};

  TrainReport report;
  report.config = config_name(cfg);
  std::vector<Tensor<float>> last_good;
  auto snapshot = [&] {
    last_good.clear();
    model.for_each_parameter([&](const Parameter<float>& p) { last_good.push_back(p.value); });
  };
  auto restore = [&] {
    std::size_t i = 0;
    model.for_each_parameter([&](Parameter<float>& p) { p.value = last_good[i++]; });
  };
  auto run_eval = [&](std::size_t iteration) {
    if (data.val.empty()) return;
    report.eval_iterations.push_back(iteration);
    report.evals.push_back(evaluate(model.generator, data.val, report.config, plan.dataset_tag));
  };

  for (std::size_t it = 0; it < plan.iterations; ++it) {
    std::vector<HazePair> samples;
    samples.reserve(plan.batch);
    for (std::size_t b = 0; b < plan.batch; ++b) {
      const auto index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(data.train.size() - 1)));
      samples.push_back(draw_training_sample(data.train, index, aug, rng));
    }
    std::vector<const HazePair*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    Tensor<float> input = detail::assemble_input(ptrs, cfg);
    if (plan.poison_iteration && *plan.poison_iteration == it) input[0] = std::nanf("");
    const Tensor<float> target = detail::assemble_target(ptrs);
    snapshot();

    try {
      // Generator step.
      Tape<float> tape;
      const Var<float> x = tape.constant(input);
      const Var<float> fake = model.generator(x);
      const Var<float> rec = reconstruction_loss(fake, tape.constant(target));
      detail::require_finite(rec.value()[0], "reconstruction loss", it);
      double adv = 0.0;
      Var<float> total = scale(rec, static_cast<float>(adversarial ? plan.weights.lambda_rec : 1.0));
      if (adversarial) {
        const Discriminator<float>& disc = *model.discriminator;
        const Var<float> d_in = cfg.conditional_discriminator ? concat_channels(x, fake) : fake;
        const Var<float> g_adv = least_squares(disc(d_in), 1.0);
        adv = g_adv.value()[0];
        detail::require_finite(adv, "generator adversarial loss", it);
        total = add(total, scale(g_adv, static_cast<float>(plan.weights.lambda_adv)));
      }
      model.generator.parameters().zero_grad();
      if (adversarial) model.discriminator->parameters().zero_grad();
      tape.backward(total);
      model.generator.parameters().step(g_opt);

      // Discriminator step on the detached fake.
      double loss_d = 0.0;
      if (adversarial) {
        Discriminator<float>& disc = *model.discriminator;
        Tape<float> dt;
        Tensor<float> fake_v = fake.value();
        Var<float> real_in = dt.constant(target), fake_in = dt.constant(std::move(fake_v));
        if (cfg.conditional_discriminator) {
          const Var<float> cond = dt.constant(input);
          real_in = concat_channels(cond, real_in);
          fake_in = concat_channels(cond, fake_in);
        }
        const Var<float> d_real = disc(real_in), d_fake = disc(fake_in);
        loss_d = adversarial_losses(detail::scores_of(d_real.value()), detail::scores_of(d_fake.value())).discriminator;
        detail::require_finite(loss_d, "discriminator loss", it);
        const Var<float> d_total = add(least_squares(d_real, 1.0), least_squares(d_fake, 0.0));
        disc.parameters().zero_grad();
        dt.backward(d_total);
        disc.parameters().step(d_opt);
      }
      report.rec.push_back(rec.value()[0]);
      report.adv_g.push_back(adv);
      report.loss_d.push_back(loss_d);
    } catch (const NumericalError&) {
      restore();
      if (plan.checkpoint) save_checkpoint(model, *plan.checkpoint);
      if (out_model) *out_model = std::move(model);
      throw;
    }
    if (plan.eval_every > 0 && (it + 1) % plan.eval_every == 0 && it + 1 != plan.iterations) run_eval(it + 1);
  }
  run_eval(plan.iterations);
  if (plan.checkpoint) {
    save_checkpoint(model, *plan.checkpoint);
    report.checkpoint = plan.checkpoint->string();
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out_model) *out_model = std::move(model);
  return report;
}

struct AblationRow {
  std::string name;
  MetricsRecord metrics;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

// Trains and evaluates each preset on the same data and seed. The plan's
// base_width and depth carry over to every preset.
inline AblationTable run_ablation(const std::vector<std::string>& names, const TrainPlan& plan, const Dataset& data) {
  std::vector<std::string> unknown;
  const auto known = preset_names();
  for (const auto& n : names) {
    if (std::find(known.begin(), known.end(), n) == known.end()) unknown.push_back(n);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& n : unknown) list += (list.empty() ? "'" : ", '") + n + "'";
    throw ConfigError("unknown preset name(s): " + list);
  }
  if (data.val.empty()) throw ParameterError("ablation needs a validation split");
  AblationTable table;
  for (const auto& n : names) {
    TrainPlan p = plan;
    p.config = preset_config(n);
    p.config.base_width = plan.config.base_width;
    p.config.depth = plan.config.depth;
    p.eval_every = 0;
    p.checkpoint.reset();
    TrainReport r = train(p, data);
    r.evals.back().config = n;
    table.rows.push_back({n, r.evals.back()});
  }
  return table;
}

// Structured reports. Key order is fixed; wall time is left out so reruns
// compare byte for byte.

inline nlohmann::ordered_json to_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["config"] = r.config;
  j["dataset"] = r.dataset;
  j["mean_psnr"] = r.mean_psnr;
  j["mean_ssim"] = r.mean_ssim;
  j["baseline_mean_psnr"] = r.baseline_mean_psnr;
  j["baseline_mean_ssim"] = r.baseline_mean_ssim;
  j["psnr"] = r.psnr;
  j["ssim"] = r.ssim;
  j["baseline_psnr"] = r.baseline_psnr;
  j["baseline_ssim"] = r.baseline_ssim;
  return j;
}

inline nlohmann::ordered_json to_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["config"] = r.config;
  j["iterations"] = r.rec.size();
  j["checkpoint"] = r.checkpoint;
  j["rec"] = r.rec;
  j["adv_g"] = r.adv_g;
  j["loss_d"] = r.loss_d;
  auto evals = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.evals.size(); ++i) {
    nlohmann::ordered_json e;
    e["iteration"] = r.eval_iterations[i];
    e["metrics"] = to_json(r.evals[i]);
    evals.push_back(std::move(e));
  }
  j["evals"] = std::move(evals);
  return j;
}

inline nlohmann::ordered_json to_json(const AblationTable& t) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json r;
    r["name"] = row.name;
    r["psnr"] = row.metrics.mean_psnr;
    r["ssim"] = row.metrics.mean_ssim;
    r["baseline_psnr"] = row.metrics.baseline_mean_psnr;
    r["baseline_ssim"] = row.metrics.baseline_mean_ssim;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace dehaze
