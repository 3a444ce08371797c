#pragma once

// The full finite-difference suite: every layer type, the composite blocks,
// and whole generator/discriminator graphs, all in double precision.

#include <functional>
#include <string>
#include <vector>

#include "dehaze/config.hpp"
#include "dehaze/gradcheck.hpp"
#include "dehaze/losses.hpp"
#include "dehaze/network.hpp"
#include "dehaze/ops.hpp"

namespace dehaze {

struct SuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

struct SuiteOptions {
  GradcheckOptions check{};
  // Also check the generator of every preset, not only EDN-GTM.
  bool all_presets = false;
  std::size_t extent = 16;
  std::size_t base_width = 4;
};

namespace detail {

inline Tensor<double> seeded_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Random linear readout, so the scalar loss depends on every output value.
inline Var<double> readout(Var<double> y, std::uint64_t seed = 99) {
  return mean(multiply(y, y.tape->constant(seeded_tensor(y.shape(), seed))));
}

inline std::vector<NamedTensor> parameter_tensors(ParameterStore<double>& store) {
  std::vector<NamedTensor> out;
  store.for_each([&](Parameter<double>& p) { out.push_back({p.name, &p.value}); });
  return out;
}

}  // namespace detail

inline std::vector<SuiteEntry> run_gradcheck_suite(const SuiteOptions& opts = {},
                                                   const std::function<void(const SuiteEntry&)>& on_entry = {}) {
  using detail::readout;
  using detail::seeded_tensor;
  using Build = std::function<Var<double>(Tape<double>&)>;
  std::vector<SuiteEntry> entries;
  auto check = [&](const std::string& name, double tol, const Build& build, const std::vector<NamedTensor>& tensors) {
    const GradcheckResult r = finite_diff_gradcheck(build, tensors, opts.check);
    SuiteEntry e{name, r.max_rel_error, tol, r.coordinates, r.skipped_kinks, r.passed(tol)};
    entries.push_back(e);
    if (on_entry) on_entry(e);
  };
  constexpr double tol = 1e-3, linear_tol = 1e-6;

  // Layers, on (1,2,6,6) inputs.
  auto x = seeded_tensor({1, 2, 6, 6}, 20);
  auto other = seeded_tensor({1, 2, 6, 6}, 24);
  auto w = seeded_tensor({3, 2, 3, 3}, 21);
  auto b = seeded_tensor({1, 3, 1, 1}, 22);
  auto dw = seeded_tensor({3, 2, 1, 1}, 23);
  auto gate_s = seeded_tensor({1, 1, 6, 6}, 26);
  auto gate_c = seeded_tensor({1, 2, 1, 1}, 27);
  const std::vector<NamedTensor> conv_args{{"x", &x}, {"w", &w}, {"b", &b}};
  const std::vector<NamedTensor> only_x{{"x", &x}};
  const std::vector<NamedTensor> pair{{"a", &x}, {"b", &other}};

  check("layer/conv2d", tol, [&](Tape<double>& t) { return readout(activate(conv2d(t.parameter(x), t.parameter(w), t.parameter(b), 1, 1), {ActivationKind::swish})); }, conv_args);
  check("layer/conv2d_stride2", tol, [&](Tape<double>& t) { return readout(activate(conv2d(t.parameter(x), t.parameter(w), t.parameter(b), 2, 1), {ActivationKind::swish})); }, conv_args);
  check("layer/maxpool2x2", tol, [&](Tape<double>& t) { return readout(maxpool2d(t.parameter(x), 2, 2)); }, only_x);
  for (std::size_t k : {5u, 9u, 13u}) {
    check("layer/maxpool" + std::to_string(k), tol,
          [&, k](Tape<double>& t) { return readout(maxpool2d(t.parameter(x), k, 1, (k - 1) / 2)); }, only_x);
  }
  check("layer/upsample_nearest2x", tol, [&](Tape<double>& t) { return readout(upsample_nearest2x(t.parameter(x))); }, only_x);
  check("layer/concat_channels", tol, [&](Tape<double>& t) { return readout(concat_channels(t.parameter(x), t.parameter(other))); }, pair);
  check("layer/slice_channels", tol, [&](Tape<double>& t) { return readout(slice_channels(t.parameter(x), 1, 1)); }, only_x);
  for (ActivationKind a : {ActivationKind{ActivationKind::relu}, ActivationKind{ActivationKind::leaky_relu, 0.1},
                           ActivationKind{ActivationKind::swish}, ActivationKind{ActivationKind::mish},
                           ActivationKind{ActivationKind::sigmoid}, ActivationKind{ActivationKind::identity}}) {
    check("layer/activate_" + std::string(activation_name(a.kind)), tol,
          [&, a](Tape<double>& t) { return readout(activate(t.parameter(x), a)); }, only_x);
  }
  check("layer/dense", tol, [&](Tape<double>& t) { return readout(dense(global_avg_pool(t.parameter(x)), t.parameter(dw), t.parameter(b))); },
        {{"x", &x}, {"w", &dw}, {"b", &b}});
  check("layer/global_avg_pool", tol, [&](Tape<double>& t) { return readout(global_avg_pool(t.parameter(x))); }, only_x);
  check("layer/global_max_pool", tol, [&](Tape<double>& t) { return readout(global_max_pool(t.parameter(x))); }, only_x);
  check("layer/channel_mean", tol, [&](Tape<double>& t) { return readout(channel_mean(t.parameter(x))); }, only_x);
  check("layer/channel_max", tol, [&](Tape<double>& t) { return readout(channel_max(t.parameter(x))); }, only_x);
  check("layer/mul_gate_spatial", tol, [&](Tape<double>& t) { return readout(mul_gate(t.parameter(x), t.parameter(gate_s))); },
        {{"x", &x}, {"gate", &gate_s}});
  check("layer/mul_gate_channel", tol, [&](Tape<double>& t) { return readout(mul_gate(t.parameter(x), t.parameter(gate_c))); },
        {{"x", &x}, {"gate", &gate_c}});
  check("layer/add", tol, [&](Tape<double>& t) { return readout(add(t.parameter(x), t.parameter(other))); }, pair);
  check("layer/multiply", tol, [&](Tape<double>& t) { return readout(multiply(t.parameter(x), t.parameter(other))); }, pair);
  check("loss/reconstruction_l1", tol, [&](Tape<double>& t) { return reconstruction_loss(t.parameter(x), t.parameter(other)); }, pair);
  check("loss/least_squares", tol, [&](Tape<double>& t) { return least_squares(t.parameter(x), 1.0); }, only_x);

  // Purely linear graphs: central differences are exact up to roundoff.
  check("linear/conv_mean", linear_tol, [&](Tape<double>& t) { return mean(conv2d(t.parameter(x), t.parameter(w), t.parameter(b), 1, 1)); }, conv_args);
  check("linear/conv_upsample_concat_readout", linear_tol,
        [&](Tape<double>& t) {
          Var<double> y = upsample_nearest2x(conv2d(t.parameter(x), t.parameter(w), t.parameter(b), 1, 1));
          return readout(concat_channels(y, scale(y, -0.5)));
        },
        conv_args);

  // Composite blocks on (1,8,6,6).
  auto feat = seeded_tensor({1, 8, 6, 6}, 40);
  auto with_input = [&](ParameterStore<double>& store) {
    auto tensors = detail::parameter_tensors(store);
    tensors.insert(tensors.begin(), {"x", &feat});
    return tensors;
  };
  {
    ParameterStore<double> store;
    Rng rng(41);
    SppBlock<double> spp(store, "spp", 8, {5, 9, 13}, rng);
    check("block/spp", tol, [&](Tape<double>& t) { return readout(spp(t.parameter(feat))); }, with_input(store));
  }
  {
    ParameterStore<double> store;
    Rng rng(42);
    CspBlock<double> csp(store, "csp", 8, {ActivationKind::swish}, rng);
    check("block/csp", tol, [&](Tape<double>& t) { return readout(csp(t.parameter(feat))); }, with_input(store));
  }
  for (Attention kind : {Attention::sam, Attention::cam}) {
    ParameterStore<double> store;
    Rng rng(43);
    AttentionBlock<double> attn(store, "attn", 8, kind, rng);
    check("block/" + std::string(attention_name(kind)), tol, [&](Tape<double>& t) { return readout(attn(t.parameter(feat))); },
          with_input(store));
  }

  // Whole graphs.
  std::vector<std::string> generators{"EDN-GTM"};
  if (opts.all_presets) generators = preset_names();
  for (const auto& name : generators) {
    NetworkConfig cfg = preset_config(name);
    cfg.base_width = opts.base_width;
    Generator<double> gen(cfg, 7);
    auto input = seeded_tensor({1, cfg.input_channels, opts.extent, opts.extent}, 50, 0.0, 1.0);
    auto tensors = detail::parameter_tensors(gen.parameters());
    tensors.insert(tensors.begin(), {"input", &input});
    check("generator/" + name, tol, [&](Tape<double>& t) { return readout(gen(t.parameter(input))); }, tensors);
  }
  {
    NetworkConfig cfg = preset_config("EDN-GTM");
    cfg.base_width = opts.base_width;
    Discriminator<double> disc(cfg, 0);
    auto input = seeded_tensor({2, disc.input_channels(), opts.extent, opts.extent}, 100, 0.0, 1.0);
    auto tensors = detail::parameter_tensors(disc.parameters());
    tensors.insert(tensors.begin(), {"input", &input});
    check("discriminator/EDN-GTM", tol, [&](Tape<double>& t) { return readout(disc(t.parameter(input))); }, tensors);
  }
  return entries;
}

}  // namespace dehaze
