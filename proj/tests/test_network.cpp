#include <gtest/gtest.h>

#include <cmath>

#include "dehaze/config.hpp"
#include "dehaze/gradcheck_suite.hpp"
#include "dehaze/network.hpp"
#include "test_util.hpp"

using namespace dehaze;
using testutil::random_tensor;

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; }

Tensor<float> random_input(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

// Reference max over the k x k window clipped to the image.
double window_max(const Tensor<double>& x, std::size_t nc, long y, long xx, long r) {
  const Shape s = x.shape();
  double m = -1e300;
  for (long dy = -r; dy <= r; ++dy)
    for (long dx = -r; dx <= r; ++dx) {
      const long yy = y + dy, xc = xx + dx;
      if (yy < 0 || xc < 0 || yy >= long(s.h) || xc >= long(s.w)) continue;
      m = std::max(m, x[nc * s.plane() + std::size_t(yy) * s.w + std::size_t(xc)]);
    }
  return m;
}

}  // namespace

TEST(Presets, TwelveConfigurationsSixReported) {
  EXPECT_EQ(preset_names().size(), 12u);
  const std::vector<std::string> table{"S-U-Net",        "G-U-Net",
                                       "G-U-Net 4-C",    "SPP G-U-Net 4-C (ReLU)",
                                       "SPP G-U-Net 4-C (Swish)", "EDN-GTM"};
  EXPECT_EQ(table_preset_names(), table);
  // All twelve are distinct architectures.
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = i + 1; j < 12; ++j)
      EXPECT_FALSE(preset_config(preset_names()[i]) == preset_config(preset_names()[j]));
}

TEST(Presets, IncrementalMapping) {
  const auto s = preset_config("S-U-Net");
  EXPECT_EQ(s.core, Core::segmentation);
  EXPECT_EQ(s.input_channels, 3u);
  EXPECT_EQ(s.bottleneck, Bottleneck::plain);
  EXPECT_EQ(s.activation.kind, ActivationKind::relu);
  EXPECT_EQ(s.extra_convs_per_stage, 0u);
  const auto e = preset_config("EDN-GTM");
  EXPECT_EQ(e.core, Core::generative);
  EXPECT_EQ(e.input_channels, 4u);
  EXPECT_EQ(e.bottleneck, Bottleneck::spp);
  EXPECT_EQ(e.activation.kind, ActivationKind::swish);
  EXPECT_EQ(e.extra_convs_per_stage, 1u);
  EXPECT_EQ(preset_config("CSP G-U-Net 4-C").bottleneck, Bottleneck::csp);
  EXPECT_EQ(preset_config("SPP G-U-Net 4-C CAM").attention, Attention::cam);
}

TEST(Presets, NamesRoundTripThroughParsing) {
  for (const auto& name : preset_names()) {
    const NetworkConfig cfg = parse_config_text("preset = " + name + "\n");
    EXPECT_EQ(config_name(cfg), name);
    EXPECT_EQ(parse_config_text(config_to_text(cfg)), cfg) << name;
  }
  NetworkConfig odd = preset_config("EDN-GTM");
  odd.attention = Attention::sam;
  EXPECT_EQ(config_name(odd), "custom");
  odd.activation.slope = 0.123456789;
  EXPECT_EQ(parse_config_text(config_to_text(odd)), odd);
}

TEST(ConfigText, OverridesAndErrors) {
  const auto cfg = parse_config_text("# toy\n\nbase_width = 8\npreset = G-U-Net 4-C\n  depth = 2 \n");
  EXPECT_EQ(cfg.base_width, 8u);
  EXPECT_EQ(cfg.depth, 2u);
  EXPECT_EQ(config_name(cfg), "G-U-Net 4-C");
  EXPECT_EQ(parse_config_text("spp_kernels = 3, 7\n").spp_kernels, (std::vector<std::size_t>{3, 7}));

  auto code_of = [](const std::string& text) -> std::string {
    try {
      parse_config_text(text);
    } catch (const Error& e) {
      return e.what();
    }
    return "ok";
  };
  EXPECT_NE(code_of("colour = red\n").find("unknown configuration key 'colour'"), std::string::npos);
  EXPECT_NE(code_of("preset = U-Net++\n").find("U-Net++"), std::string::npos);
  EXPECT_NE(code_of("depth = 2\ndepth = 3\n").find("repeated"), std::string::npos);
  EXPECT_NE(code_of("depth = two\n").find("depth"), std::string::npos);
  EXPECT_NE(code_of("just words\n").find("line 1"), std::string::npos);
  EXPECT_THROW(parse_config_text("input_channels = 5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("stage_kernel = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_text("depth = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("activation = leaky_relu\nleaky_slope = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("activation = gelu\n"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/cfg.txt"), IoError);
}

TEST(Generator, EveryPresetForwardAt64) {
  for (const auto& name : preset_names()) {
    const NetworkConfig cfg = preset_config(name);
    Generator<float> gen(cfg, 3);
    Tape<float> tape;
    const auto y = gen(tape.input(random_input({1, cfg.input_channels, 64, 64}, 4), false));
    EXPECT_EQ(y.shape(), (Shape{1, 3, 64, 64})) << name;
    for (float v : y.value().values()) {
      ASSERT_GT(v, 0.0f) << name;
      ASSERT_LT(v, 1.0f) << name;
    }
  }
}

TEST(Generator, ContractViolations) {
  Generator<float> three(preset_config("G-U-Net"), 1);
  Tape<float> tape;
  try {
    three(tape.input(random_input({1, 4, 16, 16}, 1), false));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "c");
  }
  Generator<float> four(preset_config("EDN-GTM"), 1);
  try {
    four(tape.input(random_input({1, 4, 60, 64}, 1), false));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2^depth = 8"), std::string::npos);
  }
}

TEST(Generator, ParameterCountClosedForm) {
  NetworkConfig cfg = preset_config("G-U-Net 4-C");
  cfg.depth = 2;
  cfg.base_width = 4;
  cfg.extra_convs_per_stage = 1;
  // Layer list written out by hand: (in, out, k).
  const std::vector<std::array<std::size_t, 3>> layers{
      {4, 4, 3},  {4, 4, 3},   {4, 4, 3},                // enc0
      {4, 8, 3},  {8, 8, 3},   {8, 8, 3},                // enc1
      {8, 16, 3}, {16, 16, 3}, {16, 16, 3},              // bottleneck
      {16, 8, 3}, {16, 8, 3},  {8, 8, 3},   {8, 8, 3},   // dec1: up, then 3 convs after concat
      {8, 4, 3},  {8, 4, 3},   {4, 4, 3},   {4, 4, 3},   // dec0
      {4, 3, 3},                                         // head
  };
  std::size_t expected = 0;
  for (const auto& l : layers) expected += conv_params(l[0], l[1], l[2]);
  EXPECT_EQ(expected, 12195u);
  EXPECT_EQ(Generator<float>(cfg).parameters().scalar_count(), expected);
}

TEST(Generator, DeterministicInit) {
  const auto cfg = preset_config("EDN-GTM");
  Generator<float> a(cfg, 5), b(cfg, 5), c(cfg, 6);
  EXPECT_EQ(a.parameters()[0].value.values()[3], b.parameters()[0].value.values()[3]);
  EXPECT_NE(a.parameters()[0].value.values()[3], c.parameters()[0].value.values()[3]);
  // Biases start at zero.
  for (float v : a.parameters()[1].value.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Discriminator, ShapesAndWidths) {
  NetworkConfig cfg = preset_config("EDN-GTM");
  cfg.conditional_discriminator = false;
  Discriminator<float> plain(cfg, 1);
  Tape<float> tape;
  EXPECT_EQ(plain(tape.input(random_input({2, 4, 64, 64}, 2), false)).shape(), (Shape{2, 1, 1, 1}));
  EXPECT_EQ(plain.stage_widths(), Generator<float>(cfg).stage_widths());
  EXPECT_EQ(plain.stage_widths(), (std::vector<std::size_t>{16, 32, 64}));

  cfg.conditional_discriminator = true;
  Discriminator<float> cond(cfg, 1);
  EXPECT_EQ(cond.input_channels(), 7u);
  EXPECT_EQ(cond(tape.input(random_input({2, 7, 64, 64}, 2), false)).shape(), (Shape{2, 1, 1, 1}));
  EXPECT_THROW(cond(tape.input(random_input({2, 4, 64, 64}, 2), false)), DimensionError);
  EXPECT_THROW(Discriminator<float>(preset_config("S-U-Net")), ConfigError);
}

TEST(Discriminator, GradcheckAt8x8) {
  NetworkConfig cfg = preset_config("EDN-GTM");
  cfg.base_width = 4;
  Discriminator<double> disc(cfg, 3);
  auto input = random_tensor({1, disc.input_channels(), 8, 8}, 60, 0.0, 1.0);
  std::vector<NamedTensor> tensors{{"input", &input}};
  disc.parameters().for_each([&](Parameter<double>& p) { tensors.push_back({p.name, &p.value}); });
  const auto r = finite_diff_gradcheck(
      [&](Tape<double>& t) { return least_squares(disc(t.parameter(input)), 1.0); }, tensors);
  EXPECT_TRUE(r.passed(1e-3)) << r.max_rel_error << " skipped " << r.skipped_kinks;
}

TEST(Spp, ShapesConstantsAndOracle) {
  ParameterStore<double> store;
  Rng rng(1);
  SppBlock<double> spp(store, "spp", 3, {5, 9, 13}, rng);
  Tape<double> tape;
  auto x = random_tensor({1, 3, 8, 8}, 2);
  const auto cat = spp.pre_fuse(tape.constant(x));
  EXPECT_EQ(cat.shape(), (Shape{1, 12, 8, 8}));
  EXPECT_EQ(spp(tape.constant(x)).shape(), (Shape{1, 3, 8, 8}));
  const Tensor<double>& v = cat.value();
  for (std::size_t branch = 0; branch < 3; ++branch) {
    const long r = long(std::array<std::size_t, 3>{5, 9, 13}[branch] / 2);
    for (std::size_t c = 0; c < 3; ++c)
      for (long y = 0; y < 8; ++y)
        for (long xx = 0; xx < 8; ++xx) {
          const std::size_t out_c = 3 * (branch + 1) + c;
          ASSERT_EQ(v[out_c * 64 + std::size_t(y) * 8 + std::size_t(xx)], window_max(x, c, y, xx, r));
        }
  }
  for (std::size_t i = 0; i < 3 * 64; ++i) EXPECT_EQ(v[i], x[i]);

  const auto flat = spp.pre_fuse(tape.constant(Tensor<double>({1, 3, 8, 8}, 0.25)));
  for (double u : flat.value().values()) EXPECT_EQ(u, 0.25);
  EXPECT_THROW(SppBlock<double>(store, "bad", 3, {4}, rng), ConfigError);
}

TEST(Csp, ShapeConstructedWeightsAndErrors) {
  ParameterStore<double> store;
  Rng rng(2);
  CspBlock<double> csp(store, "csp", 6, {ActivationKind::relu}, rng);
  auto x = random_tensor({2, 6, 5, 5}, 3);
  Tape<double> tape;
  EXPECT_EQ(csp(tape.constant(x)).shape(), x.shape());

  for (auto* p : {&csp.a().weight(), &csp.a().bias(), &csp.b().weight(), &csp.b().bias(), &csp.fuse().bias()})
    for (auto& v : p->value.values()) v = 0.0;
  auto& fw = csp.fuse().weight().value;
  for (auto& v : fw.values()) v = 0.0;
  for (std::size_t i = 0; i < 6; ++i) fw.at(i, i, 0, 0) = 1.0;
  const Tensor<double>& y = csp(tape.constant(x)).value();
  const std::size_t plane = 25;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 6; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        const double want = c < 3 ? 0.0 : x[(n * 6 + c) * plane + i];
        ASSERT_EQ(y[(n * 6 + c) * plane + i], want);
      }
  EXPECT_THROW(CspBlock<double>(store, "odd", 5, {ActivationKind::relu}, rng), ConfigError);
}

TEST(Attention, GateBoundsAndHalfAtZeroWeights) {
  for (Attention kind : {Attention::sam, Attention::cam}) {
    ParameterStore<double> store;
    Rng rng(4);
    AttentionBlock<double> attn(store, "attn", 8, kind, rng);
    auto x = random_tensor({2, 8, 6, 6}, 5, -3.0, 3.0);
    Tape<double> tape;
    const Tensor<double>& y = attn(tape.constant(x)).value();
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(y[i]), std::abs(x[i]));

    store.for_each([](Parameter<double>& p) {
      for (auto& v : p.value.values()) v = 0.0;
    });
    const Tensor<double>& half = attn(tape.constant(x)).value();
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(half[i], x[i] / 2);
  }
}

TEST(GradcheckSuite, AllPresetsPass) {
  SuiteOptions opts;
  opts.all_presets = true;
  const auto entries = run_gradcheck_suite(opts);
  std::size_t generators = 0;
  for (const auto& e : entries) {
    EXPECT_TRUE(e.passed) << e.name << " max rel err " << e.max_rel_error << " skipped " << e.skipped_kinks;
    generators += e.name.rfind("generator/", 0) == 0;
  }
  EXPECT_EQ(generators, 12u);
}
