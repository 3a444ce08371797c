#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "dehaze/checkpoint.hpp"
#include "dehaze/train.hpp"
#include "test_util.hpp"

using namespace dehaze;

namespace {

NetworkConfig small(const std::string& preset) {
  NetworkConfig c = preset_config(preset);
  c.base_width = 4;
  return c;
}

const Dataset& tiny_data() {
  static const Dataset ds = make_dataset(8, 2, 16, 77);
  return ds;
}

TrainPlan tiny_plan(const std::string& preset, std::size_t iterations) {
  TrainPlan p;
  p.config = small(preset);
  p.iterations = iterations;
  p.batch = 2;
  p.seed = 5;
  p.lr_g = p.lr_d = 1e-3;
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  testutil::TempDir dir("ckpt");
  Model m(small("EDN-GTM"), 3);
  save_checkpoint(m, dir.file("a.ckpt"));
  Model fresh(small("EDN-GTM"), 99);
  EXPECT_NE(checkpoint_bytes(fresh), slurp(dir.file("a.ckpt")));
  load_checkpoint(fresh, dir.file("a.ckpt"));
  save_checkpoint(fresh, dir.file("b.ckpt"));
  EXPECT_EQ(slurp(dir.file("a.ckpt")), slurp(dir.file("b.ckpt")));

  const Model built = load_checkpoint(dir.file("a.ckpt"));
  EXPECT_EQ(built.config(), small("EDN-GTM"));
  EXPECT_EQ(checkpoint_bytes(built), slurp(dir.file("a.ckpt")));
}

TEST(Checkpoint, HeaderLayout) {
  Model m(small("G-U-Net"), 0);
  const std::string bytes = checkpoint_bytes(m);
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("DHZCKPT\0", 8));
  std::uint32_t version, text_len;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&text_len, bytes.data() + 12, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(bytes.substr(16, text_len), config_to_text(m.config()));
  std::size_t payload = 0, tensors = 0;
  m.for_each_parameter([&](const Parameter<float>& p) {
    payload += 4 + p.name.size() + 16 + 4 * p.value.size();
    ++tensors;
  });
  EXPECT_EQ(bytes.size(), 16 + text_len + 4 + payload);
  EXPECT_GT(tensors, m.generator.parameters().size());
}

TEST(Checkpoint, ConfigMismatch) {
  testutil::TempDir dir("ckpt");
  save_checkpoint(Model(small("EDN-GTM")), dir.file("m.ckpt"));
  Model other(small("SPP G-U-Net 4-C (Swish)"));
  try {
    load_checkpoint(other, dir.file("m.ckpt"));
    FAIL() << "expected a config mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "E_CONFIG_MISMATCH");
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  NetworkConfig wider = small("EDN-GTM");
  wider.base_width = 8;
  Model w(wider);
  EXPECT_THROW(load_checkpoint(w, dir.file("m.ckpt")), FormatError);
}

TEST(Checkpoint, CorruptFilesRejected) {
  testutil::TempDir dir("ckpt");
  const std::string good = checkpoint_bytes(Model(small("G-U-Net 4-C")));
  auto code_of = [&](const std::string& bytes) -> std::string {
    spit(dir.file("x.ckpt"), bytes);
    try {
      (void)load_checkpoint(dir.file("x.ckpt"));
    } catch (const Error& e) {
      return e.code();
    }
    return "none";
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_EQ(code_of(bad), "E_CKPT_MAGIC");
  bad = good;
  bad[8] = 7;
  EXPECT_EQ(code_of(bad), "E_CKPT_VERSION");
  EXPECT_EQ(code_of(good.substr(0, good.size() - 3)), "E_CKPT_TRUNCATED");
  EXPECT_EQ(code_of(good + "z"), "E_CKPT_TRAILING");
  EXPECT_EQ(code_of(""), "E_CKPT_TRUNCATED");
  EXPECT_EQ(code_of(good), "none");
  EXPECT_THROW((void)load_checkpoint(dir.file("missing.ckpt")), IoError);
}

TEST(Checkpoint, SegmentationHasNoDiscriminatorTensors) {
  Model seg(small("S-U-Net"));
  EXPECT_FALSE(seg.discriminator.has_value());
  const std::string bytes = checkpoint_bytes(seg);
  EXPECT_EQ(bytes.find("disc."), std::string::npos);
  Model gen(small("G-U-Net"));
  EXPECT_NE(checkpoint_bytes(gen).find("disc."), std::string::npos);
}

TEST(Train, IterationContract) {
  auto plan = tiny_plan("G-U-Net", 0);
  EXPECT_THROW(train(plan, tiny_data()), ParameterError);
  plan.iterations = 1;
  const TrainReport r = train(plan, tiny_data());
  EXPECT_EQ(r.rec.size(), 1u);
  EXPECT_EQ(r.adv_g.size(), 1u);
  EXPECT_EQ(r.loss_d.size(), 1u);
  ASSERT_EQ(r.evals.size(), 1u);
  EXPECT_EQ(r.eval_iterations[0], 1u);
  plan.batch = 0;
  EXPECT_THROW(train(plan, tiny_data()), ParameterError);
}

TEST(Train, DeterministicTracesAndCheckpoints) {
  testutil::TempDir dir("train");
  auto plan = tiny_plan("EDN-GTM", 4);
  plan.aug.hflip_prob = 0.5;
  plan.aug.mosaic_prob = 0.5;
  plan.aug.cutout = CutoutSpec{};
  plan.eval_every = 2;
  plan.checkpoint = dir.file("a.ckpt");
  const TrainReport a = train(plan, tiny_data());
  plan.checkpoint = dir.file("b.ckpt");
  const TrainReport b = train(plan, tiny_data());
  EXPECT_EQ(a.rec, b.rec);
  EXPECT_EQ(a.adv_g, b.adv_g);
  EXPECT_EQ(a.loss_d, b.loss_d);
  EXPECT_EQ(slurp(dir.file("a.ckpt")), slurp(dir.file("b.ckpt")));
  EXPECT_EQ(a.eval_iterations, (std::vector<std::size_t>{2, 4}));
  for (std::size_t i = 0; i < a.rec.size(); ++i) {
    EXPECT_TRUE(std::isfinite(a.rec[i]) && std::isfinite(a.adv_g[i]) && std::isfinite(a.loss_d[i]));
    EXPECT_GT(a.loss_d[i], 0.0);
  }
  plan.seed = 6;
  EXPECT_NE(train(plan, tiny_data()).rec, a.rec);
}

TEST(Train, SegmentationHasNoAdversarialTerms) {
  auto plan = tiny_plan("S-U-Net", 3);
  Model out(small("S-U-Net"));
  const TrainReport r = train(plan, tiny_data(), &out);
  EXPECT_EQ(r.adv_g, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(r.loss_d, (std::vector<double>{0, 0, 0}));
  EXPECT_FALSE(out.discriminator.has_value());
  plan.weights = {1.0, 0.0};
  EXPECT_THROW(train(plan, tiny_data()), ParameterError);
}

TEST(Train, NanAbortKeepsLastGoodWeights) {
  testutil::TempDir dir("nan");
  auto plan = tiny_plan("EDN-GTM", 6);
  plan.poison_iteration = 2;
  plan.checkpoint = dir.file("abort.ckpt");
  try {
    train(plan, tiny_data());
    FAIL() << "expected a numerical abort";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 2"), std::string::npos) << e.what();
  }
  // The retained weights are those after two clean iterations.
  auto clean = tiny_plan("EDN-GTM", 2);
  clean.checkpoint = dir.file("two.ckpt");
  train(clean, tiny_data());
  EXPECT_EQ(slurp(dir.file("abort.ckpt")), slurp(dir.file("two.ckpt")));
}

TEST(Train, ShapeDriftRejectedBeforeFirstStep) {
  const Dataset odd = make_dataset(2, 0, 20, 1);
  EXPECT_THROW(train(tiny_plan("G-U-Net", 1), odd), ConfigError);
  auto plan = tiny_plan("G-U-Net", 1);
  plan.aug.crop = 32;
  EXPECT_THROW(train(plan, tiny_data()), ConfigError);
  plan.aug.crop = 8;
  const TrainReport r = train(plan, tiny_data());
  EXPECT_EQ(r.rec.size(), 1u);
  Dataset drift = tiny_data();
  drift.train[3].hazy = ImageRGB(24, 24);
  EXPECT_THROW(train(tiny_plan("G-U-Net", 1), drift), ConfigError);
  Dataset empty = tiny_data();
  empty.train.clear();
  EXPECT_THROW(train(tiny_plan("G-U-Net", 1), empty), ParameterError);
}

TEST(Evaluate, UntrainedAndCleanPathway) {
  const Model m(small("EDN-GTM"), 1);
  const MetricsRecord r = evaluate(m.generator, tiny_data().val, "EDN-GTM", "tiny");
  ASSERT_EQ(r.psnr.size(), tiny_data().val.size());
  for (double v : r.psnr) EXPECT_TRUE(std::isfinite(v));
  for (double v : r.ssim) EXPECT_TRUE(std::isfinite(v));

  std::vector<HazePair> clean = tiny_data().val;
  for (auto& p : clean) p.hazy = p.clean;
  const MetricsRecord c = evaluate(m.generator, clean, "EDN-GTM", "tiny");
  EXPECT_EQ(c.baseline_mean_psnr, 100.0);
  EXPECT_EQ(c.baseline_mean_ssim, 1.0);
  EXPECT_THROW(evaluate(m.generator, std::vector<HazePair>{}, "x", "y"), ParameterError);
}

TEST(Evaluate, FromCheckpointMatchesInMemory) {
  testutil::TempDir dir("eval");
  auto plan = tiny_plan("SPP G-U-Net 4-C (Swish)", 2);
  plan.checkpoint = dir.file("m.ckpt");
  const TrainReport r = train(plan, tiny_data());
  const MetricsRecord from_disk = evaluate(dir.file("m.ckpt"), tiny_data().val, "synthetic");
  EXPECT_EQ(from_disk.psnr, r.evals.back().psnr);
  EXPECT_EQ(from_disk.ssim, r.evals.back().ssim);
  EXPECT_EQ(from_disk.config, "SPP G-U-Net 4-C (Swish)");
}

TEST(Evaluate, GuidanceChannelIsLive) {
  auto plan = tiny_plan("EDN-GTM", 5);
  Model m(plan.config);
  train(plan, tiny_data(), &m);
  double diff = 0.0;
  for (const auto& p : tiny_data().val) {
    const ImageRGB a = predict(m.generator, p), b = predict(m.generator, p, true);
    for (std::size_t i = 0; i < a.data().size(); ++i) diff += std::abs(a.data()[i] - b.data()[i]);
  }
  EXPECT_GT(diff, 0.0);
}

TEST(Ablation, UnknownNamesAreReported) {
  try {
    run_ablation({"EDN-GTM", "Bogus", "Also Bogus"}, tiny_plan("EDN-GTM", 1), tiny_data());
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'Bogus'"), std::string::npos);
    EXPECT_NE(msg.find("'Also Bogus'"), std::string::npos);
    EXPECT_EQ(msg.find("'EDN-GTM'"), std::string::npos);
  }
}

TEST(Ablation, DefaultListAndRerunIdentical) {
  const auto names = table_preset_names();
  const auto plan = tiny_plan("EDN-GTM", 1);
  const AblationTable a = run_ablation(names, plan, tiny_data());
  ASSERT_EQ(a.rows.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.rows[i].name, names[i]);
  const AblationTable b = run_ablation(names, plan, tiny_data());
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Reports, StableKeyOrder) {
  auto plan = tiny_plan("G-U-Net", 1);
  const auto j = to_json(train(plan, tiny_data()));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "iterations", "checkpoint", "rec", "adv_g", "loss_d", "evals"}));
  EXPECT_EQ(j["evals"][0]["metrics"]["config"], "G-U-Net");
  EXPECT_EQ(j.dump().find("wall"), std::string::npos);
}
