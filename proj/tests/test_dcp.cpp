#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "dehaze/dcp.hpp"
#include "dehaze/rng.hpp"
#include "dehaze/synth.hpp"
#include "image_oracles.hpp"

using namespace dehaze;
using namespace oracle;

TEST(DarkChannel, ConstantAndBlack) {
  ImageRGB img(6, 5);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    img.data()[3 * i] = 0.5;
    img.data()[3 * i + 1] = 0.7;
    img.data()[3 * i + 2] = 0.9;
  }
  for (double v : dark_channel(img, 3).data()) EXPECT_EQ(v, 0.5);
  for (double v : dark_channel(ImageRGB(4, 4), 15).data()) EXPECT_EQ(v, 0.0);
}

TEST(DarkChannel, MatchesBruteForceOracle) {
  Rng rng(1);
  const ImageRGB img = random_image(9, 9, rng);
  for (std::size_t patch : {1u, 3u, 5u, 15u}) {
    EXPECT_EQ(dark_channel(img, patch).data(), dark_channel_oracle(img, patch).data()) << patch;
  }
}

TEST(DarkChannel, PatchOneIsChannelMin) {
  Rng rng(2);
  const ImageRGB img = random_image(7, 11, rng);
  const GrayMap d = dark_channel(img, 1);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 11; ++x) EXPECT_EQ(d(y, x), std::min({img(y, x, 0), img(y, x, 1), img(y, x, 2)}));
}

TEST(DarkChannel, Monotone) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ImageRGB img = random_image(12, 10, rng);
    const GrayMap before = dark_channel(img, 5);
    const auto y = static_cast<std::size_t>(rng.uniform_int(0, 11));
    const auto x = static_cast<std::size_t>(rng.uniform_int(0, 9));
    for (std::size_t c = 0; c < 3; ++c) img(y, x, c) = std::min(1.0, img(y, x, c) + rng.uniform(0, 0.5));
    const GrayMap after = dark_channel(img, 5);
    for (std::size_t i = 0; i < before.pixels(); ++i) EXPECT_GE(after.data()[i], before.data()[i]);
  }
}

TEST(DarkChannel, EvenPatchRejected) { EXPECT_THROW(dark_channel(ImageRGB(4, 4), 4), ParameterError); }

TEST(AtmosphericLight, UniformImage) {
  ImageRGB img(8, 8);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    img.data()[3 * i] = 0.8;
    img.data()[3 * i + 1] = 0.6;
    img.data()[3 * i + 2] = 0.01;  // below the floor
  }
  const auto a = atmospheric_light(img, dark_channel(img, 3), 0.001);
  EXPECT_EQ(a[0], 0.8);
  EXPECT_EQ(a[1], 0.6);
  EXPECT_EQ(a[2], kMinAtmosphericLight);
}

TEST(AtmosphericLight, WhiteRegionMatchesCandidateScan) {
  ImageRGB img(20, 20);
  for (std::size_t y = 10; y < 13; ++y)
    for (std::size_t x = 4; x < 7; ++x)
      for (std::size_t c = 0; c < 3; ++c) img(y, x, c) = 1.0;
  const GrayMap dark = dark_channel(img, 3);
  const auto a = atmospheric_light(img, dark, 0.001);
  const auto expected = atmospheric_light_oracle(img, dark_channel_oracle(img, 3), 0.001);
  EXPECT_EQ(a, expected);
  EXPECT_EQ(a, (AtmosphericLight{{1.0, 1.0, 1.0}}));
}

TEST(AtmosphericLight, RandomImagesMatchCandidateScan) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ImageRGB img = random_image(15, 13, rng);
    for (double f : {0.001, 0.05, 0.3}) {
      EXPECT_EQ(atmospheric_light(img, dark_channel(img, 3), f),
                atmospheric_light_oracle(img, dark_channel_oracle(img, 3), f));
    }
  }
}

TEST(AtmosphericLight, SingleCandidate) {
  Rng rng(5);
  const ImageRGB img = random_image(5, 5, rng);
  const GrayMap dark = dark_channel(img, 1);
  const auto it = std::max_element(dark.data().begin(), dark.data().end());
  const auto p = static_cast<std::size_t>(it - dark.data().begin());
  const auto a = atmospheric_light(img, dark, 1e-9);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a[c], std::max(img.data()[3 * p + c], kMinAtmosphericLight));
}

TEST(Transmission, ImageEqualToAirlightAndBlack) {
  const AtmosphericLight a{{0.9, 0.8, 0.85}};
  ImageRGB img(6, 6);
  for (std::size_t i = 0; i < img.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) img.data()[3 * i + c] = a[c];
  DcpParams p;
  p.patch = 3;
  for (double v : estimate_transmission(img, a, p).data()) EXPECT_NEAR(v, 0.05, 1e-12);
  for (double v : estimate_transmission(ImageRGB(6, 6), a, p).data()) EXPECT_EQ(v, 1.0);
}

TEST(Transmission, CompositionOracleAndRange) {
  Rng rng(6);
  DcpParams p;
  p.patch = 5;
  for (int trial = 0; trial < 10; ++trial) {
    const AtmosphericLight a{{rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0)}};
    ImageRGB img = random_image(11, 9, rng);
    // Keep img <= A so the range property applies.
    for (std::size_t i = 0; i < img.pixels(); ++i)
      for (std::size_t c = 0; c < 3; ++c) img.data()[3 * i + c] *= a[c];
    const auto t = estimate_transmission(img, a, p);
    const auto expected = transmission_oracle(img, a, p.omega, p.patch);
    for (std::size_t i = 0; i < t.pixels(); ++i) {
      EXPECT_NEAR(t.data()[i], expected.data()[i], 1e-12);
      EXPECT_GE(t.data()[i], 1.0 - p.omega - 1e-12);
      EXPECT_LE(t.data()[i], 1.0);
    }
  }
}

TEST(GuidedFilter, ConstantSourcePreserved) {
  Rng rng(7);
  const GrayMap guide = random_gray(16, 12, rng);
  const GrayMap src(16, 12, 0.37);
  for (double v : guided_filter(guide, src, 3, 1e-3).data()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(GuidedFilter, ConstantGuideIsDoubleBoxFilter) {
  Rng rng(8);
  const GrayMap guide(14, 10, 0.5);
  const GrayMap src = random_gray(14, 10, rng);
  const GrayMap q = guided_filter(guide, src, 2, 1e-3);
  const GrayMap expected = box_oracle(box_oracle(src, 2), 2);
  for (std::size_t i = 0; i < q.pixels(); ++i) EXPECT_NEAR(q.data()[i], expected.data()[i], 1e-12);
}

TEST(GuidedFilter, SelfGuidedTinyEpsReproducesSource) {
  Rng rng(9);
  const GrayMap src = random_gray(20, 20, rng);
  const GrayMap q = guided_filter(src, src, 3, 1e-8);
  double dev = 0;
  for (std::size_t i = 0; i < q.pixels(); ++i) dev = std::max(dev, std::abs(q.data()[i] - src.data()[i]));
  EXPECT_LT(dev, 1e-3);
}

TEST(GuidedFilter, MatchesBruteForceFormula) {
  Rng rng(10);
  for (std::size_t r : {1u, 3u, 8u}) {
    const GrayMap guide = random_gray(24, 19, rng);
    const GrayMap src = random_gray(24, 19, rng);
    const GrayMap q = guided_filter(guide, src, r, 1e-3);
    const GrayMap expected = guided_filter_oracle(guide, src, r, 1e-3);
    for (std::size_t i = 0; i < q.pixels(); ++i) EXPECT_NEAR(q.data()[i], expected.data()[i], 1e-5);
  }
}

TEST(GuidedFilter, LinearInSource) {
  Rng rng(11);
  const GrayMap guide = random_gray(16, 16, rng);
  const GrayMap s1 = random_gray(16, 16, rng), s2 = random_gray(16, 16, rng);
  const double alpha = 0.7, beta = -1.3;
  GrayMap mix(16, 16);
  for (std::size_t i = 0; i < mix.pixels(); ++i) mix.data()[i] = alpha * s1.data()[i] + beta * s2.data()[i];
  const auto q = guided_filter(guide, mix, 4, 1e-3);
  const auto q1 = guided_filter(guide, s1, 4, 1e-3), q2 = guided_filter(guide, s2, 4, 1e-3);
  for (std::size_t i = 0; i < q.pixels(); ++i)
    EXPECT_NEAR(q.data()[i], alpha * q1.data()[i] + beta * q2.data()[i], 1e-5);
}

TEST(GuidedFilter, OversizedRadiusRejected) {
  EXPECT_THROW(guided_filter(GrayMap(8, 8), GrayMap(8, 8), 9, 1e-3), ParameterError);
}

TEST(Recover, FullTransmissionAndAirlightImage) {
  Rng rng(12);
  const ImageRGB img = random_image(8, 8, rng);
  const AtmosphericLight a{{0.9, 0.85, 0.8}};
  EXPECT_EQ(recover_radiance(img, TransmissionMap(8, 8, 1.0), a, 0.1), img);

  ImageRGB veiled(8, 8);
  for (std::size_t i = 0; i < veiled.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) veiled.data()[3 * i + c] = a[c];
  const auto j = recover_radiance(veiled, random_gray(8, 8, rng), a, 0.1);
  for (std::size_t i = 0; i < j.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(j.data()[3 * i + c], a[c]);
}

TEST(Recover, InvertsSynthesisOnUnclampedDomain) {
  Rng rng(13);
  const double t_floor = 0.1;
  for (int trial = 0; trial < 20; ++trial) {
    const ImageRGB clean = random_image(10, 10, rng);
    TransmissionMap t(10, 10);
    for (auto& v : t.data()) v = rng.uniform(t_floor, 1.0);
    const AtmosphericLight a{{rng.uniform(0.7, 1), rng.uniform(0.7, 1), rng.uniform(0.7, 1)}};
    const auto back = recover_radiance(synthesize_haze(clean, t, a), t, a, t_floor);
    for (std::size_t i = 0; i < clean.data().size(); ++i) EXPECT_NEAR(back.data()[i], clean.data()[i], 1e-6);
  }
}

TEST(DcpDehaze, HazeFreeSceneHasHighTransmission) {
  Rng rng(14);
  const ImageRGB scene = procedural_scene(48, 48, rng);
  const auto r = dcp_dehaze(scene, DcpParams::toy());
  const double mean_t = std::accumulate(r.transmission.data().begin(), r.transmission.data().end(), 0.0) /
                        double(r.transmission.pixels());
  EXPECT_GT(mean_t, 0.8);
}

TEST(DcpDehaze, UniformHazeRecoversTransmission) {
  Rng rng(15);
  const ImageRGB scene = procedural_scene(48, 48, rng);
  const AtmosphericLight a{{0.97, 0.98, 0.99}};
  const auto hazy = synthesize_haze(scene, TransmissionMap(48, 48, 0.5), a);
  for (const DcpParams& p : {DcpParams::toy(), DcpParams{15, 0.95, 0.1, 0.001, 16, 1e-3}}) {
    const auto r = dcp_dehaze(hazy, p);
    double mae = 0;
    for (double v : r.transmission.data()) mae += std::abs(v - 0.5);
    mae /= double(r.transmission.pixels());
    EXPECT_LE(mae, 0.15) << "patch " << p.patch;
    for (double v : r.dehazed.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(DcpDehaze, MatchesOraclePipeline) {
  Rng rng(16);
  const ImageRGB scene = procedural_scene(32, 32, rng);
  const auto hazy = synthesize_haze(scene, random_transmission_field(32, 32, {}, 3), {{0.9, 0.9, 0.92}});
  DcpParams p = DcpParams::toy();
  const auto r = dcp_dehaze(hazy, p);
  const GrayMap dark = dark_channel_oracle(hazy, p.patch);
  const auto a = atmospheric_light_oracle(hazy, dark, p.bright_fraction);
  EXPECT_EQ(r.light, a);
  GrayMap t = guided_filter_oracle(luma_oracle(hazy), transmission_oracle(hazy, a, p.omega, p.patch),
                                   p.guided_radius, p.guided_eps);
  for (std::size_t i = 0; i < t.pixels(); ++i)
    EXPECT_NEAR(r.transmission.data()[i], std::clamp(t.data()[i], 0.0, 1.0), 1e-9);
}
