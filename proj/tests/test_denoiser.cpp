#include <gtest/gtest.h>

#include <random>

#include "sane/denoiser.hpp"

using sane::ConditioningSlot;
using sane::Latent;
using sane::Shape;

namespace {

Latent random_latent(Shape s, unsigned seed) {
  sane::NoiseSource n(seed);
  return n.normal_latent<float>(s);
}

sane::Image random_image(std::size_t w, std::size_t h, unsigned seed) {
  sane::Image img(w, h, 3);
  std::mt19937 rng(seed);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

}  // namespace

TEST(MockDenoiser, DeterministicForIdenticalInputs) {
  const sane::MockDenoiser d;
  const Latent z = random_latent({4, 8, 8}, 1), img = random_latent({4, 8, 8}, 2);
  const auto cond = ConditioningSlot::full(img, "make the cat look funny");
  EXPECT_EQ(d.estimate_noise(z, cond, 500), d.estimate_noise(z, cond, 500));
  EXPECT_EQ(d.calls(), 2u);
}

TEST(MockDenoiser, SensitiveToConditioning) {
  const sane::MockDenoiser d;
  const Latent z = random_latent({4, 8, 8}, 3), img = random_latent({4, 8, 8}, 4);
  const Latent a = d.estimate_noise(z, ConditioningSlot::full(img, "add a hat to the cat"), 10);
  const Latent b = d.estimate_noise(z, ConditioningSlot::full(img, "add a scarf to the cat"), 10);
  const Latent none = d.estimate_noise(z, ConditioningSlot::image_only(img), 10);
  const Latent uncond = d.estimate_noise(z, ConditioningSlot::unconditional(), 10);
  EXPECT_NE(a, b);
  EXPECT_NE(a, none);
  EXPECT_NE(none, uncond);
  EXPECT_NE(d.estimate_noise(z, ConditioningSlot::image_only(img), 11), none);
  EXPECT_EQ(a.shape(), z.shape());
}

TEST(MockDenoiser, RoughlyUnitVariance) {
  const sane::MockDenoiser d;
  const Latent z = random_latent({4, 32, 32}, 5);
  const Latent e = d.estimate_noise(z, ConditioningSlot::unconditional(), 0);
  double sum = 0, sq = 0;
  for (float v : e.values()) {
    sum += v;
    sq += double(v) * v;
  }
  const double mean = sum / e.size();
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_NEAR(sq / e.size() - mean * mean, 1.0, 0.1);
}

TEST(MockDenoiser, RejectsMismatchedImageLatent) {
  const sane::MockDenoiser d;
  const Latent z = random_latent({4, 8, 8}, 6);
  EXPECT_THROW(d.estimate_noise(z, ConditioningSlot::image_only(random_latent({4, 4, 8}, 7)), 0),
               sane::ValidationError);
}

TEST(MockDenoiser, BatchMatchesSequential) {
  const sane::MockDenoiser d;
  const Latent z = random_latent({2, 4, 4}, 8), img = random_latent({2, 4, 4}, 9);
  const std::vector<ConditioningSlot> conds{ConditioningSlot::unconditional(), ConditioningSlot::image_only(img),
                                            ConditioningSlot::full(img, "x")};
  const auto batch = d.estimate_noise_batch(z, conds, 3);
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(batch[i], d.estimate_noise(z, conds[i], 3));
}

TEST(TimestepSchedule, ScaledLinearIsStrictlyDecreasing) {
  const auto s = sane::TimestepSchedule::scaled_linear(30);
  ASSERT_EQ(s.total_steps(), 30);
  for (std::size_t i = 1; i < s.timesteps().size(); ++i) EXPECT_LT(s.timesteps()[i], s.timesteps()[i - 1]);
  EXPECT_EQ(s.timesteps().back(), 0);
  EXPECT_TRUE(s.is_final(0));
  EXPECT_EQ(s.alpha_bar_prev(0), 1.0);
  // First training step: alpha_bar = 1 - 0.00085.
  EXPECT_NEAR(s.alpha_bar(0), 1.0 - 0.00085, 1e-15);
  EXPECT_THROW(sane::TimestepSchedule::scaled_linear(0), sane::ValidationError);
  EXPECT_THROW(sane::TimestepSchedule({3, 3}, {0.9, 0.8, 0.7, 0.6}), sane::ValidationError);
}

TEST(DdimScheduler, DeterministicVariantRescalesLatentWhenNoiseIsZero) {
  // alpha_bar(1) = 0.25, alpha_bar(0) = 0.81.
  const sane::TimestepSchedule schedule({1, 0}, {0.81, 0.25});
  const sane::DdimScheduler ddim(0.0);
  sane::NoiseSource rng(0);
  const Latent zero(Shape{1, 1, 1}, 0.0f);
  // sqrt(0.81 / 0.25) * 2 = 3.6
  EXPECT_FLOAT_EQ(ddim.step(Latent::scalar(2.0f), zero, 1, schedule, rng)[0], 3.6f);
  // last step: alpha_prev = 1, sqrt(1 / 0.81) * 0.9 = 1
  EXPECT_FLOAT_EQ(ddim.step(Latent::scalar(0.9f), zero, 0, schedule, rng)[0], 1.0f);
}

TEST(DdimScheduler, HandEvaluatedUpdateWithNoise) {
  // a = 0.25, a' = 0.81, eps = 1, z = 2, eta = 0:
  // x0 = (2 - sqrt(0.75)) / 0.5; z' = 0.9 * x0 + sqrt(0.19) * 1
  const sane::TimestepSchedule schedule({1, 0}, {0.81, 0.25});
  const sane::DdimScheduler ddim(0.0);
  sane::NoiseSource rng(0);
  const double want = 0.9 * (2.0 - std::sqrt(0.75)) / 0.5 + std::sqrt(0.19);
  EXPECT_NEAR(ddim.step(Latent::scalar(2.0f), Latent::scalar(1.0f), 1, schedule, rng)[0], want, 1e-6);
}

TEST(DdimScheduler, SeededAndTerminalStepIsNoiseFree) {
  const auto schedule = sane::TimestepSchedule::scaled_linear(10);
  const sane::DdimScheduler ddim(1.0);
  const Latent z = random_latent({2, 4, 4}, 10), eps = random_latent({2, 4, 4}, 11);
  const int t0 = schedule.timesteps()[0];
  sane::NoiseSource a(1), b(1), c(2);
  const Latent za = ddim.step(z, eps, t0, schedule, a);
  EXPECT_EQ(za, ddim.step(z, eps, t0, schedule, b));
  EXPECT_NE(za, ddim.step(z, eps, t0, schedule, c));

  sane::NoiseSource d(3), e(4);
  EXPECT_EQ(ddim.step(z, eps, 0, schedule, d), ddim.step(z, eps, 0, schedule, e));
}

TEST(DdimScheduler, RejectsUnknownTimestep) {
  const auto schedule = sane::TimestepSchedule::scaled_linear(10);
  const sane::DdimScheduler ddim;
  sane::NoiseSource rng(0);
  const Latent z(Shape{1, 1, 1});
  EXPECT_THROW(ddim.step(z, z, 5, schedule, rng), sane::ValidationError);
}

TEST(MockAutoencoder, RoundTripIsExact) {
  for (std::size_t f : {1u, 4u, 8u}) {
    const sane::MockAutoencoder ae(f);
    const auto img = random_image(16, 24, static_cast<unsigned>(f));
    EXPECT_EQ(ae.decode(ae.encode(img)), img);
  }
}

TEST(MockAutoencoder, LatentDimsFollowDownscaleFactor) {
  const sane::MockAutoencoder ae(8);
  const Latent z = ae.encode(random_image(64, 48, 1));
  EXPECT_EQ(z.height(), 6u);
  EXPECT_EQ(z.width(), 8u);
  EXPECT_EQ(z.channels(), 3u * 8 * 8);
  const Latent big = ae.encode(sane::Image(512, 512, 3, 128));
  EXPECT_EQ(big.height(), 64u);
  EXPECT_EQ(big.width(), 64u);
}

TEST(MockAutoencoder, RejectsIndivisibleDims) {
  const sane::MockAutoencoder ae(8);
  EXPECT_THROW(ae.encode(sane::Image(20, 16, 3)), sane::ValidationError);
  EXPECT_THROW(ae.encode(sane::Image(16, 16, 1)), sane::ValidationError);
}

TEST(Backend, OnlyMockIsAvailable) {
  const auto b = sane::make_backend({});
  EXPECT_EQ(b.denoiser->id(), "mock");
  EXPECT_TRUE(b.denoiser->reentrant());
  EXPECT_THROW(sane::make_backend({"instructpix2pix", "timbrooks/instruct-pix2pix", 8, 1.0}), sane::BackendError);
}

TEST(NoiseSource, ReproducibleStream) {
  sane::NoiseSource a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}
