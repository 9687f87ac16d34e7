#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sane/evaluation.hpp"

namespace {

sane::EmbeddingVector vec(std::vector<double> v, sane::Modality m = sane::Modality::Image) {
  return {std::move(v), m, "test"};
}

// Distance is read from the first pixel of the sample, in hundredths.
class CannedDistance final : public sane::DistanceProvider {
 public:
  std::string id() const override { return "canned"; }
  double distance(const sane::Image&, const sane::Image& b) const override { return b.pixels[0] / 100.0; }
};

class ScriptedJudge final : public sane::LlmProvider {
 public:
  ScriptedJudge(std::vector<std::string> replies, bool images = true) : replies_(std::move(replies)), images_(images) {}
  std::string model_id() const override { return "judge"; }
  bool supports_images() const override { return images_; }
  std::string complete(const sane::LlmRequest& req) override {
    last_images = req.images;
    return replies_[std::min(calls++, replies_.size() - 1)];
  }
  std::size_t calls = 0;
  std::vector<std::filesystem::path> last_images;

 private:
  std::vector<std::string> replies_;
  bool images_;
};

}  // namespace

TEST(Cosine, HandCases) {
  EXPECT_DOUBLE_EQ(sane::cosine(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(sane::cosine(vec({1, 2}), vec({2, 4})), 1.0);
  EXPECT_DOUBLE_EQ(sane::cosine(vec({1, 0}), vec({-3, 0})), -1.0);
  EXPECT_NEAR(sane::cosine(vec({1, 0}), vec({1, 1})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(sane::cosine(vec({0, 0}), vec({1, 1})), sane::ValidationError);
  EXPECT_THROW(sane::cosine(vec({1}), vec({1, 1})), sane::ValidationError);
  EXPECT_THROW(sane::cosine(vec({NAN, 1}), vec({1, 1})), sane::ValidationError);
}

TEST(ClipI, SelfSimilarityIsExactlyOne) {
  sane::FixtureEmbeddingProvider p;
  std::mt19937 rng(1);
  for (int i = 0; i < 50; ++i) {
    sane::Image img(8, 8, 3);
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng());
    const auto e = p.embed_image(img);
    EXPECT_EQ(sane::clip_i(e, e), 1.0);
    EXPECT_EQ(sane::clip_i(e, p.embed_image(img)), 1.0);
  }
  std::vector<double> odd(7);
  for (auto& v : odd) v = std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
  EXPECT_EQ(sane::cosine(vec(odd), vec(odd)), 1.0);
}

TEST(ClipDelta, ParallelAndOrthogonal) {
  const auto x = vec({0, 0, 1});
  EXPECT_DOUBLE_EQ(sane::clip_delta(x, vec({2, 0, 1}), vec({1, 1, 1}), vec({4, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(sane::clip_delta(x, vec({2, 0, 1}), vec({1, 1, 1}), vec({1, 4, 1})), 0.0);
  EXPECT_DOUBLE_EQ(sane::clip_delta(x, vec({2, 0, 1}), vec({1, 1, 1}), vec({-1, 1, 1})), -1.0);
}

TEST(ClipDelta, TwoDimensionalCase) {
  const auto x = vec({1, 0}), y = vec({1, 1});
  const auto ti = vec({1, 0}, sane::Modality::Text), tf = vec({2, 1}, sane::Modality::Text);
  EXPECT_NEAR(sane::clip_delta(x, y, ti, tf), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(ClipDelta, UndefinedWhenNothingMoved) {
  const auto x = vec({1, 0});
  EXPECT_THROW(sane::clip_delta(x, x, vec({1, 0}), vec({0, 1})), sane::UndefinedMetricError);
  EXPECT_THROW(sane::clip_delta(x, vec({0, 1}), vec({1, 2}), vec({1, 2})), sane::UndefinedMetricError);
}

TEST(ClipDelta, InvariantToScalingEitherDifference) {
  std::mt19937 rng(2);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(16), dx(16), t(16), dt(16);
    for (int i = 0; i < 16; ++i) x[i] = n(rng), dx[i] = n(rng), t[i] = n(rng), dt[i] = n(rng);
    const double k = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    auto shifted = [](const std::vector<double>& base, const std::vector<double>& d, double s) {
      std::vector<double> out(base);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * d[i];
      return out;
    };
    const double ref = sane::clip_delta(vec(x), vec(shifted(x, dx, 1)), vec(t), vec(shifted(t, dt, 1)));
    const double scaled = sane::clip_delta(vec(x), vec(shifted(x, dx, k)), vec(t), vec(shifted(t, dt, 1 / k)));
    EXPECT_NEAR(ref, scaled, 1e-9);
  }
}

TEST(Metrics, StayInRangeOnRandomEmbeddings) {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng() % 32;
    auto r = [&] {
      std::vector<double> v(d);
      for (auto& e : v) e = n(rng);
      return vec(v);
    };
    const auto x = r(), y = r(), ti = r(), tf = r();
    for (double m : {sane::clip_i(x, y), sane::clip_d(y, tf), sane::clip_delta(x, y, ti, tf)}) {
      EXPECT_GE(m, -1.0);
      EXPECT_LE(m, 1.0);
    }
  }
}

TEST(EvaluateSample, AggregatesAndReportsMissingDelta) {
  sane::FixtureEmbeddingProvider p(64);
  sane::Image a(8, 8, 3, 10), b(8, 8, 3, 200);
  const sane::CaptionPair caps{"a cat", "a funny cat"};
  auto s1 = sane::evaluate_sample("moved", a, b, caps, p);
  auto s2 = sane::evaluate_sample("unchanged", a, a, caps, p);
  ASSERT_TRUE(s1.clip_delta.has_value());
  EXPECT_FALSE(s2.clip_delta.has_value());
  EXPECT_EQ(*s2.clip_i, 1.0);
  const auto report = sane::aggregate({s1, s2});
  EXPECT_EQ(report.clip_delta_missing, 1u);
  EXPECT_DOUBLE_EQ(*report.mean_clip_delta, *s1.clip_delta);
  EXPECT_DOUBLE_EQ(*report.mean_clip_i, (*s1.clip_i + 1.0) / 2);
  const auto j = sane::to_json(report);
  EXPECT_EQ(j["aggregate"]["count"], 2);
  EXPECT_TRUE(j["samples"][1]["clip_delta"].is_null());
  EXPECT_FALSE(sane::aggregate({}).mean_clip_d.has_value());
}

TEST(Diversity, MeanOfDistances) {
  sane::Image ref(1, 1, 3, 0), s1(1, 1, 3, 20), s2(1, 1, 3, 40);
  EXPECT_NEAR(sane::diversity({s1, s2}, ref, CannedDistance{}), 0.3, 1e-15);
  EXPECT_THROW(sane::diversity({}, ref, CannedDistance{}), sane::ValidationError);
}

TEST(Diversity, PixelDistance) {
  sane::MeanAbsolutePixelDistance d;
  sane::Image black(2, 1, 3, 0), white(2, 1, 3, 255), half(2, 1, 3, 0);
  for (std::size_t c = 0; c < 3; ++c) half.at(1, 0, c) = 255;
  EXPECT_DOUBLE_EQ(d.distance(black, white), 1.0);
  EXPECT_DOUBLE_EQ(d.distance(black, half), 0.5);
  EXPECT_DOUBLE_EQ(d.distance(white, white), 0.0);
  EXPECT_DOUBLE_EQ(sane::diversity({white, half}, black, d), 0.75);
  EXPECT_THROW(d.distance(black, sane::Image(1, 1, 3)), sane::ValidationError);
}

TEST(MeanPixelDifference, HandCase) {
  sane::Image x(2, 1, 3, 100);
  sane::Image s1 = x, s2 = x;
  s1.at(0, 0, 0) = 130;  // channel mean 10
  s2.at(0, 0, 1) = 70;   // channel mean 10
  s2.at(1, 0, 2) = 160;  // channel mean 20
  const auto m = sane::mean_pixel_difference(x, {s1, s2});
  EXPECT_DOUBLE_EQ(m.at(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 10.0);
  const auto heat = sane::heatmap_image(m);
  EXPECT_EQ(heat.channels, 1u);
  EXPECT_EQ(heat.pixels, (std::vector<std::uint8_t>{10, 10}));
  EXPECT_THROW(sane::mean_pixel_difference(x, {}), sane::ValidationError);
  EXPECT_THROW(sane::mean_pixel_difference(x, {sane::Image(1, 1, 3)}), sane::ValidationError);
}

TEST(Preference, ParsesBareLetters) {
  EXPECT_EQ(sane::parse_preference("A").value(), sane::Preference::A);
  EXPECT_EQ(sane::parse_preference("B\n").value(), sane::Preference::B);
  EXPECT_EQ(sane::parse_preference("  A ").value(), sane::Preference::A);
  for (const char* bad : {"Both", "", "a", "A or B", "AB", "Answer: A"}) {
    const auto r = sane::parse_preference(bad);
    ASSERT_FALSE(r.ok()) << bad;
    EXPECT_EQ(r.error().kind, sane::FailureKind::Evaluation);
  }
}

TEST(Preference, RetriesThenFails) {
  ScriptedJudge judge({"Both", "B"});
  EXPECT_EQ(sane::gpt_preference("x.png", "a.png", "b.png", "make it winter", judge), sane::Preference::B);
  EXPECT_EQ(judge.calls, 2u);
  EXPECT_EQ(judge.last_images, (std::vector<std::filesystem::path>{"x.png", "a.png", "b.png"}));

  ScriptedJudge stubborn({"Both"});
  EXPECT_THROW(sane::gpt_preference("x.png", "a.png", "b.png", "c", stubborn), sane::EvaluationError);
  EXPECT_EQ(stubborn.calls, 3u);

  ScriptedJudge blind({"A"}, false);
  EXPECT_THROW(sane::gpt_preference("x.png", "a.png", "b.png", "c", blind), sane::EvaluationError);
  EXPECT_EQ(blind.calls, 0u);
}

TEST(Preference, SwappedOrderRecord) {
  ScriptedJudge judge({"A", "B"});
  const auto rec = sane::gpt_preference_swapped("x.png", "ours.png", "theirs.png", "c", judge);
  EXPECT_TRUE(rec.consistent());
  EXPECT_DOUBLE_EQ(rec.first_method_score(), 1.0);
  EXPECT_EQ(judge.last_images[1], "theirs.png");

  const sane::PreferenceRecord position_bias{sane::Preference::A, sane::Preference::A};
  EXPECT_FALSE(position_bias.consistent());
  EXPECT_DOUBLE_EQ(position_bias.first_method_score(), 0.5);
  const sane::PreferenceRecord lost{sane::Preference::B, sane::Preference::A};
  EXPECT_DOUBLE_EQ(lost.first_method_score(), 0.0);
}

TEST(TableEmbeddings, LookupByContent) {
  sane::TableEmbeddingProvider p;
  const sane::Image x(2, 2, 3, 1), y(2, 2, 3, 2);
  p.add_image(x, {1, 0});
  p.add_image(y, {1, 1});
  p.add_text("a cat", {1, 0});
  p.add_text("a funny cat", {2, 1});
  const auto s = sane::evaluate_sample("t", x, y, {"a cat", "a funny cat"}, p);
  EXPECT_NEAR(*s.clip_delta, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(*s.clip_i, 1.0 / std::sqrt(2.0));
  EXPECT_THROW(p.embed_text("a dog"), sane::EvaluationError);
  EXPECT_THROW(p.embed_image(sane::Image(2, 2, 3, 9)), sane::EvaluationError);
}
