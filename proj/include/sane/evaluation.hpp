#pragma once

// Editing metrics over injected embedding providers, diversity statistics and
// pairwise preference judging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sane/digest.hpp"
#include "sane/errors.hpp"
#include "sane/image.hpp"
#include "sane/llm.hpp"
#include "sane/noise.hpp"
#include "sane/prompts.hpp"
#include "sane/specifier.hpp"

namespace sane {

enum class Modality { Image, Text };

struct EmbeddingVector {
  std::vector<double> values;
  Modality modality = Modality::Image;
  std::string provider;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual EmbeddingVector embed_image(const Image& image) const = 0;
  virtual EmbeddingVector embed_text(std::string_view text) const = 0;
};

// Deterministic stand-in for a joint image/text encoder: a unit Gaussian
// direction seeded by the content digest. Equal inputs embed identically.
class FixtureEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FixtureEmbeddingProvider(std::size_t dim = 512) : dim_(dim) {
    if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
  }
  std::string id() const override { return "fixture-" + std::to_string(dim_); }

  EmbeddingVector embed_image(const Image& image) const override {
    return {vector_for("image:" + image.digest()), Modality::Image, id()};
  }
  EmbeddingVector embed_text(std::string_view text) const override {
    return {vector_for("text:" + sha256_hex(text)), Modality::Text, id()};
  }

 private:
  std::vector<double> vector_for(const std::string& tag) const {
    NoiseSource rng(StableHash64().text(tag).value());
    std::vector<double> v(dim_);
    double norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

  std::size_t dim_;
};

// Embeddings looked up from a table: images by content digest, texts by
// exact string. Unknown inputs are an error.
class TableEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(std::string id = "table") : id_(std::move(id)) {}

  std::string id() const override { return id_; }

  void add_image(const Image& image, std::vector<double> v) { images_[image.digest()] = std::move(v); }
  void add_text(std::string text, std::vector<double> v) { texts_[std::move(text)] = std::move(v); }

  EmbeddingVector embed_image(const Image& image) const override {
    auto it = images_.find(image.digest());
    if (it == images_.end()) throw EvaluationError("no embedding for image " + image.digest().substr(0, 12));
    return {it->second, Modality::Image, id_};
  }
  EmbeddingVector embed_text(std::string_view text) const override {
    auto it = texts_.find(std::string(text));
    if (it == texts_.end()) throw EvaluationError("no embedding for text '" + std::string(text) + "'");
    return {it->second, Modality::Text, id_};
  }

 private:
  std::string id_;
  std::map<std::string, std::vector<double>> images_;
  std::map<std::string, std::vector<double>> texts_;
};

namespace detail {

inline double cosine_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimensions differ");
  if (a.empty()) throw ValidationError("cosine: empty vectors");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw ValidationError("cosine: non-finite component");
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ValidationError("cosine: zero vector");
  // sqrt(aa * bb) is exactly aa when a == b, so self-similarity is exactly 1.
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

}  // namespace detail

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return detail::cosine_values(a.values, b.values);
}

// Input preservation: image(x) vs image(x_edited).
inline double clip_i(const EmbeddingVector& x, const EmbeddingVector& x_edited) { return cosine(x, x_edited); }

// Edit strength: image(x_edited) vs text(final caption). A similarity, higher
// is better.
inline double clip_d(const EmbeddingVector& x_edited, const EmbeddingVector& final_caption) {
  return cosine(x_edited, final_caption);
}

// Directional adherence: image change vs caption change.
inline double clip_delta(const EmbeddingVector& x, const EmbeddingVector& x_edited,
                         const EmbeddingVector& initial_caption, const EmbeddingVector& final_caption) {
  const auto diff = [](const std::vector<double>& to, const std::vector<double>& from) {
    if (to.size() != from.size()) throw ValidationError("clip_delta: dimensions differ");
    std::vector<double> d(to.size());
    bool nonzero = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = to[i] - from[i];
      nonzero = nonzero || d[i] != 0.0;
    }
    return std::make_pair(std::move(d), nonzero);
  };
  auto [image_dir, image_moved] = diff(x_edited.values, x.values);
  auto [text_dir, text_moved] = diff(final_caption.values, initial_caption.values);
  if (!image_moved) throw UndefinedMetricError("clip_delta undefined: edited image embedding equals input");
  if (!text_moved) throw UndefinedMetricError("clip_delta undefined: final caption embedding equals initial");
  return detail::cosine_values(image_dir, text_dir);
}

struct SampleMetrics {
  std::string id;
  std::optional<double> clip_d;
  std::optional<double> clip_i;
  std::optional<double> clip_delta;  // missing when undefined
};

struct MetricReport {
  std::vector<SampleMetrics> samples;
  std::optional<double> mean_clip_d, mean_clip_i, mean_clip_delta;
  std::size_t clip_delta_missing = 0;
};

// Computes all three metrics for one edit.
inline SampleMetrics evaluate_sample(std::string id, const Image& x, const Image& x_edited, const CaptionPair& captions,
                                     const EmbeddingProvider& provider) {
  const auto ex = provider.embed_image(x);
  const auto ey = provider.embed_image(x_edited);
  const auto ti = provider.embed_text(captions.initial);
  const auto tf = provider.embed_text(captions.final);
  SampleMetrics s;
  s.id = std::move(id);
  s.clip_i = clip_i(ex, ey);
  s.clip_d = clip_d(ey, tf);
  try {
    s.clip_delta = clip_delta(ex, ey, ti, tf);
  } catch (const UndefinedMetricError&) {
    s.clip_delta.reset();
  }
  return s;
}

inline MetricReport aggregate(std::vector<SampleMetrics> samples) {
  MetricReport r;
  r.samples = std::move(samples);
  const auto mean_of = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : r.samples) {
      if (const auto& v = s.*member) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  r.mean_clip_d = mean_of(&SampleMetrics::clip_d);
  r.mean_clip_i = mean_of(&SampleMetrics::clip_i);
  r.mean_clip_delta = mean_of(&SampleMetrics::clip_delta);
  for (const auto& s : r.samples) r.clip_delta_missing += s.clip_delta ? 0 : 1;
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) {
    samples.push_back(
        {{"id", s.id}, {"clip_d", opt(s.clip_d)}, {"clip_i", opt(s.clip_i)}, {"clip_delta", opt(s.clip_delta)}});
  }
  return {{"samples", samples},
          {"aggregate",
           {{"clip_d", opt(r.mean_clip_d)},
            {"clip_i", opt(r.mean_clip_i)},
            {"clip_delta", opt(r.mean_clip_delta)},
            {"clip_delta_missing", r.clip_delta_missing},
            {"count", r.samples.size()}}}};
}

class DistanceProvider {
 public:
  virtual ~DistanceProvider() = default;
  virtual std::string id() const = 0;
  virtual double distance(const Image& a, const Image& b) const = 0;
};

// Mean absolute pixel difference scaled to [0, 1]. Perceptual distances plug
// in through the same interface.
class MeanAbsolutePixelDistance final : public DistanceProvider {
 public:
  std::string id() const override { return "mean_abs_pixel"; }
  double distance(const Image& a, const Image& b) const override {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
      throw ValidationError("distance: image dimensions differ");
    }
    if (a.pixels.empty()) throw ValidationError("distance: empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += std::abs(int(a.pixels[i]) - int(b.pixels[i]));
    return sum / (255.0 * static_cast<double>(a.pixels.size()));
  }
};

// Average distance from the reference to each sample.
inline double diversity(const std::vector<Image>& samples, const Image& reference, const DistanceProvider& provider) {
  if (samples.empty()) throw ValidationError("diversity: no samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += provider.distance(reference, s);
  return sum / static_cast<double>(samples.size());
}

// Per-pixel mean absolute difference (averaged over channels, then samples).
inline SpatialMap<double> mean_pixel_difference(const Image& x, const std::vector<Image>& samples) {
  if (samples.empty()) throw ValidationError("mean_pixel_difference: no samples");
  SpatialMap<double> map(x.height, x.width, 0.0);
  for (const auto& s : samples) {
    if (s.width != x.width || s.height != x.height || s.channels != x.channels) {
      throw ValidationError("mean_pixel_difference: sample dimensions differ from input");
    }
    for (std::size_t y = 0; y < x.height; ++y) {
      for (std::size_t px = 0; px < x.width; ++px) {
        double d = 0.0;
        for (std::size_t c = 0; c < x.channels; ++c) d += std::abs(int(x.at(px, y, c)) - int(s.at(px, y, c)));
        map.at(y, px) += d / static_cast<double>(x.channels);
      }
    }
  }
  for (double& v : map.values) v /= static_cast<double>(samples.size());
  return map;
}

// Grayscale image of a heatmap; values are clamped to [0, 255].
inline Image heatmap_image(const SpatialMap<double>& map) {
  Image img(map.width, map.height, 1);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.values[i], 0.0, 255.0)));
  }
  return img;
}

enum class Preference { A, B };

inline const char* to_string(Preference p) { return p == Preference::A ? "A" : "B"; }

// Accepts a bare "A" or "B" (surrounding whitespace ignored).
inline Result<Preference> parse_preference(std::string_view reply) {
  const std::string_view t = text::trim(reply);
  if (t == "A") return Preference::A;
  if (t == "B") return Preference::B;
  return Failure{FailureKind::Evaluation, "expected 'A' or 'B'", std::string(reply)};
}

inline Preference gpt_preference(const std::filesystem::path& x, const std::filesystem::path& x_a,
                                 const std::filesystem::path& x_b, std::string_view instruction,
                                 LlmProvider& provider, int max_retries = 2) {
  if (!provider.supports_images()) throw EvaluationError("preference judge must accept image attachments");
  LlmRequest req{prompts::pairwise_preference(instruction, "[image 1]", "[image 2]", "[image 3]"), {x, x_a, x_b}};
  std::string last;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    last = provider.complete(req);
    auto p = parse_preference(last);
    if (p) return p.value();
  }
  throw EvaluationError("preference reply '" + last + "' is not A or B after " + std::to_string(max_retries) +
                        " retries");
}

// Both presentation orders. `consistent` is true when the judge picked the
// same underlying image both times.
struct PreferenceRecord {
  Preference original_order;
  Preference swapped_order;
  bool consistent() const noexcept { return original_order != swapped_order; }
  // 1 when the first method won both times, 0.5 on disagreement, 0 otherwise.
  double first_method_score() const noexcept {
    return ((original_order == Preference::A) + (swapped_order == Preference::B)) / 2.0;
  }
};

inline PreferenceRecord gpt_preference_swapped(const std::filesystem::path& x, const std::filesystem::path& first,
                                               const std::filesystem::path& second, std::string_view instruction,
                                               LlmProvider& provider, int max_retries = 2) {
  return {gpt_preference(x, first, second, instruction, provider, max_retries),
          gpt_preference(x, second, first, instruction, provider, max_retries)};
}

}  // namespace sane
