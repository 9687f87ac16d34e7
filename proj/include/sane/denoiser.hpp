#pragma once

// Boundary to instruction-conditioned editing denoisers, the autoencoder they
// work in, and the sampling scheduler. Ships a deterministic mock backend so
// whole edits run without model weights.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sane/digest.hpp"
#include "sane/errors.hpp"
#include "sane/image.hpp"
#include "sane/latent.hpp"
#include "sane/noise.hpp"

namespace sane {

// Conditioning for one denoiser call. Both members absent is the fully
// unconditional call; the backend decides what "absent" means internally.
struct ConditioningSlot {
  std::optional<Latent> image_latent;
  std::optional<std::string> instruction;

  static ConditioningSlot unconditional() { return {}; }
  static ConditioningSlot image_only(Latent img) { return {std::move(img), std::nullopt}; }
  static ConditioningSlot full(Latent img, std::string text) { return {std::move(img), std::move(text)}; }
};

// Decreasing timesteps over a discrete training schedule, with the cumulative
// alpha of each training timestep.
class TimestepSchedule {
 public:
  static constexpr int kTrainSteps = 1000;

  // Scaled-linear betas (0.00085 .. 0.012), evenly spaced inference steps.
  static TimestepSchedule scaled_linear(int total_steps) {
    if (total_steps < 1 || total_steps > kTrainSteps) {
      throw ValidationError("total_steps must be in [1, " + std::to_string(kTrainSteps) + "]");
    }
    std::vector<double> alpha_bar(kTrainSteps);
    const double b0 = std::sqrt(0.00085), b1 = std::sqrt(0.012);
    double prod = 1.0;
    for (int i = 0; i < kTrainSteps; ++i) {
      const double s = b0 + (b1 - b0) * i / (kTrainSteps - 1);
      prod *= 1.0 - s * s;
      alpha_bar[i] = prod;
    }
    const int ratio = kTrainSteps / total_steps;
    std::vector<int> ts;
    ts.reserve(total_steps);
    for (int k = total_steps - 1; k >= 0; --k) ts.push_back(k * ratio);
    return TimestepSchedule(std::move(ts), std::move(alpha_bar));
  }

  // Explicit table; alpha_bar is indexed by timestep value.
  TimestepSchedule(std::vector<int> timesteps, std::vector<double> alpha_bar)
      : timesteps_(std::move(timesteps)), alpha_bar_(std::move(alpha_bar)) {
    if (timesteps_.empty()) throw ValidationError("schedule needs at least one timestep");
    for (std::size_t i = 0; i < timesteps_.size(); ++i) {
      const int t = timesteps_[i];
      if (t < 0 || static_cast<std::size_t>(t) >= alpha_bar_.size()) {
        throw ValidationError("timestep " + std::to_string(t) + " has no alpha_bar entry");
      }
      if (i > 0 && t >= timesteps_[i - 1]) throw ValidationError("timesteps must be strictly decreasing");
    }
    for (double a : alpha_bar_) {
      if (!(a > 0.0 && a <= 1.0)) throw ValidationError("alpha_bar values must lie in (0, 1]");
    }
  }

  int total_steps() const noexcept { return static_cast<int>(timesteps_.size()); }
  const std::vector<int>& timesteps() const noexcept { return timesteps_; }

  std::optional<std::size_t> position(int t) const {
    auto it = std::find(timesteps_.begin(), timesteps_.end(), t);
    if (it == timesteps_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - timesteps_.begin());
  }
  bool is_final(int t) const { return position(t) == timesteps_.size() - 1; }

  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  // Cumulative alpha after the step taken at t; 1 after the last step.
  double alpha_bar_prev(int t) const {
    const auto pos = position(t);
    if (!pos) throw ValidationError("timestep " + std::to_string(t) + " is not in the schedule");
    if (*pos + 1 == timesteps_.size()) return 1.0;
    return alpha_bar(timesteps_[*pos + 1]);
  }

 private:
  std::vector<int> timesteps_;
  std::vector<double> alpha_bar_;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string id() const = 0;
  // Returns z_{t-1}. The final step of the schedule must not inject noise.
  virtual Latent step(const Latent& z_t, const Latent& eps, int t, const TimestepSchedule& schedule,
                      NoiseSource& noise) const = 0;
};

// DDIM update with stochasticity eta. eta = 0 is deterministic; eta = 1 adds
// ancestral (DDPM-variance) noise.
//   x0      = (z - sqrt(1 - a) * eps) / sqrt(a)
//   sigma   = eta * sqrt((1 - a') / (1 - a)) * sqrt(1 - a / a')
//   z_prev  = sqrt(a') * x0 + sqrt(1 - a' - sigma^2) * eps + sigma * n
// with a = alpha_bar(t), a' = alpha_bar_prev(t), n ~ N(0, I).
class DdimScheduler final : public Scheduler {
 public:
  explicit DdimScheduler(double eta = 1.0) : eta_(eta) {
    if (!(eta >= 0.0 && std::isfinite(eta))) throw ValidationError("eta must be finite and >= 0");
  }
  std::string id() const override { return "ddim"; }
  double eta() const noexcept { return eta_; }

  Latent step(const Latent& z_t, const Latent& eps, int t, const TimestepSchedule& schedule,
              NoiseSource& noise) const override {
    if (!schedule.position(t)) throw ValidationError("timestep " + std::to_string(t) + " is not in the schedule");
    if (z_t.shape() != eps.shape()) throw StructuralError("scheduler: latent and noise shapes differ");
    const double a = schedule.alpha_bar(t);
    const double a_prev = schedule.alpha_bar_prev(t);
    const bool last = schedule.is_final(t);
    double sigma = 0.0;
    if (!last && eta_ > 0.0) {
      sigma = eta_ * std::sqrt((1.0 - a_prev) / (1.0 - a)) * std::sqrt(1.0 - a / a_prev);
    }
    const double dir = std::sqrt(std::max(0.0, 1.0 - a_prev - sigma * sigma));
    const double sa = std::sqrt(a), s1a = std::sqrt(1.0 - a), sap = std::sqrt(a_prev);
    Latent out(z_t.shape());
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double x0 = (z_t[k] - s1a * eps[k]) / sa;
      double v = sap * x0 + dir * eps[k];
      if (sigma > 0.0) v += sigma * noise.normal();
      out[k] = static_cast<float>(v);
    }
    return out;
  }

 private:
  double eta_;
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::string id() const = 0;
  // Whether estimate_noise may be called from several threads at once.
  virtual bool reentrant() const { return false; }
  virtual Latent estimate_noise(const Latent& z_t, const ConditioningSlot& cond, int t) const = 0;

  // Several conditionings at one timestep. Backends with real batching
  // override this.
  virtual std::vector<Latent> estimate_noise_batch(const Latent& z_t, std::span<const ConditioningSlot> conds,
                                                   int t) const {
    std::vector<Latent> out;
    out.reserve(conds.size());
    for (const auto& c : conds) out.push_back(estimate_noise(z_t, c, t));
    return out;
  }
};

class Autoencoder {
 public:
  virtual ~Autoencoder() = default;
  virtual std::size_t downscale_factor() const = 0;
  virtual Latent encode(const Image& image) const = 0;
  virtual Image decode(const Latent& z0) const = 0;
};

// Unit-variance pseudo-noise seeded by a digest of (z_t, conditioning, t),
// plus an instruction-dependent bias on one spatial patch.
class MockDenoiser final : public Denoiser {
 public:
  explicit MockDenoiser(double bias = 0.75) : bias_(bias) {}

  std::string id() const override { return "mock"; }
  bool reentrant() const override { return true; }

  Latent estimate_noise(const Latent& z_t, const ConditioningSlot& cond, int t) const override {
    if (cond.image_latent && !cond.image_latent->shape().same_spatial(z_t.shape())) {
      throw ValidationError("mock denoiser: image latent " + cond.image_latent->shape().str() +
                            " does not match z_t " + z_t.shape().str());
    }
    calls_.fetch_add(1, std::memory_order_relaxed);

    StableHash64 h;
    const Shape& s = z_t.shape();
    h.word(s.channels).word(s.height).word(s.width);
    h.bytes(z_t.data(), z_t.size() * sizeof(float));
    if (cond.image_latent) {
      h.word(1).bytes(cond.image_latent->data(), cond.image_latent->size() * sizeof(float));
    } else {
      h.word(0);
    }
    const bool has_text = cond.instruction && !cond.instruction->empty();
    if (has_text) {
      h.word(1).text(*cond.instruction);
    } else {
      h.word(0);
    }
    h.word(static_cast<std::uint64_t>(t));

    NoiseSource rng(h.value());
    Latent out = rng.normal_latent<float>(s);
    if (has_text) add_patch_bias(out, *cond.instruction);
    return out;
  }

  // Total estimate_noise evaluations so far (across threads).
  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 private:
  void add_patch_bias(Latent& out, const std::string& text) const {
    const std::uint64_t th = StableHash64(0x51A7E).text(text).value();
    const Shape& s = out.shape();
    const std::size_t ph = std::max<std::size_t>(1, s.height / 4);
    const std::size_t pw = std::max<std::size_t>(1, s.width / 4);
    const std::size_t y0 = (th >> 8) % (s.height - ph + 1);
    const std::size_t x0 = (th >> 32) % (s.width - pw + 1);
    const float b = static_cast<float>((th & 1) ? bias_ : -bias_);
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t y = y0; y < y0 + ph; ++y)
        for (std::size_t x = x0; x < x0 + pw; ++x) out.at(c, y, x) += b;
  }

  double bias_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Forwards to another denoiser and counts evaluations.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(std::shared_ptr<const Denoiser> inner) : inner_(std::move(inner)) {
    if (!inner_) throw ValidationError("CountingDenoiser needs a denoiser");
  }

  std::string id() const override { return inner_->id(); }
  bool reentrant() const override { return inner_->reentrant(); }

  Latent estimate_noise(const Latent& z_t, const ConditioningSlot& cond, int t) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->estimate_noise(z_t, cond, t);
  }
  std::vector<Latent> estimate_noise_batch(const Latent& z_t, std::span<const ConditioningSlot> conds,
                                           int t) const override {
    calls_.fetch_add(conds.size(), std::memory_order_relaxed);
    return inner_->estimate_noise_batch(z_t, conds, t);
  }

  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset() noexcept { calls_.store(0, std::memory_order_relaxed); }

 private:
  std::shared_ptr<const Denoiser> inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Lossless space-to-depth: each f x f pixel block becomes channels*f*f latent
// channels at one location, with values mapped to [-1, 1].
class MockAutoencoder final : public Autoencoder {
 public:
  explicit MockAutoencoder(std::size_t factor = 8, std::size_t image_channels = 3)
      : factor_(factor), image_channels_(image_channels) {
    if (factor_ == 0) throw ValidationError("downscale factor must be >= 1");
  }

  std::size_t downscale_factor() const override { return factor_; }

  Latent encode(const Image& image) const override {
    if (image.width == 0 || image.height == 0 || image.width % factor_ != 0 || image.height % factor_ != 0) {
      throw ValidationError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                            " is not divisible by downscale factor " + std::to_string(factor_));
    }
    if (image.channels != image_channels_) {
      throw ValidationError("mock autoencoder expects " + std::to_string(image_channels_) + "-channel images");
    }
    const Shape s{image_channels_ * factor_ * factor_, image.height / factor_, image.width / factor_};
    Latent z(s);
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        for (std::size_t c = 0; c < image_channels_; ++c) {
          const std::size_t lc = (c * factor_ + y % factor_) * factor_ + x % factor_;
          z.at(lc, y / factor_, x / factor_) = static_cast<float>(image.at(x, y, c)) / 127.5f - 1.0f;
        }
      }
    }
    return z;
  }

  Image decode(const Latent& z0) const override {
    const Shape& s = z0.shape();
    if (s.channels != image_channels_ * factor_ * factor_) {
      throw ValidationError("latent " + s.str() + " was not produced by this autoencoder");
    }
    Image img(s.width * factor_, s.height * factor_, image_channels_);
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        for (std::size_t c = 0; c < image_channels_; ++c) {
          const std::size_t lc = (c * factor_ + y % factor_) * factor_ + x % factor_;
          const float v = (z0.at(lc, y / factor_, x / factor_) + 1.0f) * 127.5f;
          const float clamped = std::isfinite(v) ? std::clamp(v, 0.0f, 255.0f) : 0.0f;
          img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(clamped));
        }
      }
    }
    return img;
  }

 private:
  std::size_t factor_;
  std::size_t image_channels_;
};

struct BackendConfig {
  std::string id = "mock";
  std::string model_ref;  // published weights id for real backends
  std::size_t downscale_factor = 8;
  double eta = 1.0;
};

struct Backend {
  BackendConfig config;
  std::shared_ptr<const Denoiser> denoiser;
  std::shared_ptr<const Autoencoder> autoencoder;
  std::shared_ptr<const Scheduler> scheduler;
};

// Only the mock backend is linked into this build. Other ids name published
// editing models that need an external runtime.
inline Backend make_backend(const BackendConfig& cfg) {
  if (cfg.id == "mock") {
    return Backend{cfg, std::make_shared<MockDenoiser>(), std::make_shared<MockAutoencoder>(cfg.downscale_factor),
                   std::make_shared<DdimScheduler>(cfg.eta)};
  }
  throw BackendError("backend '" + cfg.id + "' unavailable: no model runtime for '" +
                     (cfg.model_ref.empty() ? cfg.id : cfg.model_ref) + "' is linked into this build");
}

}  // namespace sane
