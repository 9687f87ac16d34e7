#pragma once

// Guidance algebra: how unconditional, image-conditioned, instruction-
// conditioned and specific-instruction noise estimates are folded into the
// single estimate the scheduler consumes. All functions are pure.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sane/errors.hpp"
#include "sane/latent.hpp"

namespace sane {

struct GuidanceWeights {
  double w_image = 1.5;     // input-image guidance
  double w_text = 7.0;      // ambiguous-instruction guidance
  double w_specific = 7.0;  // specific-instruction guidance

  void validate() const {
    if (!std::isfinite(w_image) || !std::isfinite(w_text) || !std::isfinite(w_specific)) {
      throw ValidationError("guidance weights must be finite");
    }
  }
  friend bool operator==(const GuidanceWeights&, const GuidanceWeights&) = default;
};

namespace detail {

template <typename T>
void require_same_shape(const BasicLatent<T>& a, const BasicLatent<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw StructuralError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename T>
void require_finite(const BasicLatent<T>& a, const char* what) {
  if (!a.all_finite()) throw ValidationError(std::string(what) + ": non-finite value in input");
}

template <typename T>
void require_consistent(const std::vector<BasicLatent<T>>& list, const BasicLatent<T>& ref, const char* what) {
  for (const auto& l : list) require_same_shape(l, ref, what);
}

}  // namespace detail

// uncond + w_image * (image - uncond) + w_text * (full - image)
template <typename T>
BasicLatent<T> cfg_combine(const BasicLatent<T>& eps_uncond, const BasicLatent<T>& eps_image,
                           const BasicLatent<T>& eps_full, const GuidanceWeights& weights) {
  detail::require_same_shape(eps_uncond, eps_image, "cfg_combine");
  detail::require_same_shape(eps_uncond, eps_full, "cfg_combine");
  detail::require_finite(eps_uncond, "cfg_combine");
  detail::require_finite(eps_image, "cfg_combine");
  detail::require_finite(eps_full, "cfg_combine");
  weights.validate();

  const T wi = static_cast<T>(weights.w_image);
  const T wt = static_cast<T>(weights.w_text);
  BasicLatent<T> out(eps_uncond.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const T u = eps_uncond[k];
    const T i = eps_image[k];
    const T f = eps_full[k];
    out[k] = u + wi * (i - u) + wt * (f - i);
  }
  return out;
}

// |eps_specific - eps_image|, elementwise.
template <typename T>
BasicLatent<T> specific_delta(const BasicLatent<T>& eps_specific, const BasicLatent<T>& eps_image) {
  detail::require_same_shape(eps_specific, eps_image, "specific_delta");
  BasicLatent<T> out(eps_specific.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(eps_specific[k] - eps_image[k]);
  return out;
}

// Mean of |delta| over channels at each location. Accumulates in double.
template <typename T>
SpatialMap<double> channel_salience(const BasicLatent<T>& delta) {
  if (delta.empty()) throw ValidationError("channel_salience: empty delta");
  const Shape& s = delta.shape();
  SpatialMap<double> out(s.height, s.width, 0.0);
  for (std::size_t c = 0; c < s.channels; ++c) {
    const T* plane = delta.data() + c * s.plane();
    for (std::size_t p = 0; p < s.plane(); ++p) out.values[p] += static_cast<double>(plane[p]);
  }
  const double inv = 1.0 / static_cast<double>(s.channels);
  for (double& v : out.values) v *= inv;
  return out;
}

// Per-location argmax over the candidates. Ties go to the lowest index.
inline SelectionMask build_selection_mask(const std::vector<SpatialMap<double>>& saliences) {
  if (saliences.empty()) throw ValidationError("build_selection_mask: no saliences given");
  const std::size_t h = saliences.front().height;
  const std::size_t w = saliences.front().width;
  for (const auto& s : saliences) {
    if (s.height != h || s.width != w) throw StructuralError("build_selection_mask: salience shapes differ");
  }
  std::vector<std::uint32_t> idx(h * w, 0);
  for (std::size_t p = 0; p < h * w; ++p) {
    double best = saliences[0].values[p];
    std::uint32_t arg = 0;
    for (std::size_t i = 1; i < saliences.size(); ++i) {
      if (saliences[i].values[p] > best) {
        best = saliences[i].values[p];
        arg = static_cast<std::uint32_t>(i);
      }
    }
    idx[p] = arg;
  }
  return SelectionMask(h, w, saliences.size(), std::move(idx));
}

// At each location, copy every channel from the noise the mask selects.
template <typename T>
BasicLatent<T> aggregate_by_mask(const std::vector<BasicLatent<T>>& noises, const SelectionMask& mask) {
  if (noises.empty()) throw ValidationError("aggregate_by_mask: no noises given");
  detail::require_consistent(noises, noises.front(), "aggregate_by_mask");
  const Shape& s = noises.front().shape();
  if (mask.height != s.height || mask.width != s.width || mask.indices.size() != s.plane()) {
    throw StructuralError("aggregate_by_mask: mask is " + std::to_string(mask.height) + "x" +
                          std::to_string(mask.width) + " but noises are " + s.str());
  }
  for (auto i : mask.indices) {
    if (i >= noises.size()) {
      throw ValidationError("aggregate_by_mask: mask index " + std::to_string(i) + " >= " +
                            std::to_string(noises.size()));
    }
  }
  BasicLatent<T> out(s);
  for (std::size_t c = 0; c < s.channels; ++c) {
    const std::size_t base = c * s.plane();
    for (std::size_t p = 0; p < s.plane(); ++p) out[base + p] = noises[mask.indices[p]][base + p];
  }
  return out;
}

// w_specific * (eps_bar - eps_image)
template <typename T>
BasicLatent<T> specific_guidance_term(const BasicLatent<T>& eps_bar, const BasicLatent<T>& eps_image,
                                      double w_specific) {
  detail::require_same_shape(eps_bar, eps_image, "specific_guidance_term");
  const T ws = static_cast<T>(w_specific);
  BasicLatent<T> out(eps_bar.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ws * (eps_bar[k] - eps_image[k]);
  return out;
}

template <typename T>
struct SaneResult {
  BasicLatent<T> eps;
  SelectionMask mask;
};

// Standard three-term guidance plus the masked specific-instruction term.
// The mask is returned for diagnostics.
template <typename T>
SaneResult<T> sane_combine(const BasicLatent<T>& eps_uncond, const BasicLatent<T>& eps_image,
                           const BasicLatent<T>& eps_full, const std::vector<BasicLatent<T>>& eps_specifics,
                           const GuidanceWeights& weights) {
  if (eps_specifics.empty()) {
    throw ValidationError("sane_combine: no specific-instruction noises (use the baseline strategy for N=0)");
  }
  detail::require_consistent(eps_specifics, eps_image, "sane_combine");
  for (const auto& e : eps_specifics) detail::require_finite(e, "sane_combine");

  BasicLatent<T> out = cfg_combine(eps_uncond, eps_image, eps_full, weights);

  std::vector<SpatialMap<double>> saliences;
  saliences.reserve(eps_specifics.size());
  for (const auto& e : eps_specifics) saliences.push_back(channel_salience(specific_delta(e, eps_image)));
  SelectionMask mask = build_selection_mask(saliences);

  if (weights.w_specific != 0.0) {
    const BasicLatent<T> term =
        specific_guidance_term(aggregate_by_mask(eps_specifics, mask), eps_image, weights.w_specific);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += term[k];
  }
  return {std::move(out), std::move(mask)};
}

// Elementwise arithmetic mean.
template <typename T>
BasicLatent<T> average_aggregate(const std::vector<BasicLatent<T>>& noises) {
  if (noises.empty()) throw ValidationError("average_aggregate: no noises given");
  detail::require_consistent(noises, noises.front(), "average_aggregate");
  if (noises.size() == 1) return noises.front();
  BasicLatent<T> out(noises.front().shape());
  const T n = static_cast<T>(noises.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    T sum = T{};
    for (const auto& e : noises) sum += e[k];
    out[k] = sum / n;
  }
  return out;
}

// Composable-diffusion style: every specific delta is added, unmasked, with a
// shared weight.
template <typename T>
BasicLatent<T> composable_combine(const BasicLatent<T>& eps_uncond, const BasicLatent<T>& eps_image,
                                  const BasicLatent<T>& eps_full, const std::vector<BasicLatent<T>>& eps_specifics,
                                  const GuidanceWeights& weights) {
  if (eps_specifics.empty()) throw ValidationError("composable_combine: no specific-instruction noises");
  detail::require_consistent(eps_specifics, eps_image, "composable_combine");
  for (const auto& e : eps_specifics) detail::require_finite(e, "composable_combine");

  BasicLatent<T> out = cfg_combine(eps_uncond, eps_image, eps_full, weights);
  if (weights.w_specific == 0.0) return out;
  for (const auto& e : eps_specifics) {
    const BasicLatent<T> term = specific_guidance_term(e, eps_image, weights.w_specific);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += term[k];
  }
  return out;
}

}  // namespace sane
