#pragma once

// Full edit: encode, denoise over the schedule while combining the noise
// estimates the strategy asks for, decode, and record a replayable manifest.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sane/denoiser.hpp"
#include "sane/errors.hpp"
#include "sane/guidance.hpp"
#include "sane/image.hpp"
#include "sane/latent.hpp"
#include "sane/noise.hpp"
#include "sane/specifier.hpp"

namespace sane {

inline constexpr int kManifestVersion = 1;

enum class EditStrategy { Baseline, Sane, SaneNoC, SaneAvg, PromptConcat, Composable };

inline const char* to_string(EditStrategy s) {
  switch (s) {
    case EditStrategy::Baseline: return "baseline";
    case EditStrategy::Sane: return "sane";
    case EditStrategy::SaneNoC: return "sane_no_c";
    case EditStrategy::SaneAvg: return "sane_avg";
    case EditStrategy::PromptConcat: return "prompt_concat";
    case EditStrategy::Composable: return "composable";
  }
  return "unknown";
}

inline EditStrategy parse_strategy(std::string_view name) {
  const std::string n = text::lower(name);
  for (auto s : {EditStrategy::Baseline, EditStrategy::Sane, EditStrategy::SaneNoC, EditStrategy::SaneAvg,
                 EditStrategy::PromptConcat, EditStrategy::Composable}) {
    if (n == to_string(s)) return s;
  }
  throw ValidationError("unknown strategy '" + std::string(name) + "'");
}

// Strategies that condition separately on each specific instruction.
inline bool uses_specific_noises(EditStrategy s) {
  return s == EditStrategy::Sane || s == EditStrategy::SaneNoC || s == EditStrategy::SaneAvg ||
         s == EditStrategy::Composable;
}

inline bool requires_specifics(EditStrategy s) {
  return uses_specific_noises(s) || s == EditStrategy::PromptConcat;
}

// Denoiser evaluations for a whole edit.
inline long long estimate_cost(EditStrategy strategy, int n_specific, int steps) {
  if (n_specific < 0 || steps < 0) throw ValidationError("estimate_cost: negative argument");
  const long long per_step = uses_specific_noises(strategy) ? 3LL + n_specific : 3LL;
  return per_step * steps;
}

struct EditConfig {
  GuidanceWeights weights{};
  int steps = 30;
  std::uint64_t seed = 0;
  std::size_t width = 512;  // 0 keeps the input size
  std::size_t height = 512;
  int n_specific = 3;
  int max_specific = kDefaultMaxSpecific;
  bool batched = false;     // one batched backend call per step
  bool dump_masks = false;  // full masks in the manifest, not just histograms

  void validate(std::size_t downscale) const {
    weights.validate();
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (n_specific < 0 || n_specific > max_specific) {
      throw ValidationError("n_specific must be in [0, " + std::to_string(max_specific) + "]");
    }
    if (downscale == 0 || width % downscale != 0 || height % downscale != 0) {
      throw ValidationError("image size " + std::to_string(width) + "x" + std::to_string(height) +
                            " is not divisible by downscale factor " + std::to_string(downscale));
    }
  }
};

// Guidance weights tuned per editing model (text and image weights shared).
inline GuidanceWeights default_weights_for(std::string_view model) {
  GuidanceWeights w{1.5, 7.0, 7.0};
  const std::string m = text::lower(model);
  if (m == "magicbrush" || m == "mb") w.w_specific = 5.0;
  if (m == "hqedit") w.w_specific = 9.0;
  return w;
}

struct NoiseEstimates {
  Latent uncond;
  Latent image;
  Latent full;
  std::vector<Latent> specifics;
};

struct StepCombination {
  Latent eps;
  std::optional<SelectionMask> mask;
};

// PROMPT_CONCAT instruction text: "c, s_1, ..., s_N".
inline std::string concat_instruction(std::string_view c, const SpecificInstructionSet& spec) {
  std::string out(c);
  for (const auto& s : spec.instructions) {
    out += ", ";
    out += s;
  }
  return out;
}

inline StepCombination per_step_combination(EditStrategy strategy, const NoiseEstimates& est,
                                            const GuidanceWeights& weights) {
  if (uses_specific_noises(strategy) && est.specifics.empty()) {
    throw std::logic_error(std::string("strategy ") + to_string(strategy) + " dispatched without specific noises");
  }
  switch (strategy) {
    case EditStrategy::Baseline:
    case EditStrategy::PromptConcat:
      return {cfg_combine(est.uncond, est.image, est.full, weights), std::nullopt};
    case EditStrategy::Sane: {
      auto r = sane_combine(est.uncond, est.image, est.full, est.specifics, weights);
      return {std::move(r.eps), std::move(r.mask)};
    }
    case EditStrategy::SaneNoC: {
      GuidanceWeights w = weights;
      w.w_text = 0.0;
      auto r = sane_combine(est.uncond, est.image, est.full, est.specifics, w);
      return {std::move(r.eps), std::move(r.mask)};
    }
    case EditStrategy::SaneAvg: {
      Latent out = cfg_combine(est.uncond, est.image, est.full, weights);
      if (weights.w_specific != 0.0) {
        const Latent term = specific_guidance_term(average_aggregate(est.specifics), est.image, weights.w_specific);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += term[k];
      }
      return {std::move(out), std::nullopt};
    }
    case EditStrategy::Composable:
      return {composable_combine(est.uncond, est.image, est.full, est.specifics, weights), std::nullopt};
  }
  throw std::logic_error("unhandled strategy");
}

struct StepRecord {
  int index = 0;
  int timestep = 0;
  int calls = 0;
  std::vector<std::size_t> mask_histogram;
  std::vector<std::uint32_t> mask;  // only with dump_masks
};

struct EditManifest {
  int manifest_version = kManifestVersion;
  std::string input_path;
  std::string input_digest;
  std::string instruction;
  SpecificInstructionSet specifics;
  EditStrategy strategy = EditStrategy::Baseline;
  EditConfig config;
  BackendConfig backend;
  std::string scheduler_id;
  std::string batching = "sequential";
  std::string conditioning_text;  // instruction text sent with the full call
  int calls_per_step = 0;
  long long total_calls = 0;
  std::vector<StepRecord> steps;
  std::string output_path;
  std::string output_digest;
  nlohmann::json metrics = nlohmann::json::object();
  double encode_ms = 0, denoise_ms = 0, decode_ms = 0, total_ms = 0;
};

struct EditOutcome {
  Image edited;
  EditManifest manifest;
};

inline EditOutcome run_edit(const Image& input, std::string_view instruction, const SpecificInstructionSet& spec_set,
                            const EditConfig& config, EditStrategy strategy, const Backend& backend) {
  using Clock = std::chrono::steady_clock;
  const auto ms_since = [](Clock::time_point a) {
    return std::chrono::duration<double, std::milli>(Clock::now() - a).count();
  };
  const auto t_start = Clock::now();

  if (!backend.denoiser || !backend.autoencoder || !backend.scheduler) throw BackendError("backend is incomplete");
  EditConfig cfg = config;
  if (cfg.width == 0 || cfg.height == 0) {
    cfg.width = input.width;
    cfg.height = input.height;
  }
  cfg.validate(backend.autoencoder->downscale_factor());
  if (text::trim(instruction).empty()) throw ValidationError("instruction is empty");

  SpecificInstructionSet spec;
  if (requires_specifics(strategy)) {
    if (cfg.n_specific < 1) throw ValidationError(std::string(to_string(strategy)) + " needs n_specific >= 1");
    spec = spec_set.prefix(static_cast<std::size_t>(cfg.n_specific));
  } else {
    spec = spec_set.size() >= static_cast<std::size_t>(cfg.n_specific) ? spec_set.prefix(cfg.n_specific) : spec_set;
  }

  EditManifest m;
  m.input_digest = input.digest();
  m.instruction = std::string(instruction);
  m.specifics = spec;
  m.strategy = strategy;
  m.config = cfg;
  m.backend = backend.config;
  m.scheduler_id = backend.scheduler->id();
  m.batching = cfg.batched ? "batched" : "sequential";
  m.conditioning_text = strategy == EditStrategy::PromptConcat ? concat_instruction(instruction, spec)
                                                               : std::string(instruction);

  const Image sized = resize_bilinear(input, cfg.width, cfg.height);
  auto t0 = Clock::now();
  const Latent image_latent = backend.autoencoder->encode(sized);
  m.encode_ms = ms_since(t0);

  std::vector<ConditioningSlot> conds;
  conds.push_back(ConditioningSlot::unconditional());
  conds.push_back(ConditioningSlot::image_only(image_latent));
  conds.push_back(ConditioningSlot::full(image_latent, m.conditioning_text));
  if (uses_specific_noises(strategy)) {
    for (const auto& s : spec.instructions) conds.push_back(ConditioningSlot::full(image_latent, s));
  }
  m.calls_per_step = static_cast<int>(conds.size());

  const TimestepSchedule schedule = TimestepSchedule::scaled_linear(cfg.steps);
  NoiseSource rng(cfg.seed);
  Latent z = rng.normal_latent<float>(image_latent.shape());

  t0 = Clock::now();
  const auto& timesteps = schedule.timesteps();
  for (std::size_t k = 0; k < timesteps.size(); ++k) {
    const int t = timesteps[k];
    try {
      std::vector<Latent> eps;
      if (cfg.batched) {
        eps = backend.denoiser->estimate_noise_batch(z, conds, t);
      } else {
        eps.reserve(conds.size());
        for (const auto& c : conds) eps.push_back(backend.denoiser->estimate_noise(z, c, t));
      }
      if (eps.size() != conds.size()) throw BackendError("backend returned the wrong number of estimates");
      m.total_calls += static_cast<long long>(eps.size());

      NoiseEstimates est{std::move(eps[0]), std::move(eps[1]), std::move(eps[2]), {}};
      for (std::size_t i = 3; i < eps.size(); ++i) est.specifics.push_back(std::move(eps[i]));
      StepCombination comb = per_step_combination(strategy, est, cfg.weights);

      StepRecord rec;
      rec.index = static_cast<int>(k);
      rec.timestep = t;
      rec.calls = m.calls_per_step;
      if (comb.mask) {
        rec.mask_histogram = comb.mask->histogram();
        if (cfg.dump_masks) rec.mask = comb.mask->indices;
      }
      m.steps.push_back(std::move(rec));

      z = backend.scheduler->step(z, comb.eps, t, schedule, rng);
    } catch (const StepError&) {
      throw;
    } catch (const std::exception& e) {
      throw StepError(static_cast<int>(k), e.what());
    }
  }
  m.denoise_ms = ms_since(t0);

  t0 = Clock::now();
  Image edited = backend.autoencoder->decode(z);
  m.decode_ms = ms_since(t0);
  m.output_digest = edited.digest();
  m.total_ms = ms_since(t_start);
  return {std::move(edited), std::move(m)};
}

// --- manifest serialization ---

inline nlohmann::json to_json(const EditManifest& m) {
  using nlohmann::json;
  json steps = json::array();
  for (const auto& s : m.steps) {
    json j = {{"index", s.index}, {"timestep", s.timestep}, {"calls", s.calls}};
    if (!s.mask_histogram.empty()) j["mask_histogram"] = s.mask_histogram;
    if (!s.mask.empty()) j["mask"] = s.mask;
    steps.push_back(std::move(j));
  }
  const auto& c = m.config;
  return json{
      {"manifest_version", m.manifest_version},
      {"input", {{"path", m.input_path}, {"digest", m.input_digest}}},
      {"instruction", m.instruction},
      {"specific_instructions",
       {{"instructions", m.specifics.instructions},
        {"source_model", m.specifics.source_model},
        {"prompt_digest", m.specifics.prompt_digest},
        {"caption", m.specifics.caption}}},
      {"strategy", to_string(m.strategy)},
      {"config",
       {{"weights",
         {{"image", c.weights.w_image}, {"text", c.weights.w_text}, {"specific", c.weights.w_specific}}},
        {"steps", c.steps},
        {"seed", c.seed},
        {"image_size", {c.width, c.height}},
        {"n_specific", c.n_specific},
        {"max_specific", c.max_specific},
        {"batched", c.batched},
        {"dump_masks", c.dump_masks}}},
      {"backend",
       {{"id", m.backend.id},
        {"model_ref", m.backend.model_ref},
        {"downscale_factor", m.backend.downscale_factor},
        {"eta", m.backend.eta},
        {"scheduler", m.scheduler_id}}},
      {"batching", m.batching},
      {"conditioning_text", m.conditioning_text},
      {"calls_per_step", m.calls_per_step},
      {"total_denoiser_calls", m.total_calls},
      {"steps", std::move(steps)},
      {"output", {{"path", m.output_path}, {"digest", m.output_digest}}},
      {"metrics", m.metrics},
      {"timings_ms",
       {{"encode", m.encode_ms}, {"denoise", m.denoise_ms}, {"decode", m.decode_ms}, {"total", m.total_ms}}},
  };
}

inline EditManifest manifest_from_json(const nlohmann::json& j) {
  try {
    EditManifest m;
    m.manifest_version = j.at("manifest_version").get<int>();
    if (m.manifest_version != kManifestVersion) {
      throw ValidationError("unsupported manifest_version " + std::to_string(m.manifest_version));
    }
    m.input_path = j.at("input").value("path", "");
    m.input_digest = j.at("input").at("digest").get<std::string>();
    m.instruction = j.at("instruction").get<std::string>();
    const auto& s = j.at("specific_instructions");
    m.specifics.instructions = s.at("instructions").get<std::vector<std::string>>();
    m.specifics.source_model = s.value("source_model", "");
    m.specifics.prompt_digest = s.value("prompt_digest", "");
    m.specifics.caption = s.value("caption", "");
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    const auto& c = j.at("config");
    const auto& w = c.at("weights");
    m.config.weights = {w.at("image").get<double>(), w.at("text").get<double>(), w.at("specific").get<double>()};
    m.config.steps = c.at("steps").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.width = c.at("image_size").at(0).get<std::size_t>();
    m.config.height = c.at("image_size").at(1).get<std::size_t>();
    m.config.n_specific = c.at("n_specific").get<int>();
    m.config.max_specific = c.value("max_specific", kDefaultMaxSpecific);
    m.config.batched = c.value("batched", false);
    m.config.dump_masks = c.value("dump_masks", false);
    const auto& b = j.at("backend");
    m.backend.id = b.at("id").get<std::string>();
    m.backend.model_ref = b.value("model_ref", "");
    m.backend.downscale_factor = b.value("downscale_factor", std::size_t{8});
    m.backend.eta = b.value("eta", 1.0);
    m.scheduler_id = b.value("scheduler", "");
    m.batching = j.value("batching", "sequential");
    m.conditioning_text = j.value("conditioning_text", "");
    m.calls_per_step = j.value("calls_per_step", 0);
    m.total_calls = j.value("total_denoiser_calls", 0LL);
    for (const auto& st : j.value("steps", nlohmann::json::array())) {
      StepRecord r;
      r.index = st.at("index").get<int>();
      r.timestep = st.at("timestep").get<int>();
      r.calls = st.at("calls").get<int>();
      if (st.contains("mask_histogram")) r.mask_histogram = st["mask_histogram"].get<std::vector<std::size_t>>();
      if (st.contains("mask")) r.mask = st["mask"].get<std::vector<std::uint32_t>>();
      m.steps.push_back(std::move(r));
    }
    m.output_path = j.at("output").value("path", "");
    m.output_digest = j.at("output").at("digest").get<std::string>();
    m.metrics = j.value("metrics", nlohmann::json::object());
    if (j.contains("timings_ms")) {
      const auto& t = j["timings_ms"];
      m.encode_ms = t.value("encode", 0.0);
      m.denoise_ms = t.value("denoise", 0.0);
      m.decode_ms = t.value("decode", 0.0);
      m.total_ms = t.value("total", 0.0);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

// Written to a sibling temp file, then renamed into place.
inline void write_manifest(const std::filesystem::path& path, const EditManifest& m) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ValidationError("cannot write manifest " + tmp.string());
    out << to_json(m).dump(2) << "\n";
    if (!out) throw ValidationError("failed writing manifest " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline EditManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("manifest " + path.string() + " is not valid JSON");
  return manifest_from_json(j);
}

struct ReplayReport {
  bool input_matches = false;
  bool output_matches = false;
  bool calls_match = false;
  EditOutcome outcome;

  bool ok() const noexcept { return input_matches && output_matches && calls_match; }
};

// Re-runs the recorded edit and compares digests and call counts.
inline ReplayReport replay(const EditManifest& m, const Image& input, const Backend& backend) {
  ReplayReport r;
  r.input_matches = input.digest() == m.input_digest;
  r.outcome = run_edit(input, m.instruction, m.specifics, m.config, m.strategy, backend);
  r.output_matches = r.outcome.manifest.output_digest == m.output_digest;
  r.calls_match = r.outcome.manifest.total_calls == m.total_calls &&
                  r.outcome.manifest.calls_per_step == m.calls_per_step;
  return r;
}

}  // namespace sane
