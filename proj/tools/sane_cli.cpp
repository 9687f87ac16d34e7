// sane: decompose, edit, eval, bench, classify and replay from the command line.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sane/openai_provider.hpp"
#include "sane/sane.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Overrides shared by every subcommand. Unset ones leave the config alone.
struct Overrides {
  std::string config;
  std::optional<int> n;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> steps;
  std::optional<std::size_t> size;
  std::optional<double> w_image, w_text, w_specific;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--n", o.n, "number of specific instructions")->check(CLI::Range(1, 64));
  cmd->add_option("--strategy", o.strategy,
                  "baseline | sane | sane_no_c | sane_avg | prompt_concat | composable");
  cmd->add_option("--seed", o.seed, "sampler seed");
  cmd->add_option("--backend", o.backend, "editing backend id");
  cmd->add_option("--steps", o.steps, "denoising steps")->check(CLI::PositiveNumber);
  cmd->add_option("--size", o.size, "square working resolution (0 keeps input size)");
  cmd->add_option("--w-image", o.w_image, "image guidance weight");
  cmd->add_option("--w-text", o.w_text, "instruction guidance weight");
  cmd->add_option("--w-specific", o.w_specific, "specific-instruction guidance weight");
}

sane::RunConfig resolve_config(const Overrides& o) {
  sane::RunConfig rc = o.config.empty() ? sane::RunConfig{} : sane::load_config(o.config);
  if (o.n) rc.edit.n_specific = *o.n;
  if (o.strategy) rc.strategy = sane::parse_strategy(*o.strategy);
  if (o.seed) rc.edit.seed = *o.seed;
  if (o.backend) rc.backend.id = *o.backend;
  if (o.steps) rc.edit.steps = *o.steps;
  if (o.size) rc.edit.width = rc.edit.height = *o.size;
  if (o.w_image) rc.edit.weights.w_image = *o.w_image;
  if (o.w_text) rc.edit.weights.w_text = *o.w_text;
  if (o.w_specific) rc.edit.weights.w_specific = *o.w_specific;
  if (rc.edit.n_specific > rc.edit.max_specific) rc.edit.max_specific = rc.edit.n_specific;
  return rc;
}

std::shared_ptr<sane::CachedLlm> make_llm(const sane::LlmConfig& cfg) {
  std::shared_ptr<sane::LlmProvider> provider;
  if (cfg.provider == "fixture") {
    if (cfg.fixtures.empty()) throw sane::ValidationError("llm.fixtures must name a fixture file");
    provider = std::make_shared<sane::FixtureProvider>(sane::FixtureProvider::from_file(cfg.fixtures));
  } else if (cfg.provider == "openai") {
    provider = std::make_shared<sane::OpenAiProvider>(
        sane::OpenAiProvider::from_env(cfg.endpoint, cfg.model, cfg.api_key_env, cfg.temperature));
  } else {
    throw sane::ValidationError("unknown llm.provider '" + cfg.provider + "'");
  }
  auto cache = cfg.cache_dir.empty() ? std::make_shared<sane::PromptCache>()
                                     : std::make_shared<sane::PromptCache>(fs::path(cfg.cache_dir));
  return std::make_shared<sane::CachedLlm>(provider, cache);
}

sane::InstructionSpecifier make_specifier(const sane::RunConfig& rc) {
  sane::SpecifierOptions opts;
  opts.max_specific = rc.edit.max_specific;
  opts.max_retries = rc.llm.max_retries;
  return sane::InstructionSpecifier(make_llm(rc.llm), opts);
}

json llm_record(const sane::LlmConfig& cfg) {
  json j = {{"provider", cfg.provider}, {"model", cfg.model}};
  j["temperature"] = cfg.temperature ? json(*cfg.temperature) : json(nullptr);
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw sane::ValidationError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// Files are written into a sibling staging directory which is renamed onto
// the requested path on commit.
class StagedDir {
 public:
  StagedDir(fs::path target, bool force) : target_(fs::absolute(std::move(target)).lexically_normal()) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    if (fs::exists(target_)) {
      if (!fs::is_directory(target_)) throw sane::ValidationError(target_.string() + " exists and is not a directory");
      if (!fs::is_empty(target_) && !force) {
        throw sane::ValidationError("output directory " + target_.string() + " is not empty (use --force)");
      }
    }
    if (!target_.parent_path().empty()) fs::create_directories(target_.parent_path());
    staging_ = target_;
    staging_ += ".partial-" + std::to_string(::getpid());
    fs::remove_all(staging_);
    fs::create_directory(staging_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }

  const fs::path& staging() const { return staging_; }
  const fs::path& target() const { return target_; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

// --- decompose ---

struct DecomposeArgs {
  Overrides o;
  std::string image;
  std::string instruction;
  std::optional<std::string> caption;
  std::optional<std::string> out;
  bool force = false;
};

int cmd_decompose(const DecomposeArgs& a) {
  if (a.image.empty() && !a.caption) throw sane::ValidationError("decompose needs --image or --caption");
  sane::RunConfig rc = resolve_config(a.o);
  auto spec = make_specifier(rc);
  std::string caption;
  if (a.caption) {
    caption = *a.caption;
  } else {
    caption = spec.caption(a.instruction, a.image).initial;
  }
  const auto calls_before = spec.llm().provider_calls();
  const auto set = spec.specify(caption, a.instruction, rc.edit.n_specific);
  for (const auto& s : set.instructions) std::cout << s << "\n";

  if (a.out) {
    StagedDir dir(*a.out, a.force);
    json rec = {{"instruction", a.instruction},
                {"caption", set.caption},
                {"n", rc.edit.n_specific},
                {"max_specific", rc.edit.max_specific},
                {"instructions", set.instructions},
                {"source_model", set.source_model},
                {"prompt_digest", set.prompt_digest},
                {"llm", llm_record(rc.llm)},
                {"served_from_cache", spec.llm().provider_calls() == calls_before}};
    if (!a.image.empty()) {
      rec["image"] = {{"path", fs::absolute(a.image).string()}, {"digest", sane::read_image(a.image).digest()}};
    }
    write_json(dir.staging() / "decomposition.json", rec);
    dir.commit();
    std::cerr << "record: " << (dir.target() / "decomposition.json").string() << "\n";
  }
  return 0;
}

// --- edit ---

struct EditArgs {
  Overrides o;
  std::vector<std::string> images;
  std::string instruction;
  std::optional<std::string> caption;
  std::vector<std::string> specifics;
  std::string out;
  int workers = 1;
  bool force = false;
};

int cmd_edit(const EditArgs& a) {
  sane::RunConfig rc = resolve_config(a.o);
  const sane::Backend backend = sane::make_backend(rc.backend);
  const bool need_specifics = sane::requires_specifics(rc.strategy) && a.specifics.empty();
  std::optional<sane::InstructionSpecifier> spec;
  if (need_specifics) spec.emplace(make_specifier(rc));
  sane::SpecificInstructionSet given;
  given.instructions = a.specifics;
  given.source_model = "user";

  StagedDir dir(a.out, a.force);
  std::vector<fs::path> subdirs(a.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    if (a.images.size() > 1) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03zu_", i);
      subdirs[i] = idx + fs::path(a.images[i]).stem().string();
    }
  }

  std::vector<std::string> errors(a.images.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < a.images.size(); i = next++) {
      try {
        const fs::path input = fs::absolute(a.images[i]);
        const sane::Image img = sane::read_image(input);
        sane::SpecificInstructionSet set = given;
        if (need_specifics) {
          const std::string caption = a.caption ? *a.caption : spec->caption(a.instruction, input).initial;
          set = spec->specify(caption, a.instruction, rc.edit.n_specific);
        }
        auto outcome = sane::run_edit(img, a.instruction, set, rc.edit, rc.strategy, backend);
        const fs::path where = dir.staging() / subdirs[i];
        fs::create_directories(where);
        sane::write_image(where / "edited.png", outcome.edited);
        outcome.manifest.input_path = input.string();
        outcome.manifest.output_path = "edited.png";
        if (rc.llm.temperature) outcome.manifest.metrics["llm_temperature"] = *rc.llm.temperature;
        sane::write_manifest(where / "manifest.json", outcome.manifest);
      } catch (const std::exception& e) {
        errors[i] = a.images[i] + ": " + e.what();
      }
    }
  };
  const int n_workers = std::clamp<int>(a.workers, 1, static_cast<int>(a.images.size()));
  if (n_workers > 1 && !backend.denoiser->reentrant()) {
    throw sane::ValidationError("backend '" + backend.config.id + "' is not reentrant; use --workers 1");
  }
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool failed = false;
  for (const auto& e : errors) {
    if (!e.empty()) {
      std::cerr << "error: " << e << "\n";
      failed = true;
    }
  }
  if (failed) return 1;
  dir.commit();
  for (const auto& sub : subdirs) std::cout << (dir.target() / sub / "manifest.json").string() << "\n";
  return 0;
}

// --- replay ---

int cmd_replay(const std::string& manifest_path, const std::optional<std::string>& image) {
  const sane::EditManifest m = sane::read_manifest(manifest_path);
  const sane::Backend backend = sane::make_backend(m.backend);
  const sane::Image input = sane::read_image(image ? *image : m.input_path);
  const auto r = sane::replay(m, input, backend);
  std::cout << "input digest:  " << (r.input_matches ? "match" : "MISMATCH") << "\n"
            << "output digest: " << (r.output_matches ? "match" : "MISMATCH") << "\n"
            << "call counts:   " << (r.calls_match ? "match" : "MISMATCH") << " (" << r.outcome.manifest.total_calls
            << " calls)\n";
  return r.ok() ? 0 : 1;
}

// --- eval ---

struct EvalArgs {
  Overrides o;
  std::vector<std::string> manifests;
  std::vector<std::string> images;
  std::optional<std::string> dir;
  std::optional<std::string> instruction;
  std::optional<std::string> initial_caption, final_caption;
  std::optional<std::string> embeddings;
  std::size_t dim = 512;
  std::optional<std::string> out;
  bool force = false;
};

std::unique_ptr<sane::EmbeddingProvider> load_embeddings(const std::optional<std::string>& path, std::size_t dim) {
  if (!path) return std::make_unique<sane::FixtureEmbeddingProvider>(dim);
  std::ifstream in(*path);
  if (!in) throw sane::ValidationError("cannot open embeddings " + *path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw sane::ValidationError("embeddings file is not a JSON object");
  auto table = std::make_unique<sane::TableEmbeddingProvider>(j.value("id", "table"));
  const fs::path base = fs::path(*path).parent_path();
  try {
    const json images = j.value("images", json::object()), texts = j.value("texts", json::object());
    for (const auto& [file, v] : images.items()) {
      const fs::path p = fs::path(file).is_relative() ? base / file : fs::path(file);
      table->add_image(sane::read_image(p), v.get<std::vector<double>>());
    }
    for (const auto& [text, v] : texts.items()) {
      table->add_text(text, v.get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw sane::ValidationError(std::string("bad embeddings file: ") + e.what());
  }
  return table;
}

struct EvalItem {
  std::string id;
  fs::path input;
  fs::path edited;
  std::string instruction;
};

EvalItem item_from_manifest(const fs::path& path) {
  const auto m = sane::read_manifest(path);
  fs::path edited = m.output_path;
  if (edited.is_relative()) edited = path.parent_path() / edited;
  return {path.parent_path().filename().string(), m.input_path, edited, m.instruction};
}

int cmd_eval(const EvalArgs& a) {
  sane::RunConfig rc = resolve_config(a.o);
  std::vector<EvalItem> items;
  for (const auto& m : a.manifests) items.push_back(item_from_manifest(m));
  if (a.dir) {
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(*a.dir)) {
      if (e.is_regular_file() && e.path().filename() == "manifest.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    if (found.empty()) throw sane::ValidationError("no manifest.json under " + *a.dir);
    for (const auto& p : found) items.push_back(item_from_manifest(p));
  }
  if (!a.images.empty()) {
    if (a.images.size() != 2) throw sane::ValidationError("--image takes the input and the edited image");
    items.push_back({fs::path(a.images[1]).stem().string(), a.images[0], a.images[1], a.instruction.value_or("")});
  }
  if (items.empty()) throw sane::ValidationError("eval needs --manifest, --dir or two --image paths");

  const auto embedder = load_embeddings(a.embeddings, a.dim);
  std::optional<sane::InstructionSpecifier> spec;
  std::vector<sane::SampleMetrics> samples;
  json captions = json::array();
  for (const auto& it : items) {
    sane::CaptionPair pair;
    if (a.initial_caption && a.final_caption) {
      pair = {*a.initial_caption, *a.final_caption};
    } else {
      if (it.instruction.empty()) throw sane::ValidationError("captions need --instruction or a manifest");
      if (!spec) spec.emplace(make_specifier(rc));
      pair = spec->caption(it.instruction, it.input);
    }
    captions.push_back({{"id", it.id}, {"initial", pair.initial}, {"final", pair.final}});
    samples.push_back(
        sane::evaluate_sample(it.id, sane::read_image(it.input), sane::read_image(it.edited), pair, *embedder));
  }
  json report = sane::to_json(sane::aggregate(std::move(samples)));
  report["embedding_provider"] = embedder->id();
  report["captions"] = captions;
  std::cout << report.dump(2) << "\n";
  if (a.out) {
    StagedDir dir(*a.out, a.force);
    write_json(dir.staging() / "metrics.json", report);
    dir.commit();
  }
  return 0;
}

// --- bench ---

struct BenchArgs {
  Overrides o;
  int n_min = 0;
  int n_max = 5;
  int repeats = 3;
  std::optional<std::string> image;
  bool as_json = false;
};

int cmd_bench(const BenchArgs& a) {
  if (a.n_min < 0 || a.n_max < a.n_min) throw sane::ValidationError("need 0 <= --n-min <= --n-max");
  if (a.repeats < 1) throw sane::ValidationError("--repeats must be >= 1");
  sane::RunConfig rc = resolve_config(a.o);
  rc.edit.max_specific = std::max(rc.edit.max_specific, a.n_max);
  sane::Backend backend = sane::make_backend(rc.backend);
  auto counter = std::make_shared<sane::CountingDenoiser>(backend.denoiser);
  backend.denoiser = counter;

  sane::Image img;
  if (a.image) {
    img = sane::read_image(*a.image);
  } else {
    const std::size_t w = rc.edit.width ? rc.edit.width : 64, h = rc.edit.height ? rc.edit.height : 64;
    img = sane::Image(w, h, 3);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 4 + y * 2 + c * 60) & 0xFF);
  }
  sane::SpecificInstructionSet set;
  for (int i = 0; i < a.n_max; ++i) set.instructions.push_back("specific instruction " + std::to_string(i + 1));

  const sane::EditStrategy chosen = sane::uses_specific_noises(rc.strategy) ? rc.strategy : sane::EditStrategy::Sane;
  json rows = json::array();
  std::vector<double> medians;
  bool counts_ok = true;
  for (int n = a.n_min; n <= a.n_max; ++n) {
    const sane::EditStrategy strategy = n == 0 ? sane::EditStrategy::Baseline : chosen;
    sane::EditConfig cfg = rc.edit;
    cfg.n_specific = n;
    std::vector<double> times;
    std::uint64_t calls = 0;
    sane::EditManifest last;
    for (int r = 0; r < a.repeats; ++r) {
      counter->reset();
      const auto t0 = std::chrono::steady_clock::now();
      auto outcome = sane::run_edit(img, "benchmark instruction", set, cfg, strategy, backend);
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      calls = counter->calls();
      last = std::move(outcome.manifest);
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    medians.push_back(median);
    const long long expected = sane::estimate_cost(strategy, n, cfg.steps);
    counts_ok = counts_ok && static_cast<long long>(calls) == expected;
    rows.push_back({{"n", n},
                    {"strategy", sane::to_string(strategy)},
                    {"steps", cfg.steps},
                    {"calls_per_step", last.calls_per_step},
                    {"counted_calls", calls},
                    {"estimated_calls", expected},
                    {"wall_ms_median", median},
                    {"wall_ms_min", times.front()}});
  }
  const bool monotonic = std::is_sorted(medians.begin(), medians.end());
  const std::size_t w = rc.edit.width ? rc.edit.width : img.width, h = rc.edit.height ? rc.edit.height : img.height;
  if (a.as_json) {
    std::cout << json{{"backend", backend.config.id},
                      {"image_size", {w, h}},
                      {"repeats", a.repeats},
                      {"rows", rows},
                      {"counts_match_estimate", counts_ok},
                      {"wall_clock_monotonic", monotonic}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("# backend=%s image=%zux%zu steps=%d repeats=%d\n", backend.config.id.c_str(), w, h, rc.edit.steps,
                a.repeats);
    std::printf("n\tstrategy\tcalls_per_step\tcounted_calls\testimated_calls\twall_ms_median\n");
    for (const auto& r : rows) {
      std::printf("%d\t%s\t%d\t%llu\t%lld\t%.2f\n", r["n"].get<int>(), r["strategy"].get<std::string>().c_str(),
                  r["calls_per_step"].get<int>(), r["counted_calls"].get<unsigned long long>(),
                  r["estimated_calls"].get<long long>(), r["wall_ms_median"].get<double>());
    }
    std::printf("# counts_match_estimate=%s wall_clock_monotonic=%s\n", counts_ok ? "yes" : "no",
                monotonic ? "yes" : "no");
  }
  return counts_ok ? 0 : 1;
}

// --- classify ---

int cmd_classify(const Overrides& o, const std::string& instruction) {
  auto spec = make_specifier(resolve_config(o));
  std::cout << sane::to_string(spec.classify(instruction)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Editing with ambiguous instructions decomposed into specific ones"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "print the specific instructions for an ambiguous one");
  add_override_flags(c_dec, dec.o);
  c_dec->add_option("--image", dec.image, "input image (captioned when --caption is absent)")
      ->check(CLI::ExistingFile);
  c_dec->add_option("--instruction", dec.instruction, "ambiguous instruction")->required();
  c_dec->add_option("--caption", dec.caption, "caption of the input image");
  c_dec->add_option("--out", dec.out, "directory for decomposition.json");
  c_dec->add_flag("--force", dec.force, "replace a non-empty --out");

  EditArgs ed;
  auto* c_edit = app.add_subcommand("edit", "edit images and write manifests");
  add_override_flags(c_edit, ed.o);
  c_edit->add_option("--image", ed.images, "input image(s)")->required()->check(CLI::ExistingFile);
  c_edit->add_option("--instruction", ed.instruction, "ambiguous instruction")->required();
  c_edit->add_option("--caption", ed.caption, "caption used for decomposition");
  c_edit->add_option("--specific", ed.specifics, "use these specific instructions instead of asking the LLM");
  c_edit->add_option("--out", ed.out, "output directory")->required();
  c_edit->add_option("--workers", ed.workers, "parallel edits over the input list")->check(CLI::PositiveNumber);
  c_edit->add_flag("--force", ed.force, "replace a non-empty --out");

  std::string replay_manifest;
  std::optional<std::string> replay_image;
  auto* c_replay = app.add_subcommand("replay", "re-run an edit from its manifest and compare digests");
  c_replay->add_option("--manifest", replay_manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  c_replay->add_option("--image", replay_image, "input image (default: path in the manifest)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "embedding metrics for edited images");
  add_override_flags(c_eval, ev.o);
  c_eval->add_option("--manifest", ev.manifests, "manifest(s) written by edit")->check(CLI::ExistingFile);
  c_eval->add_option("--dir", ev.dir, "evaluate every manifest.json below this directory")
      ->check(CLI::ExistingDirectory);
  c_eval->add_option("--image", ev.images, "input and edited image")->check(CLI::ExistingFile);
  c_eval->add_option("--instruction", ev.instruction, "instruction, for captioning image pairs");
  c_eval->add_option("--initial-caption", ev.initial_caption, "caption of the input");
  c_eval->add_option("--final-caption", ev.final_caption, "caption of the intended result");
  c_eval->add_option("--embeddings", ev.embeddings, "JSON table of image and text embeddings")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--dim", ev.dim, "fixture embedding dimension")->check(CLI::PositiveNumber);
  c_eval->add_option("--out", ev.out, "directory for metrics.json");
  c_eval->add_flag("--force", ev.force, "replace a non-empty --out");

  BenchArgs bn;
  auto* c_bench = app.add_subcommand("bench", "denoiser calls and wall-clock time against N");
  add_override_flags(c_bench, bn.o);
  c_bench->add_option("--n-min", bn.n_min, "smallest N (0 runs the baseline)");
  c_bench->add_option("--n-max", bn.n_max, "largest N");
  c_bench->add_option("--repeats", bn.repeats, "runs per N; the median is reported");
  c_bench->add_option("--image", bn.image, "input image (default: synthetic)")->check(CLI::ExistingFile);
  c_bench->add_flag("--json", bn.as_json, "emit JSON instead of a table");

  Overrides cl;
  std::string cl_instruction;
  auto* c_cls = app.add_subcommand("classify", "ask the LLM whether an instruction is ambiguous");
  add_override_flags(c_cls, cl);
  c_cls->add_option("--instruction", cl_instruction, "instruction")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_dec->parsed()) return cmd_decompose(dec);
    if (c_edit->parsed()) return cmd_edit(ed);
    if (c_replay->parsed()) return cmd_replay(replay_manifest, replay_image);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_bench->parsed()) return cmd_bench(bn);
    if (c_cls->parsed()) return cmd_classify(cl, cl_instruction);
  } catch (const sane::BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
