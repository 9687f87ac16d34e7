#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sane/image.hpp"
#include "sane/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("sane_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

RunResult run(const std::vector<std::string>& args) {
  std::string cmd = quote(SANE_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  const fs::path err_file = work_dir() / "stderr.txt";
  cmd += " 2>" + quote(err_file.string());
  RunResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err_file);
  r.err.assign(std::istreambuf_iterator<char>(e), std::istreambuf_iterator<char>());
  return r;
}

std::string samples(const std::string& rel) { return (fs::path(SANE_SAMPLES_DIR) / rel).string(); }

std::string config() { return samples("config.ini"); }

// Sample config plus a persistent prompt cache in `cache`.
std::string cached_config(const fs::path& cache) {
  const fs::path p = work_dir() / ("config_" + cache.filename().string() + ".ini");
  std::ifstream in(config());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  const std::string key = "fixtures = fixtures/llm_fixtures.json";
  text.replace(text.find(key), key.size(),
               "fixtures = " + samples("fixtures/llm_fixtures.json") + "\ncache_dir = " + cache.string());
  std::ofstream(p) << text;
  return p.string();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST(CliDecompose, FunnyCatFixture) {
  auto r = run({"decompose", "--config", config(), "--image", samples("images/cat.png"), "--instruction",
                "make the cat look funny", "--n", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "add a hat to the cat.\n");
  r = run({"decompose", "--config", config(), "--image", samples("images/cat.png"), "--instruction",
           "make the cat look funny"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "add a hat to the cat.\nadd big cartoon glasses to the cat\nadd a clown nose to the cat\n");
}

TEST(CliDecompose, CacheHitPrintsIdenticallyAndRecords) {
  const auto cfg = cached_config(work_dir() / "cache_dec");
  const std::vector<std::string> base = {"decompose",   "--config", cfg, "--caption", "a red train on a track",
                                         "--instruction", "make it winter", "--n", "2"};
  auto args = base;
  args.insert(args.end(), {"--out", (work_dir() / "dec1").string()});
  const auto first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  args = base;
  args.insert(args.end(), {"--out", (work_dir() / "dec2").string()});
  const auto second = run(args);
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(first.out, second.out);
  EXPECT_EQ(first.out, "Cover the ground with snow\nAdd snowy mountain peaks in the background\n");
  const auto r1 = read_json(work_dir() / "dec1" / "decomposition.json");
  const auto r2 = read_json(work_dir() / "dec2" / "decomposition.json");
  EXPECT_FALSE(r1["served_from_cache"].get<bool>());
  EXPECT_TRUE(r2["served_from_cache"].get<bool>());
  EXPECT_EQ(r1["instructions"], r2["instructions"]);
  EXPECT_EQ(r1["caption"], "a red train on a track");
  EXPECT_TRUE(fs::exists(work_dir() / "cache_dec" / "llm_cache.jsonl"));
}

TEST(CliDecompose, UsageErrors) {
  auto r = run({"decompose", "--config", config(), "--caption", "x", "--instruction", "make it winter", "--n", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  r = run({"decompose", "--config", config(), "--instruction", "make it winter"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--image or --caption"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(CliEdit, MockRunRecordsCallsAndReplays) {
  const fs::path out = work_dir() / "edit_sane";
  auto r = run({"edit", "--config", config(), "--image", samples("images/train.png"), "--instruction",
                "make it winter", "--n", "3", "--strategy", "sane", "--seed", "7", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(first_line(r.out), (out / "manifest.json").string());
  ASSERT_TRUE(fs::exists(out / "edited.png"));
  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m["calls_per_step"], 6);
  EXPECT_EQ(m["total_denoiser_calls"], 180);
  EXPECT_EQ(m["config"]["seed"], 7);
  EXPECT_EQ(m["specific_instructions"]["caption"], "a red train on a track");
  EXPECT_EQ(m["specific_instructions"]["instructions"][0], "Cover the ground with snow");
  EXPECT_EQ(m["output"]["digest"], sane::read_image(out / "edited.png").digest());
  for (auto& st : m["steps"]) EXPECT_EQ(st["calls"], 6);

  r = run({"replay", "--manifest", (out / "manifest.json").string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  r = run({"replay", "--manifest", (out / "manifest.json").string(), "--image", samples("images/cat.png")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("MISMATCH"), std::string::npos);
}

TEST(CliEdit, OverridesAndStrategies) {
  struct Case {
    std::string strategy, n;
    int per_step;
  };
  for (const Case& c : {Case{"baseline", "3", 3}, Case{"prompt_concat", "3", 3}, Case{"sane", "1", 4}}) {
    const fs::path out = work_dir() / ("edit_" + c.strategy + c.n);
    auto r = run({"edit", "--config", config(), "--image", samples("images/cat.png"), "--instruction",
                  "make the cat look funny", "--strategy", c.strategy, "--n", c.n, "--steps", "5", "--w-specific",
                  "3.5", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = read_json(out / "manifest.json");
    EXPECT_EQ(m["calls_per_step"], c.per_step) << c.strategy;
    EXPECT_EQ(m["config"]["steps"], 5);
    EXPECT_EQ(m["config"]["weights"]["specific"], 3.5);
  }
}

TEST(CliEdit, MissingBackendFails) {
  const fs::path out = work_dir() / "edit_nobackend";
  auto r = run({"edit", "--config", config(), "--image", samples("images/cat.png"), "--instruction",
                "make the cat look funny", "--backend", "ip2p", "--out", out.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("unavailable"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliEdit, RefusesNonEmptyOutputWithoutForce) {
  const fs::path out = work_dir() / "edit_force";
  const std::vector<std::string> args = {"edit",   "--config",   config(), "--image", samples("images/cat.png"),
                                         "--instruction", "make the cat look funny", "--steps", "2",
                                         "--out", out.string()};
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(run(args).code, 1);
  auto forced = args;
  forced.push_back("--force");
  EXPECT_EQ(run(forced).code, 0);
  for (const auto& e : fs::directory_iterator(work_dir())) {
    EXPECT_EQ(e.path().filename().string().find(".partial-"), std::string::npos) << e.path();
  }
}

TEST(CliEdit, ParallelOverInputsThenBatchEval) {
  const fs::path out = work_dir() / "edit_multi";
  auto r = run({"edit", "--config", config(), "--image", samples("images/cat.png"), "--image",
                samples("images/train.png"), "--instruction", "make it winter", "--caption", "a picture",
                "--workers", "2", "--steps", "4", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "000_cat" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "001_train" / "manifest.json"));

  // Sequential run of the same inputs gives the same images.
  const fs::path seq = work_dir() / "edit_multi_seq";
  r = run({"edit", "--config", config(), "--image", samples("images/cat.png"), "--image",
           samples("images/train.png"), "--instruction", "make it winter", "--caption", "a picture", "--steps", "4",
           "--out", seq.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(sane::read_image(out / "001_train" / "edited.png"), sane::read_image(seq / "001_train" / "edited.png"));

  r = run({"eval", "--config", config(), "--dir", out.string(), "--initial-caption", "a picture",
           "--final-caption", "a snowy picture", "--out", (work_dir() / "eval_multi").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  EXPECT_EQ(rep["aggregate"]["count"], 2);
  const double mean_i = (rep["samples"][0]["clip_i"].get<double>() + rep["samples"][1]["clip_i"].get<double>()) / 2;
  EXPECT_NEAR(rep["aggregate"]["clip_i"].get<double>(), mean_i, 1e-12);
  EXPECT_EQ(read_json(work_dir() / "eval_multi" / "metrics.json"), rep);
}

TEST(CliEval, FixtureEmbeddingsReproduceHandCosines) {
  const fs::path x = work_dir() / "x.png", y = work_dir() / "y.png";
  sane::write_image(x, sane::Image(8, 8, 3, 10));
  sane::write_image(y, sane::Image(8, 8, 3, 200));
  const fs::path emb = work_dir() / "embeddings.json";
  std::ofstream(emb) << R"({"images": {"x.png": [1, 0], "y.png": [1, 1]},
                             "texts": {"a cat": [1, 0], "a funny cat": [2, 1]}})";
  auto r = run({"eval", "--image", x.string(), "--image", y.string(), "--initial-caption", "a cat",
                "--final-caption", "a funny cat", "--embeddings", emb.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  const auto& s = rep["samples"][0];
  EXPECT_NEAR(s["clip_delta"].get<double>(), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s["clip_i"].get<double>(), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s["clip_d"].get<double>(), 3 / std::sqrt(10.0), 1e-12);
}

TEST(CliEval, IdenticalImagesLeaveDeltaUndefined) {
  const auto img = samples("images/cat.png");
  auto r = run({"eval", "--config", config(), "--image", img, "--image", img, "--instruction",
                "make the cat look funny"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  EXPECT_EQ(rep["samples"][0]["clip_i"].get<double>(), 1.0);
  EXPECT_TRUE(rep["samples"][0]["clip_delta"].is_null());
  EXPECT_EQ(rep["aggregate"]["clip_delta_missing"], 1);
  EXPECT_EQ(rep["captions"][0]["final"], "a cat wearing a party hat on a sofa");
}

TEST(CliEval, ManifestInput) {
  const fs::path out = work_dir() / "edit_for_eval";
  ASSERT_EQ(run({"edit", "--config", config(), "--image", samples("images/cat.png"), "--instruction",
                 "make the cat look funny", "--steps", "3", "--out", out.string()})
                .code,
            0);
  auto r = run({"eval", "--config", config(), "--manifest", (out / "manifest.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  EXPECT_EQ(rep["aggregate"]["count"], 1);
  EXPECT_LT(rep["samples"][0]["clip_i"].get<double>(), 1.0);
  EXPECT_EQ(run({"eval", "--config", config()}).code, 1);
}

TEST(CliBench, CountsMatchEstimate) {
  auto r = run({"bench", "--config", config(), "--n-min", "0", "--n-max", "3", "--steps", "10", "--repeats", "1",
                "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  EXPECT_TRUE(rep["counts_match_estimate"].get<bool>());
  const int per_step[] = {3, 4, 5, 6};
  ASSERT_EQ(rep["rows"].size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(rep["rows"][i]["calls_per_step"], per_step[i]);
    EXPECT_EQ(rep["rows"][i]["counted_calls"], 10 * per_step[i]);
  }
  EXPECT_EQ(rep["rows"][0]["strategy"], "baseline");

  r = run({"bench", "--config", config(), "--n-min", "1", "--n-max", "2", "--steps", "2", "--repeats", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n\tstrategy\tcalls_per_step"), std::string::npos);
  EXPECT_NE(r.out.find("counts_match_estimate=yes"), std::string::npos);
}

TEST(CliBench, WallClockGrowsWithN) {
  auto r = run({"bench", "--config", config(), "--n-min", "0", "--n-max", "8", "--steps", "30", "--size", "64",
                "--repeats", "3", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(r.out);
  // Every extra instruction adds a full denoiser call per step; compare
  // endpoints and every second N to stay clear of timer noise.
  const auto& rows = rep["rows"];
  for (std::size_t i = 2; i < rows.size(); i += 2) {
    EXPECT_GT(rows[i]["wall_ms_median"].get<double>(), rows[i - 2]["wall_ms_median"].get<double>()) << i;
  }
}

TEST(CliClassify, FixtureVerdicts) {
  auto r = run({"classify", "--config", config(), "--instruction", "make it winter"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ambiguous\n");
  r = run({"classify", "--config", config(), "--instruction", "change the sheep into a calf"});
  EXPECT_EQ(r.out, "specific\n");
}
