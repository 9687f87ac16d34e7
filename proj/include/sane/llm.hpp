#pragma once

// Text-in/text-out LLM boundary, an offline fixture provider, and the
// append-only on-disk prompt cache.

#include <atomic>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sane/digest.hpp"
#include "sane/errors.hpp"

namespace sane {

struct LlmRequest {
  std::string prompt;
  std::vector<std::filesystem::path> images;  // attachments, in prompt order
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string model_id() const = 0;
  virtual bool supports_images() const { return false; }
  // Throws ProviderError on transport or service failure.
  virtual std::string complete(const LlmRequest& request) = 0;
};

// Replays canned responses. A rule fires when every one of its `contains`
// substrings occurs in the prompt; the first firing rule wins.
//
//   {"model": "fixture", "rules": [{"contains": ["..."], "response": "..."}],
//    "default": "..."}
class FixtureProvider final : public LlmProvider {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string response;
  };

  FixtureProvider(std::string model, std::vector<Rule> rules, std::optional<std::string> fallback = std::nullopt)
      : model_(std::move(model)), rules_(std::move(rules)), fallback_(std::move(fallback)) {}

  static FixtureProvider from_json(const nlohmann::json& j) {
    std::vector<Rule> rules;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      Rule rule;
      const auto& c = r.at("contains");
      if (c.is_string()) {
        rule.contains.push_back(c.get<std::string>());
      } else {
        rule.contains = c.get<std::vector<std::string>>();
      }
      rule.response = r.at("response").get<std::string>();
      rules.push_back(std::move(rule));
    }
    std::optional<std::string> fallback;
    if (j.contains("default")) fallback = j.at("default").get<std::string>();
    return FixtureProvider(j.value("model", "fixture"), std::move(rules), std::move(fallback));
  }

  static FixtureProvider from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ProviderError("cannot open LLM fixtures " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError("bad LLM fixtures " + path.string() + ": " + e.what());
    }
  }

  std::string model_id() const override { return model_; }
  bool supports_images() const override { return true; }

  std::string complete(const LlmRequest& request) override {
    for (const auto& rule : rules_) {
      bool all = true;
      for (const auto& needle : rule.contains) {
        if (request.prompt.find(needle) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) return rule.response;
    }
    if (fallback_) return *fallback_;
    throw ProviderError("fixture provider has no response for this prompt");
  }

 private:
  std::string model_;
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
};

// digest(model id, prompt text, attachment contents)
inline std::string cache_key(const std::string& model_id, const LlmRequest& request) {
  Sha256 h;
  h.field("sane-llm-cache-v1").field(model_id).field(request.prompt);
  for (const auto& img : request.images) {
    std::ifstream in(img, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    h.field(bytes);
  }
  return h.hex();
}

struct CacheRecord {
  std::string key;
  std::string model;
  std::string prompt;
  std::string response;
  std::string timestamp;
};

// Append-only JSON-lines store, one record per line. A later record for the
// same key shadows earlier ones. A torn final line is ignored on load.
class PromptCache {
 public:
  PromptCache() = default;  // memory only
  explicit PromptCache(std::filesystem::path dir) : file_(dir / "llm_cache.jsonl") {
    std::filesystem::create_directories(dir);
    load();
  }

  std::optional<CacheRecord> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void put(CacheRecord rec) {
    if (rec.timestamp.empty()) rec.timestamp = now_iso8601();
    std::lock_guard lock(mu_);
    if (file_) {
      const nlohmann::json j = {{"key", rec.key},
                                {"model", rec.model},
                                {"prompt", rec.prompt},
                                {"response", rec.response},
                                {"timestamp", rec.timestamp}};
      const std::string line = j.dump() + "\n";
      // One fwrite per record keeps lines whole for concurrent readers.
      std::FILE* f = std::fopen(file_->c_str(), "ab");
      if (!f) throw ProviderError("cannot append to cache " + file_->string());
      std::fwrite(line.data(), 1, line.size(), f);
      std::fflush(f);
      std::fclose(f);
    }
    records_[rec.key] = std::move(rec);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  static std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

 private:
  void load() {
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("response")) continue;
      CacheRecord rec{j.value("key", ""), j.value("model", ""), j.value("prompt", ""), j.value("response", ""),
                      j.value("timestamp", "")};
      records_[rec.key] = std::move(rec);
    }
  }

  std::optional<std::filesystem::path> file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, CacheRecord> records_;
};

// Provider behind a cache. Distinct keys may be served concurrently; calls for
// one key are serialized so the provider is asked at most once per key.
class CachedLlm {
 public:
  CachedLlm(std::shared_ptr<LlmProvider> provider, std::shared_ptr<PromptCache> cache)
      : provider_(std::move(provider)), cache_(std::move(cache)) {
    if (!provider_) throw ValidationError("CachedLlm needs a provider");
    if (!cache_) cache_ = std::make_shared<PromptCache>();
  }

  const LlmProvider& provider() const { return *provider_; }
  std::string model_id() const { return provider_->model_id(); }
  std::string key(const LlmRequest& req) const { return cache_key(provider_->model_id(), req); }

  std::optional<std::string> cached(const LlmRequest& req) const {
    if (auto rec = cache_->get(key(req))) return rec->response;
    return std::nullopt;
  }

  // Always asks the provider. Nothing is stored.
  std::string ask(const LlmRequest& req) {
    ++provider_calls_;
    return provider_->complete(req);
  }

  void store(const LlmRequest& req, const std::string& response) {
    cache_->put({key(req), provider_->model_id(), req.prompt, response, {}});
  }

  // Cache lookup, else provider call whose response is stored.
  std::string complete(const LlmRequest& req) {
    const std::string k = key(req);
    std::lock_guard key_lock(*key_mutex(k));
    if (auto rec = cache_->get(k)) return rec->response;
    std::string response = ask(req);
    cache_->put({k, provider_->model_id(), req.prompt, response, {}});
    return response;
  }

  std::mutex& lock_for(const LlmRequest& req) { return *key_mutex(key(req)); }

  std::size_t provider_calls() const noexcept { return provider_calls_; }

 private:
  std::shared_ptr<std::mutex> key_mutex(const std::string& k) {
    std::lock_guard lock(map_mu_);
    auto& m = key_mutexes_[k];
    if (!m) m = std::make_shared<std::mutex>();
    return m;
  }

  std::shared_ptr<LlmProvider> provider_;
  std::shared_ptr<PromptCache> cache_;
  std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_mutexes_;
  std::atomic<std::size_t> provider_calls_{0};
};

}  // namespace sane
