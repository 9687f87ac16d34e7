#pragma once

// OpenAI-compatible chat-completions provider. Include only where network
// access is wanted; it pulls in cpp-httplib with TLS.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sane/errors.hpp"
#include "sane/llm.hpp"

namespace sane {

class OpenAiProvider final : public LlmProvider {
 public:
  OpenAiProvider(std::string endpoint, std::string model, std::string api_key,
                 std::optional<double> temperature = std::nullopt)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)),
        temperature_(temperature) {}

  // Key is read from the named environment variable.
  static OpenAiProvider from_env(std::string endpoint, std::string model, const std::string& key_env,
                                 std::optional<double> temperature = std::nullopt) {
    const char* key = std::getenv(key_env.c_str());
    if (key == nullptr || *key == '\0') throw ProviderError("environment variable " + key_env + " is not set");
    return OpenAiProvider(std::move(endpoint), std::move(model), key, temperature);
  }

  std::string model_id() const override { return model_; }
  bool supports_images() const override { return true; }

  nlohmann::json request_body(const LlmRequest& request) const {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const auto& img : request.images) {
      std::ifstream in(img, std::ios::binary);
      if (!in) throw ProviderError("cannot read attachment " + img.string());
      const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      const std::string mime = img.extension() == ".png" ? "image/png" : "image/x-portable-anymap";
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:" + mime + ";base64," + httplib::detail::base64_encode(bytes)}}}});
    }
    nlohmann::json body = {{"model", model_}, {"messages", {{{"role", "user"}, {"content", content}}}}};
    if (temperature_) body["temperature"] = *temperature_;
    return body;
  }

  std::string complete(const LlmRequest& request) override {
    httplib::Client cli(endpoint_);
    cli.set_connection_timeout(30);
    cli.set_read_timeout(120);
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = cli.Post("/v1/chat/completions", headers, request_body(request).dump(), "application/json");
    if (!res) throw ProviderError("LLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ProviderError("LLM request returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw ProviderError("LLM response is not JSON");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("unexpected LLM response shape: ") + e.what());
    }
  }

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  std::optional<double> temperature_;
};

}  // namespace sane
