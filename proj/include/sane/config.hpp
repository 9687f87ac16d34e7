#pragma once

// INI run configuration with sections [weights], [sampler], [backend], [llm]
// and [edit]. Missing keys keep their defaults.

#include <filesystem>
#include <optional>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sane/denoiser.hpp"
#include "sane/errors.hpp"
#include "sane/pipeline.hpp"

namespace sane {

struct LlmConfig {
  std::string provider = "fixture";  // fixture | openai
  std::string model = "fixture";
  std::string fixtures;               // JSON rules for the fixture provider
  std::string cache_dir;              // empty: in-memory cache only
  std::string endpoint = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<double> temperature;  // provider default when unset
  int max_retries = 2;
};

struct RunConfig {
  EditConfig edit;
  BackendConfig backend;
  LlmConfig llm;
  EditStrategy strategy = EditStrategy::Sane;
};

namespace detail {

// Present keys must convert; absent keys leave `dest` unchanged.
template <typename T>
void read_key(const boost::property_tree::ptree& pt, const char* key, T& dest) {
  if (pt.get_child_optional(key)) dest = pt.get<T>(key);
}

}  // namespace detail

inline RunConfig parse_config(const boost::property_tree::ptree& pt) {
  RunConfig rc;
  try {
    if (auto preset = pt.get_optional<std::string>("weights.model")) rc.edit.weights = default_weights_for(*preset);
    detail::read_key(pt, "weights.image", rc.edit.weights.w_image);
    detail::read_key(pt, "weights.text", rc.edit.weights.w_text);
    detail::read_key(pt, "weights.specific", rc.edit.weights.w_specific);

    detail::read_key(pt, "sampler.steps", rc.edit.steps);
    detail::read_key(pt, "sampler.seed", rc.edit.seed);
    detail::read_key(pt, "sampler.width", rc.edit.width);
    detail::read_key(pt, "sampler.height", rc.edit.height);
    detail::read_key(pt, "sampler.batched", rc.edit.batched);
    detail::read_key(pt, "sampler.dump_masks", rc.edit.dump_masks);
    detail::read_key(pt, "sampler.eta", rc.backend.eta);

    detail::read_key(pt, "backend.id", rc.backend.id);
    detail::read_key(pt, "backend.model", rc.backend.model_ref);
    detail::read_key(pt, "backend.downscale", rc.backend.downscale_factor);

    detail::read_key(pt, "llm.provider", rc.llm.provider);
    detail::read_key(pt, "llm.model", rc.llm.model);
    detail::read_key(pt, "llm.fixtures", rc.llm.fixtures);
    detail::read_key(pt, "llm.cache_dir", rc.llm.cache_dir);
    detail::read_key(pt, "llm.endpoint", rc.llm.endpoint);
    detail::read_key(pt, "llm.api_key_env", rc.llm.api_key_env);
    if (pt.get_child_optional("llm.temperature")) rc.llm.temperature = pt.get<double>("llm.temperature");
    detail::read_key(pt, "llm.max_retries", rc.llm.max_retries);
    detail::read_key(pt, "llm.max_specific", rc.edit.max_specific);

    detail::read_key(pt, "edit.n", rc.edit.n_specific);
    if (auto s = pt.get_optional<std::string>("edit.strategy")) rc.strategy = parse_strategy(*s);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path.string(), pt);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ValidationError("cannot read config " + path.string() + ": " + e.what());
  }
  RunConfig rc = parse_config(pt);
  // Relative paths in the config resolve against the config file.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(rc.llm.fixtures);
  resolve(rc.llm.cache_dir);
  return rc;
}

}  // namespace sane
