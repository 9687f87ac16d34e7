#pragma once

// Ambiguous instruction -> ordered list of specific instructions, via an LLM.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sane/digest.hpp"
#include "sane/errors.hpp"
#include "sane/llm.hpp"
#include "sane/prompts.hpp"
#include "sane/result.hpp"

namespace sane {

inline constexpr int kDefaultMaxSpecific = 3;

struct SpecificInstructionSet {
  std::vector<std::string> instructions;
  std::string source_model;
  std::string prompt_digest;
  std::string caption;

  std::size_t size() const noexcept { return instructions.size(); }
  bool empty() const noexcept { return instructions.empty(); }

  // The set for a smaller N is the length-N prefix of this one.
  SpecificInstructionSet prefix(std::size_t n) const {
    if (n > instructions.size()) {
      throw ValidationError("requested " + std::to_string(n) + " specific instructions, only " +
                            std::to_string(instructions.size()) + " available");
    }
    SpecificInstructionSet out = *this;
    out.instructions.resize(n);
    return out;
  }

  friend bool operator==(const SpecificInstructionSet&, const SpecificInstructionSet&) = default;
};

struct CaptionPair {
  std::string initial;
  std::string final;
};

enum class Ambiguity { Ambiguous, Specific };

inline const char* to_string(Ambiguity a) { return a == Ambiguity::Ambiguous ? "ambiguous" : "specific"; }

namespace text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

inline std::vector<std::string_view> lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      out.push_back(line);
      start = i + 1;
    }
  }
  return out;
}

// ASCII and UTF-8 typographic quotes.
inline constexpr std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98",
                                               "\xE2\x80\x99"};

inline std::string_view strip_quotes(std::string_view s) {
  bool changed = true;
  while (changed) {
    changed = false;
    s = trim(s);
    for (auto q : kQuotes) {
      if (s.size() >= q.size() && s.substr(0, q.size()) == q) {
        s.remove_prefix(q.size());
        changed = true;
      }
      if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) {
        s.remove_suffix(q.size());
        changed = true;
      }
    }
  }
  return s;
}

// "-", "*", "+", bullet characters, "1.", "2)", "(3)".
inline std::string_view strip_list_marker(std::string_view s) {
  s = trim(s);
  for (std::string_view b : {"- ", "* ", "+ ", "\xE2\x80\xA2", "\xE2\x80\x93 ", "\xE2\x80\x94 "}) {
    if (s.substr(0, b.size()) == b) return trim(s.substr(b.size()));
  }
  if (s == "-" || s == "*" || s == "+") return {};
  std::size_t i = 0;
  if (i < s.size() && s[i] == '(') ++i;
  const std::size_t digits_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > digits_start && i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':')) {
    // "1.5 meters" is not a list marker.
    if (s[i] == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) return s;
    return trim(s.substr(i + 1));
  }
  return s;
}

inline std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

}  // namespace text

// One instruction per line. Bullets, numbering, quotes and any leading
// "Suggested output:" label are removed; empty and repeated lines are
// dropped; the first n survivors are returned.
inline Result<SpecificInstructionSet> parse_specific_instructions(std::string_view llm_output, int n) {
  if (n < 1) return Failure{FailureKind::Decomposition, "n must be >= 1", std::string(llm_output)};
  std::vector<std::string> found;
  std::vector<std::string> seen_lower;
  for (std::string_view line : text::lines(llm_output)) {
    std::string_view s = text::strip_list_marker(line);
    while (text::istarts_with(s, "suggested output:") || text::istarts_with(s, "suggested outputs:")) {
      s = text::trim(s.substr(s.find(':') + 1));
      s = text::strip_list_marker(s);
    }
    s = text::strip_quotes(s);
    if (s.empty()) continue;
    std::string key = text::lower(s);
    if (std::find(seen_lower.begin(), seen_lower.end(), key) != seen_lower.end()) continue;
    seen_lower.push_back(std::move(key));
    found.emplace_back(s);
    if (static_cast<int>(found.size()) == n) break;
  }
  if (static_cast<int>(found.size()) < n) {
    return Failure{FailureKind::Decomposition,
                   "expected " + std::to_string(n) + " instructions, found " + std::to_string(found.size()),
                   std::string(llm_output)};
  }
  SpecificInstructionSet set;
  set.instructions = std::move(found);
  return set;
}

// Expects the numbered two-line reply: 1. "..." / 2. "...".
inline Result<CaptionPair> parse_caption_pair(std::string_view llm_output, std::size_t word_budget = 10) {
  const std::string raw(llm_output);
  std::optional<std::string> first, second;
  auto numbered = [](std::string_view line, char digit) -> std::optional<std::string_view> {
    line = text::trim(line);
    if (line.size() >= 2 && line[0] == digit && (line[1] == '.' || line[1] == ')')) return line.substr(2);
    return std::nullopt;
  };
  for (std::string_view line : text::lines(llm_output)) {
    if (!first) {
      if (auto body = numbered(line, '1')) {
        // Both items on one line: 1. "a" 2. "b"
        const std::string_view b = *body;
        for (std::size_t i = 0; i + 1 < b.size(); ++i) {
          if (b[i] == '2' && (b[i + 1] == '.' || b[i + 1] == ')') && (i == 0 || text::is_space(b[i - 1]))) {
            first = std::string(text::strip_quotes(b.substr(0, i)));
            second = std::string(text::strip_quotes(b.substr(i + 2)));
            break;
          }
        }
        if (!first) first = std::string(text::strip_quotes(b));
        continue;
      }
    } else if (!second) {
      if (auto body = numbered(line, '2')) second = std::string(text::strip_quotes(*body));
    }
  }
  if (!first) return Failure{FailureKind::Parse, "missing caption line 1", raw};
  if (!second) return Failure{FailureKind::Parse, "missing caption line 2", raw};
  if (first->empty() || second->empty()) return Failure{FailureKind::Parse, "empty caption", raw};
  if (text::word_count(*first) > word_budget || text::word_count(*second) > word_budget) {
    return Failure{FailureKind::Parse, "caption exceeds " + std::to_string(word_budget) + " words", raw};
  }
  return CaptionPair{std::move(*first), std::move(*second)};
}

// Finds whichever of "Response: ambiguous" / "Response: specific" occurs
// first, ignoring case.
inline Result<Ambiguity> parse_ambiguity_response(std::string_view llm_output) {
  const std::string low = text::lower(llm_output);
  const auto amb = low.find("response: ambiguous");
  const auto spe = low.find("response: specific");
  if (amb == std::string::npos && spe == std::string::npos) {
    return Failure{FailureKind::Classification, "no 'Response: ambiguous/specific' token", std::string(llm_output)};
  }
  return amb < spe ? Ambiguity::Ambiguous : Ambiguity::Specific;
}

struct SpecifierOptions {
  int max_specific = kDefaultMaxSpecific;
  int max_retries = 2;  // extra attempts after a malformed reply
  std::size_t caption_word_budget = 10;
};

class InstructionSpecifier {
 public:
  InstructionSpecifier(std::shared_ptr<CachedLlm> llm, SpecifierOptions options = {})
      : llm_(std::move(llm)), options_(options) {
    if (!llm_) throw ValidationError("InstructionSpecifier needs an LLM");
    if (options_.max_specific < 1) throw ValidationError("max_specific must be >= 1");
    if (options_.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  }

  const SpecifierOptions& options() const noexcept { return options_; }
  CachedLlm& llm() noexcept { return *llm_; }

  // One request for max_n instructions. Smaller N are served as prefixes of
  // the result. Only well-formed replies are cached.
  SpecificInstructionSet decompose(std::string_view caption, std::string_view instruction, int max_n) {
    if (max_n < 1) throw ValidationError("max_n must be >= 1");
    if (max_n > options_.max_specific) {
      throw ValidationError("max_n " + std::to_string(max_n) + " exceeds configured maximum " +
                            std::to_string(options_.max_specific));
    }
    const std::string_view c = text::trim(instruction);
    if (c.empty()) throw ValidationError("ambiguous instruction is empty");

    LlmRequest req{prompts::decomposition(caption, c, max_n), {}};
    const std::string digest = sha256_hex(req.prompt);
    auto finish = [&](SpecificInstructionSet set) {
      set.source_model = llm_->model_id();
      set.prompt_digest = digest;
      set.caption = std::string(caption);
      return set;
    };

    std::lock_guard key_lock(llm_->lock_for(req));
    if (auto hit = llm_->cached(req)) {
      auto parsed = parse_specific_instructions(*hit, max_n);
      if (parsed) return finish(std::move(parsed).value());
    }
    std::string last;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      last = llm_->ask(req);
      auto parsed = parse_specific_instructions(last, max_n);
      if (parsed) {
        llm_->store(req, last);
        return finish(std::move(parsed).value());
      }
    }
    throw DecompositionError("LLM reply still malformed after " + std::to_string(options_.max_retries) +
                                 " retries",
                             last);
  }

  // Set for n built from the configured maximum, so every n shares one call.
  SpecificInstructionSet specify(std::string_view caption, std::string_view instruction, int n) {
    if (n < 1) throw ValidationError("n must be >= 1");
    return decompose(caption, instruction, options_.max_specific).prefix(static_cast<std::size_t>(n));
  }

  CaptionPair caption(std::string_view instruction, const std::filesystem::path& image) {
    LlmRequest req{prompts::captioning(instruction, "[image 1]"), {image}};
    std::lock_guard key_lock(llm_->lock_for(req));
    if (auto hit = llm_->cached(req)) {
      auto parsed = parse_caption_pair(*hit, options_.caption_word_budget);
      if (parsed) return std::move(parsed).value();
    }
    std::string reply = llm_->ask(req);
    auto parsed = parse_caption_pair(reply, options_.caption_word_budget);
    if (parsed) llm_->store(req, reply);
    return std::move(parsed).value_or_throw();
  }

  Ambiguity classify(std::string_view instruction) {
    LlmRequest req{prompts::ambiguity_selection(instruction), {}};
    return parse_ambiguity_response(llm_->complete(req)).value_or_throw();
  }

 private:
  std::shared_ptr<CachedLlm> llm_;
  SpecifierOptions options_;
};

}  // namespace sane
