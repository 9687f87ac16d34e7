#pragma once

#include <string>
#include <utility>
#include <variant>

#include "sane/errors.hpp"

namespace sane {

enum class FailureKind { Parse, Decomposition, Classification, Evaluation };

inline const char* to_string(FailureKind k) {
  switch (k) {
    case FailureKind::Parse: return "parse";
    case FailureKind::Decomposition: return "decomposition";
    case FailureKind::Classification: return "classification";
    case FailureKind::Evaluation: return "evaluation";
  }
  return "unknown";
}

// Typed failure from a parser. `raw` keeps the offending text for audit.
struct Failure {
  FailureKind kind = FailureKind::Parse;
  std::string message;
  std::string raw;
};

// Value-or-failure return for the text parsers, which must not throw on
// arbitrary model output.
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Failure f) : v_(std::move(f)) {}    // NOLINT(google-explicit-constructor)

  bool ok() const noexcept { return std::holds_alternative<T>(v_); }
  explicit operator bool() const noexcept { return ok(); }

  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }
  const Failure& error() const& { return std::get<Failure>(v_); }

  // Converts a failure into the matching exception type.
  T value_or_throw() && {
    if (ok()) return std::get<T>(std::move(v_));
    const Failure& f = std::get<Failure>(v_);
    const std::string msg = std::string(to_string(f.kind)) + " error: " + f.message;
    switch (f.kind) {
      case FailureKind::Decomposition: throw DecompositionError(msg, f.raw);
      case FailureKind::Classification: throw ClassificationError(msg, f.raw);
      case FailureKind::Evaluation: throw EvaluationError(msg);
      case FailureKind::Parse: break;
    }
    throw ParseError(msg, f.raw);
  }

 private:
  std::variant<T, Failure> v_;
};

}  // namespace sane
