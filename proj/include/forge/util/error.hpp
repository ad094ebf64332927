#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace forge {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Transport-level or 5xx-class failure; safe to retry.
class RetriableError : public Error {
 public:
  using Error::Error;
};

/// The backend answered but the answer is unusable (refusal, empty text,
/// malformed payload). Carries the raw response for diagnosis.
class ContentError : public Error {
 public:
  ContentError(const std::string& what, std::string raw_response)
      : Error(what), raw_response_(std::move(raw_response)) {}

  const std::string& raw_response() const noexcept { return raw_response_; }

 private:
  std::string raw_response_;
};

/// Contradiction scorer could not produce a score for a pair.
class ScorerError : public Error {
 public:
  using Error::Error;
};

/// Referential integrity failure between artifacts (e.g. a missing chunk).
class ReferenceError : public Error {
 public:
  using Error::Error;
};

/// Aggregated configuration validation failure.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) {
      out += "\n  - ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace forge

namespace forge {

/// A stage was started before the artifact it consumes was produced.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string artifact, std::string produced_by)
      : Error("missing prerequisite artifact '" + artifact + "' (run stage '" + produced_by + "' first)"),
        artifact_(std::move(artifact)),
        produced_by_(std::move(produced_by)) {}

  const std::string& artifact() const noexcept { return artifact_; }
  const std::string& produced_by() const noexcept { return produced_by_; }

 private:
  std::string artifact_;
  std::string produced_by_;
};

}  // namespace forge
