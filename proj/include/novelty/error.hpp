#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace novelty {

enum class ErrorKind {
  ProviderUnavailable,
  TargetNotFound,
  CapacityTooSmall,
  EmptyDocument,
  EmptyCorpus,
  DimensionMismatch,
  MalformedOutput,
  BudgetExceeded,
  StructureViolation,
  EmptyAnswers,
  MissingDimension,
  MissingClassAnnotations,
  IncompleteMatrix,
  InvalidConfig,
  InvalidInput,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the engine carries a kind so the CLI can map it
// to a stable exit code.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message);

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string &message);

} // namespace novelty
