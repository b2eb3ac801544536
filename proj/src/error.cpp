#include "novelty/error.hpp"

namespace novelty {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
  case ErrorKind::TargetNotFound: return "TargetNotFound";
  case ErrorKind::CapacityTooSmall: return "CapacityTooSmall";
  case ErrorKind::EmptyDocument: return "EmptyDocument";
  case ErrorKind::EmptyCorpus: return "EmptyCorpus";
  case ErrorKind::DimensionMismatch: return "DimensionMismatch";
  case ErrorKind::MalformedOutput: return "MalformedOutput";
  case ErrorKind::BudgetExceeded: return "BudgetExceeded";
  case ErrorKind::StructureViolation: return "StructureViolation";
  case ErrorKind::EmptyAnswers: return "EmptyAnswers";
  case ErrorKind::MissingDimension: return "MissingDimension";
  case ErrorKind::MissingClassAnnotations: return "MissingClassAnnotations";
  case ErrorKind::IncompleteMatrix: return "IncompleteMatrix";
  case ErrorKind::InvalidConfig: return "InvalidConfig";
  case ErrorKind::InvalidInput: return "InvalidInput";
  case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string &message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string &message) { throw Error(kind, message); }

} // namespace novelty
