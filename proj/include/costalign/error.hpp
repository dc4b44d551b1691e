#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace costalign {

enum class ErrorCode {
  EmptyInput,
  PairMismatch,
  DegenerateGeometry,
  InvalidParams,
  MissingBranch,
  EmptyAfterFilter,
  AmbiguousSide,
  MissingSide,
  MissingSternum,
  GraphMismatch,
  SparseNeighborhood,
  NumericalFailure,
  DimensionMismatch,
  ManifoldStarved,
  UndefinedBoundary,
  UndefinedMetric,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a stable code and optional key/value context
/// (for example the offending file path). The CLI serializes it as
/// `{code, message, context}`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::map<std::string, std::string> context = {})
      : std::runtime_error(message), code_(code), context_(std::move(context)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::map<std::string, std::string>& context() const noexcept { return context_; }

 private:
  ErrorCode code_;
  std::map<std::string, std::string> context_;
};

}  // namespace costalign
