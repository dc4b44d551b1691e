#include "costalign/error.hpp"

namespace costalign {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PairMismatch: return "PairMismatch";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::MissingBranch: return "MissingBranch";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::AmbiguousSide: return "AmbiguousSide";
    case ErrorCode::MissingSide: return "MissingSide";
    case ErrorCode::MissingSternum: return "MissingSternum";
    case ErrorCode::GraphMismatch: return "GraphMismatch";
    case ErrorCode::SparseNeighborhood: return "SparseNeighborhood";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ManifoldStarved: return "ManifoldStarved";
    case ErrorCode::UndefinedBoundary: return "UndefinedBoundary";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace costalign
