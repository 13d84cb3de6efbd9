#include "sdqc/error.hpp"

namespace sdqc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::BrokenTree: return "BrokenTree";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::CorpusEmpty: return "CorpusEmpty";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::PostNotInThread: return "PostNotInThread";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoTrace: return "NoTrace";
    case ErrorCode::StateShapeMismatch: return "StateShapeMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::EmptyPredictionSet: return "EmptyPredictionSet";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::ExampleOrderMismatch: return "ExampleOrderMismatch";
    case ErrorCode::WrongModelKind: return "WrongModelKind";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace sdqc
