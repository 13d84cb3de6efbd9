#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdqc {

enum class ErrorCode {
  MalformedDocument,
  BrokenTree,
  MissingLabel,
  CorpusEmpty,
  InvalidConfig,
  PostNotInThread,
  ShapeMismatch,
  NoTrace,
  StateShapeMismatch,
  ConfigMismatch,
  DimensionMismatch,
  EmptyClass,
  EmptyDataset,
  CorpusTooSmall,
  EmptyPredictionSet,
  NonFiniteObjective,
  MissingModel,
  ExampleOrderMismatch,
  WrongModelKind,
  IoFailure,
};

std::string_view to_string(ErrorCode code);

// Single exception type for every recoverable failure in the toolkit; the
// code lets callers (tests, the CLI exit-status mapping) branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace sdqc
