#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rbqa {

enum class ErrorCode {
  // corpus
  DimensionMismatch,
  InvalidChunkParams,
  BundleParseError,
  ValidationError,
  DuplicateDocument,
  // retrieval
  EmptyText,
  ZeroVector,
  DuplicateChunkId,
  EmptyIndex,
  IndexFileError,
  // knowledge graph
  IndexUnavailable,
  EndpointTimeout,
  MalformedResponse,
  EntityNotFound,
  // prompting
  EmptyQuestion,
  NoContext,
  BudgetTooSmall,
  // llm
  RateLimited,
  AuthFailure,
  ReplayMiss,
  Timeout,
  BackendFailure,
  FixtureWriteError,
  // synth
  ReviewParseError,
  UnknownPairId,
  // evaluation
  DatasetError,
  InvalidJudgment,
  EmptySelection,
  MissingMode,
  NoFailures,
  // misc
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Pipeline stage a failure is attributed to. Empty when not stage-specific.
enum class Stage { None, Retrieval, Linking, Kg, Prompt, Llm };

std::string_view to_string(Stage stage);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, Stage stage = Stage::None)
      : std::runtime_error(message), code_(code), stage_(stage) {}

  ErrorCode code() const noexcept { return code_; }
  Stage stage() const noexcept { return stage_; }

  /// Copy of this error re-attributed to `stage` (keeps an existing attribution).
  Error with_stage(Stage stage) const {
    return Error(code_, what(), stage_ == Stage::None ? stage : stage_);
  }

 private:
  ErrorCode code_;
  Stage stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              Stage stage = Stage::None) {
  throw Error(code, message, stage);
}

}  // namespace rbqa
