#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streamweave {

enum class ErrorCode {
  ZeroVector,
  DimensionMismatch,
  EmptyInput,
  NonFiniteInput,
  EmptyRelevantSet,
  IndexOutOfRange,
  NonMonotonicTimestamp,
  ParseError,
  SchemaError,
  ValidationError,
  InvalidSpec,
  SinkClosed,
  NonConsecutiveClip,
  QuestionAlreadyActive,
  NoActiveQuestion,
  NonMonotonicAnswer,
  MalformedSequence,
  EmptyDataset,
  EmptyClipSet,
  InvalidPolicy,
  BackendUnavailable,
  MalformedResponse,
  IncompleteTimeline,
  InvalidConfig,
  IllegalTransition,
  NotFound,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error kind. Every module throws
/// this type; callers branch on code() rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace streamweave
