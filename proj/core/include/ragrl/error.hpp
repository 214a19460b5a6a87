// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ragrl {

enum class ErrorKind {
  UnterminatedTag,
  BackendUnavailable,
  RetrievalUnavailable,
  DuplicateChunkId,
  EmptyCorpus,
  EmptyQuery,
  SummarizerUnavailable,
  SearchApiUnavailable,
  MissingGold,
  GroupTooSmall,
  SpanGap,
  IoFailure,
  OutOfRange,
  EmptyBucket,
  JudgeProtocolError,
  ConfigInvalid,
  SchemaMismatch,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// All recoverable failures raised by the library carry an ErrorKind so that
/// callers can branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Transport-level failures that a caller may retry.
  bool retriable() const noexcept {
    return kind_ == ErrorKind::BackendUnavailable || kind_ == ErrorKind::RetrievalUnavailable ||
           kind_ == ErrorKind::SummarizerUnavailable || kind_ == ErrorKind::SearchApiUnavailable;
  }

 private:
  ErrorKind kind_;
};

}  // namespace ragrl
