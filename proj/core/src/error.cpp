// SPDX-License-Identifier: Apache-2.0
#include "ragrl/error.hpp"

namespace ragrl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnterminatedTag: return "UnterminatedTag";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::RetrievalUnavailable: return "RetrievalUnavailable";
    case ErrorKind::DuplicateChunkId: return "DuplicateChunkId";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::EmptyQuery: return "EmptyQuery";
    case ErrorKind::SummarizerUnavailable: return "SummarizerUnavailable";
    case ErrorKind::SearchApiUnavailable: return "SearchApiUnavailable";
    case ErrorKind::MissingGold: return "MissingGold";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::SpanGap: return "SpanGap";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::EmptyBucket: return "EmptyBucket";
    case ErrorKind::JudgeProtocolError: return "JudgeProtocolError";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ragrl
