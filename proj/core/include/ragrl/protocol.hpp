// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ragrl {

enum class TaskFamily { Math, OpenQa, Mcq };
enum class PromptMode { Retrieval, Direct };

std::string_view to_string(TaskFamily f);
std::string_view to_string(PromptMode m);
TaskFamily parse_task_family(std::string_view s);
PromptMode parse_prompt_mode(std::string_view s);

namespace protocol {

inline constexpr std::string_view kBeginQuery = "<|begin_of_query|>";
inline constexpr std::string_view kEndQuery = "<|end_of_query|>";
inline constexpr std::string_view kBeginDocs = "<|begin_of_documents|>";
inline constexpr std::string_view kEndDocs = "<|end_of_documents|>";

/// Substring that identifies a summarizer refusal.
inline constexpr std::string_view kFallbackMarker = "exceeds the capabilities of a search engine";

/// The refusal the summarizer is instructed to emit for reasoning-type queries.
inline constexpr std::string_view kFallbackResponse =
    "This query requires design, computation, or complex reasoning, which exceeds the "
    "capabilities of a search engine. Please input another query or proceed with direct "
    "reasoning.";

/// Visible sentence appended right after a documents block that carried a refusal.
inline constexpr std::string_view kFallbackNotice =
    "It seems that this query exceeds the capabilities of the retrieval system. We may consider "
    "rephrasing it into a more fact-based and searchable question that does not require complex "
    "reasoning, or proceed with direct reasoning based on prior knowledge.";

bool is_fallback_text(std::string_view s) noexcept;

/// Wraps a retrieval payload into a documents block.
std::string wrap_documents(std::string_view payload);

/// Removes every reserved delimiter from `s` so injected content cannot
/// change the segmentation of the transcript it is spliced into.
std::string strip_delimiters(std::string_view s);

}  // namespace protocol

struct Token {
  std::int64_t id = 0;
  std::string text;

  bool operator==(const Token&) const = default;
};

using TokenizeFn = std::function<std::vector<Token>(std::string_view)>;

/// Half-open range into the response token sequence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const TokenSpan&) const = default;
};

enum class SegmentKind { ModelText, Query, InjectedDocs, FallbackNotice };
std::string_view to_string(SegmentKind k);
SegmentKind parse_segment_kind(std::string_view s);

struct Segment {
  SegmentKind kind = SegmentKind::ModelText;
  /// Raw bytes, delimiters included.
  std::string text;
  TokenSpan token_span;
  /// False for unterminated tags, empty queries and queries with nested delimiters.
  bool well_formed = true;

  /// Text between the delimiters (Query / InjectedDocs), trimmed for queries.
  std::string_view body() const noexcept;

  bool operator==(const Segment&) const = default;
};

enum class ParseIssueKind { UnterminatedTag, EmptyQuery, NestedDelimiter, StrayDelimiter };
std::string_view to_string(ParseIssueKind k);

struct ParseIssue {
  ParseIssueKind kind;
  /// Byte offset into the response text.
  std::size_t offset = 0;

  bool operator==(const ParseIssue&) const = default;
};

/// One rollout: the prompt plus the typed segments of the trajectory.
/// prompt_text followed by every segment's text reproduces the transcript.
struct Transcript {
  std::string prompt_text;
  std::vector<Segment> segments;
  TaskFamily task_family = TaskFamily::Math;
  PromptMode prompt_mode = PromptMode::Retrieval;
  std::vector<ParseIssue> issues;
  std::vector<Token> prompt_tokens;
  std::vector<Token> response_tokens;
  /// Queries that got no injection because the retrieval service failed.
  int retrieval_failures = 0;

  std::string response_text() const;
  std::string full_text() const;
  std::size_t count(SegmentKind kind) const noexcept;
  /// Documents blocks that follow a well-formed query.
  std::size_t valid_query_count() const noexcept;

  bool operator==(const Transcript&) const = default;
};

/// Segments the model-side response. Never throws: unterminated tags are
/// emitted as segments, marked not well-formed and recorded in `issues`.
Transcript parse_transcript(std::string_view response, TaskFamily family,
                            PromptMode mode = PromptMode::Retrieval, std::string prompt = {});

/// Tokenizes the prompt and every segment separately and assigns contiguous
/// spans, so segment boundaries always fall on token boundaries.
void attach_tokens(Transcript& t, const TokenizeFn& tokenize);

enum class ViolationKind { MalformedTag, OverlongQuery, MissingRetrieval, IllegalToken, MissingFinalAnswer };
std::string_view to_string(ViolationKind k);

struct FormatLimits {
  std::size_t max_query_words = 20;
  /// Documents-block cap used by the rollout; exceeding it is not a violation.
  std::size_t max_queries = 4;

  static FormatLimits for_family(TaskFamily f);
};

struct FormatReport {
  std::vector<ViolationKind> violations;
  bool compliant = true;

  std::size_t count(ViolationKind k) const noexcept;
};

FormatReport validate_format(const Transcript& t, const FormatLimits& limits);

/// mcq: option letter of the last "the correct answer is: X"; math / open_qa:
/// content of the last brace-balanced \boxed{...}. Only model-written text is
/// searched.
std::optional<std::string> extract_answer(const Transcript& t);
std::optional<std::string> extract_answer_text(std::string_view model_text, TaskFamily family);

}  // namespace ragrl
