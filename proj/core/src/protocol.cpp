// SPDX-License-Identifier: Apache-2.0
#include "ragrl/protocol.hpp"

#include <array>
#include <cctype>

#include "ragrl/error.hpp"
#include "ragrl/text.hpp"

namespace ragrl {

std::string_view to_string(TaskFamily f) {
  switch (f) {
    case TaskFamily::Math: return "math";
    case TaskFamily::OpenQa: return "open_qa";
    case TaskFamily::Mcq: return "mcq";
  }
  return "?";
}

std::string_view to_string(PromptMode m) {
  return m == PromptMode::Retrieval ? "retrieval" : "direct";
}

TaskFamily parse_task_family(std::string_view s) {
  if (s == "math") return TaskFamily::Math;
  if (s == "open_qa" || s == "qa") return TaskFamily::OpenQa;
  if (s == "mcq") return TaskFamily::Mcq;
  throw Error(ErrorKind::InvalidArgument, "unknown task family '" + std::string(s) + "'");
}

PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "retrieval") return PromptMode::Retrieval;
  if (s == "direct") return PromptMode::Direct;
  throw Error(ErrorKind::InvalidArgument, "unknown prompt mode '" + std::string(s) + "'");
}

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::ModelText: return "model_text";
    case SegmentKind::Query: return "query";
    case SegmentKind::InjectedDocs: return "injected_docs";
    case SegmentKind::FallbackNotice: return "fallback_notice";
  }
  return "?";
}

SegmentKind parse_segment_kind(std::string_view s) {
  if (s == "model_text") return SegmentKind::ModelText;
  if (s == "query") return SegmentKind::Query;
  if (s == "injected_docs") return SegmentKind::InjectedDocs;
  if (s == "fallback_notice") return SegmentKind::FallbackNotice;
  throw Error(ErrorKind::SchemaMismatch, "unknown segment kind '" + std::string(s) + "'");
}

std::string_view to_string(ParseIssueKind k) {
  switch (k) {
    case ParseIssueKind::UnterminatedTag: return "unterminated_tag";
    case ParseIssueKind::EmptyQuery: return "empty_query";
    case ParseIssueKind::NestedDelimiter: return "nested_delimiter";
    case ParseIssueKind::StrayDelimiter: return "stray_delimiter";
  }
  return "?";
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MalformedTag: return "malformed_tag";
    case ViolationKind::OverlongQuery: return "overlong_query";
    case ViolationKind::MissingRetrieval: return "missing_retrieval";
    case ViolationKind::IllegalToken: return "illegal_token";
    case ViolationKind::MissingFinalAnswer: return "missing_final_answer";
  }
  return "?";
}

namespace protocol {

namespace {
constexpr std::array<std::string_view, 4> kDelimiters = {kBeginQuery, kEndQuery, kBeginDocs,
                                                         kEndDocs};

/// Earliest reserved delimiter at or after `from`.
std::pair<std::size_t, std::string_view> next_delimiter(std::string_view s, std::size_t from) {
  std::size_t best = std::string_view::npos;
  std::string_view which;
  for (auto d : kDelimiters) {
    auto p = s.find(d, from);
    if (p < best) {
      best = p;
      which = d;
    }
  }
  return {best, which};
}

bool contains_delimiter(std::string_view s) {
  return next_delimiter(s, 0).first != std::string_view::npos;
}
}  // namespace

bool is_fallback_text(std::string_view s) noexcept {
  return s.find(kFallbackMarker) != std::string_view::npos;
}

std::string wrap_documents(std::string_view payload) {
  std::string out;
  out.reserve(payload.size() + kBeginDocs.size() + kEndDocs.size() + 2);
  out += kBeginDocs;
  out += '\n';
  out += payload;
  out += '\n';
  out += kEndDocs;
  return out;
}

std::string strip_delimiters(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto [p, d] = next_delimiter(s, pos);
    if (p == std::string_view::npos) break;
    out.append(s.substr(pos, p - pos));
    pos = p + d.size();
  }
  out.append(s.substr(pos));
  return out;
}

}  // namespace protocol

std::string_view Segment::body() const noexcept {
  std::string_view t = text;
  switch (kind) {
    case SegmentKind::Query: {
      if (t.starts_with(protocol::kBeginQuery)) t.remove_prefix(protocol::kBeginQuery.size());
      if (t.ends_with(protocol::kEndQuery)) t.remove_suffix(protocol::kEndQuery.size());
      return text::trim(t);
    }
    case SegmentKind::InjectedDocs: {
      if (t.starts_with(protocol::kBeginDocs)) t.remove_prefix(protocol::kBeginDocs.size());
      if (t.ends_with(protocol::kEndDocs)) t.remove_suffix(protocol::kEndDocs.size());
      return t;
    }
    default: return t;
  }
}

std::string Transcript::response_text() const {
  std::string out;
  for (const auto& s : segments) out += s.text;
  return out;
}

std::string Transcript::full_text() const { return prompt_text + response_text(); }

std::size_t Transcript::count(SegmentKind kind) const noexcept {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.kind == kind ? 1 : 0;
  return n;
}

std::size_t Transcript::valid_query_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const auto& prev = segments[i - 1];
    const auto& cur = segments[i];
    if (cur.kind == SegmentKind::InjectedDocs && cur.well_formed &&
        prev.kind == SegmentKind::Query && prev.well_formed)
      ++n;
  }
  return n;
}

Transcript parse_transcript(std::string_view r, TaskFamily family, PromptMode mode,
                            std::string prompt) {
  using namespace protocol;
  Transcript t;
  t.prompt_text = std::move(prompt);
  t.task_family = family;
  t.prompt_mode = mode;

  std::size_t pos = 0;
  std::size_t model_start = 0;
  auto emit = [&](SegmentKind kind, std::size_t b, std::size_t e, bool ok = true) {
    if (e > b) t.segments.push_back(Segment{kind, std::string(r.substr(b, e - b)), {}, ok});
  };

  while (pos < r.size()) {
    auto [p, d] = next_delimiter(r, pos);
    if (p == std::string_view::npos) break;
    if (d != kBeginQuery) {
      t.issues.push_back({ParseIssueKind::StrayDelimiter, p});
      pos = p + d.size();
      continue;
    }
    emit(SegmentKind::ModelText, model_start, p);

    auto body_start = p + kBeginQuery.size();
    auto close = r.find(kEndQuery, body_start);
    if (close == std::string_view::npos) {
      t.issues.push_back({ParseIssueKind::UnterminatedTag, p});
      emit(SegmentKind::Query, p, r.size(), false);
      pos = model_start = r.size();
      break;
    }
    auto body = r.substr(body_start, close - body_start);
    bool ok = true;
    if (contains_delimiter(body)) {
      t.issues.push_back({ParseIssueKind::NestedDelimiter, p});
      ok = false;
    } else if (text::trim(body).empty()) {
      t.issues.push_back({ParseIssueKind::EmptyQuery, p});
      ok = false;
    }
    auto query_end = close + kEndQuery.size();
    emit(SegmentKind::Query, p, query_end, ok);
    pos = model_start = query_end;

    // A documents block counts as injected only when it starts exactly where
    // the query ends; anywhere else its delimiters are stray.
    if (r.substr(pos).starts_with(kBeginDocs)) {
      auto dclose = r.find(kEndDocs, pos + kBeginDocs.size());
      if (dclose == std::string_view::npos) {
        t.issues.push_back({ParseIssueKind::UnterminatedTag, pos});
        emit(SegmentKind::InjectedDocs, pos, r.size(), false);
        pos = model_start = r.size();
        break;
      }
      auto docs_end = dclose + kEndDocs.size();
      auto docs_body = r.substr(pos + kBeginDocs.size(), dclose - pos - kBeginDocs.size());
      emit(SegmentKind::InjectedDocs, pos, docs_end);
      pos = model_start = docs_end;
      if (is_fallback_text(docs_body) && r.substr(pos).starts_with(kFallbackNotice)) {
        emit(SegmentKind::FallbackNotice, pos, pos + kFallbackNotice.size());
        pos = model_start = pos + kFallbackNotice.size();
      }
    }
  }
  emit(SegmentKind::ModelText, model_start, r.size());
  return t;
}

void attach_tokens(Transcript& t, const TokenizeFn& tokenize) {
  t.prompt_tokens = tokenize(t.prompt_text);
  t.response_tokens.clear();
  for (auto& s : t.segments) {
    auto toks = tokenize(s.text);
    s.token_span.begin = t.response_tokens.size();
    for (auto& tok : toks) t.response_tokens.push_back(std::move(tok));
    s.token_span.end = t.response_tokens.size();
  }
}

FormatLimits FormatLimits::for_family(TaskFamily f) {
  FormatLimits l;
  l.max_queries = f == TaskFamily::OpenQa ? 5 : 4;
  return l;
}

std::size_t FormatReport::count(ViolationKind k) const noexcept {
  std::size_t n = 0;
  for (auto v : violations) n += v == k ? 1 : 0;
  return n;
}

FormatReport validate_format(const Transcript& t, const FormatLimits& limits) {
  FormatReport rep;
  bool any_query = false;
  for (const auto& s : t.segments) {
    if (s.kind == SegmentKind::Query) any_query = true;
    if (!s.well_formed) {
      rep.violations.push_back(ViolationKind::MalformedTag);
      continue;
    }
    if (s.kind == SegmentKind::Query && text::word_count(s.body()) > limits.max_query_words)
      rep.violations.push_back(ViolationKind::OverlongQuery);
  }
  for (const auto& issue : t.issues) {
    if (issue.kind == ParseIssueKind::StrayDelimiter)
      rep.violations.push_back(ViolationKind::IllegalToken);
  }
  if (t.prompt_mode == PromptMode::Retrieval && !any_query)
    rep.violations.push_back(ViolationKind::MissingRetrieval);
  if (!extract_answer(t)) rep.violations.push_back(ViolationKind::MissingFinalAnswer);
  rep.compliant = rep.violations.empty();
  return rep;
}

namespace {

std::optional<std::string> last_mcq_letter(std::string_view s) {
  static constexpr std::string_view kPattern = "the correct answer is";
  const std::string lower = text::to_lower(s);
  std::optional<std::string> found;
  std::size_t from = 0;
  while (true) {
    auto p = lower.find(kPattern, from);
    if (p == std::string::npos) break;
    from = p + 1;
    std::size_t i = p + kPattern.size();
    while (i < s.size() && (text::is_space(s[i]) || s[i] == ':' || s[i] == '*' || s[i] == '('))
      ++i;
    if (i >= s.size() || !std::isalpha(static_cast<unsigned char>(s[i]))) continue;
    if (i + 1 < s.size() && std::isalpha(static_cast<unsigned char>(s[i + 1]))) continue;
    found = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(s[i]))));
  }
  return found;
}

std::optional<std::string> last_boxed(std::string_view s) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  std::optional<std::string> found;
  std::size_t from = 0;
  while (true) {
    auto p = s.find(kBoxed, from);
    if (p == std::string_view::npos) break;
    from = p + 1;
    std::size_t start = p + kBoxed.size();
    int depth = 1;
    std::size_t i = start;
    for (; i < s.size(); ++i) {
      if (s[i] == '{') ++depth;
      else if (s[i] == '}' && --depth == 0) break;
    }
    if (depth == 0) found = std::string(s.substr(start, i - start));
  }
  return found;
}

}  // namespace

std::optional<std::string> extract_answer_text(std::string_view model_text, TaskFamily family) {
  return family == TaskFamily::Mcq ? last_mcq_letter(model_text) : last_boxed(model_text);
}

std::optional<std::string> extract_answer(const Transcript& t) {
  std::string model_text;
  for (const auto& s : t.segments) {
    if (s.kind != SegmentKind::ModelText) continue;
    if (!model_text.empty()) model_text += '\n';
    model_text += s.text;
  }
  return extract_answer_text(model_text, t.task_family);
}

}  // namespace ragrl
