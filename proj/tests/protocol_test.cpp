// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "ragrl/gateway.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/protocol.hpp"
#include "ragrl/rollout.hpp"
#include "testkit.hpp"

using namespace ragrl;
using namespace ragrl::protocol;

namespace {

std::vector<SegmentKind> kinds(const Transcript& t) {
  std::vector<SegmentKind> out;
  for (const auto& s : t.segments) out.push_back(s.kind);
  return out;
}

}  // namespace

TEST(Parse, SingleQueryBody) {
  auto t = parse_transcript("<|begin_of_query|> capital of France <|end_of_query|>", TaskFamily::OpenQa);
  ASSERT_EQ(t.segments.size(), 1u);
  EXPECT_EQ(t.segments[0].kind, SegmentKind::Query);
  EXPECT_EQ(t.segments[0].body(), "capital of France");
  EXPECT_TRUE(t.segments[0].well_formed);
}

TEST(Parse, NoTagsIsOneModelTextSegment) {
  auto t = parse_transcript("just thinking \\boxed{3}", TaskFamily::Math);
  ASSERT_EQ(t.segments.size(), 1u);
  EXPECT_EQ(t.segments[0].kind, SegmentKind::ModelText);
  EXPECT_TRUE(parse_transcript("", TaskFamily::Math).segments.empty());
}

TEST(Parse, QueryDocsText) {
  std::string r = "Think. " + testkit::query_with_docs("x", "Doc 1 (Title: T) body") + " more";
  auto t = parse_transcript(r, TaskFamily::Math);
  std::vector<SegmentKind> want = {SegmentKind::ModelText, SegmentKind::Query, SegmentKind::InjectedDocs,
                                   SegmentKind::ModelText};
  EXPECT_EQ(kinds(t), want);
  EXPECT_EQ(t.response_text(), r);
  EXPECT_EQ(t.valid_query_count(), 1u);
  EXPECT_EQ(t.segments[2].body(), "\nDoc 1 (Title: T) body\n");
}

TEST(Parse, FallbackNoticeOnlyAfterRefusal) {
  std::string refused = testkit::query_with_docs("compute it", std::string(kFallbackResponse)) +
                        std::string(kFallbackNotice) + " ok";
  auto t = parse_transcript(refused, TaskFamily::Math);
  ASSERT_EQ(t.count(SegmentKind::FallbackNotice), 1u);
  EXPECT_EQ(t.segments[2].text, kFallbackNotice);

  // The same sentence after an ordinary documents block is model text.
  std::string plain = testkit::query_with_docs("fact", "facts") + std::string(kFallbackNotice);
  EXPECT_EQ(parse_transcript(plain, TaskFamily::Math).count(SegmentKind::FallbackNotice), 0u);
}

TEST(Parse, UnterminatedQueryIsRecordedNotThrown) {
  auto t = parse_transcript("a <|begin_of_query|> who", TaskFamily::OpenQa);
  ASSERT_EQ(t.segments.size(), 2u);
  EXPECT_FALSE(t.segments[1].well_formed);
  ASSERT_EQ(t.issues.size(), 1u);
  EXPECT_EQ(t.issues[0].kind, ParseIssueKind::UnterminatedTag);
  EXPECT_EQ(t.issues[0].offset, 2u);
}

TEST(Parse, DocsNotAdjacentToQueryAreStray) {
  std::string r = "<|begin_of_query|> q <|end_of_query|> <|begin_of_documents|>x<|end_of_documents|>";
  auto t = parse_transcript(r, TaskFamily::Math);
  EXPECT_EQ(t.count(SegmentKind::InjectedDocs), 0u);
  EXPECT_EQ(t.issues.size(), 2u);
  EXPECT_EQ(t.response_text(), r);
}

TEST(Parse, StripDelimiters) {
  EXPECT_EQ(strip_delimiters("a<|begin_of_query|>b<|end_of_documents|>c"), "abc");
  EXPECT_EQ(strip_delimiters("<|begin_of_query<|end_of_query|>|>"), "<|begin_of_query|>");
}

TEST(Parse, FuzzedRoundTripIsByteExact) {
  testkit::Engine rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto family = static_cast<TaskFamily>(i % 3);
    const auto r = testkit::random_response(rng, family);
    auto t = parse_transcript(r, family, PromptMode::Retrieval, "P: ");
    ASSERT_EQ(t.response_text(), r);
    ASSERT_EQ(t.full_text(), "P: " + r);
    attach_tokens(t, gateway::whitespace_tokenize);
    auto back = rollout::transcript_from_json(nlohmann::json::parse(json_io::canonical_dump(rollout::to_json(t))));
    ASSERT_EQ(back.response_text(), r);
    ASSERT_EQ(back.segments, t.segments);
    ASSERT_EQ(back.response_tokens, t.response_tokens);
  }
}

TEST(Format, CompliantTwoQueries) {
  auto t = testkit::two_query_transcript();
  auto rep = validate_format(t, FormatLimits::for_family(t.task_family));
  EXPECT_TRUE(rep.compliant);
  EXPECT_EQ(t.valid_query_count(), 2u);
}

TEST(Format, OverlongQuery) {
  std::string q;
  for (int i = 0; i < 25; ++i) q += "word ";
  auto t = parse_transcript(testkit::query_with_docs(q, "d") + "\\boxed{1}", TaskFamily::Math);
  auto rep = validate_format(t, FormatLimits::for_family(TaskFamily::Math));
  ASSERT_EQ(rep.violations, std::vector<ViolationKind>{ViolationKind::OverlongQuery});
  EXPECT_FALSE(rep.compliant);
}

TEST(Format, MissingRetrieval) {
  auto t = parse_transcript("\\boxed{1}", TaskFamily::Math, PromptMode::Retrieval);
  EXPECT_EQ(validate_format(t, {}).violations, std::vector<ViolationKind>{ViolationKind::MissingRetrieval});
  auto d = parse_transcript("\\boxed{1}", TaskFamily::Math, PromptMode::Direct);
  EXPECT_TRUE(validate_format(d, {}).compliant);
}

// Expected labels in the fixture were assigned by hand from the format rules.
TEST(Format, HandLabeledCases) {
  auto cases = json_io::read_jsonl(testkit::fixture("violation_cases.jsonl"));
  ASSERT_EQ(cases.size(), 30u);
  for (const auto& c : cases) {
    const auto family = parse_task_family(c.at("task_family").get<std::string>());
    auto t = parse_transcript(c.at("response").get<std::string>(), family,
                              parse_prompt_mode(c.at("prompt_mode").get<std::string>()));
    auto rep = validate_format(t, FormatLimits::for_family(family));
    std::vector<std::string> got;
    for (auto v : rep.violations) got.emplace_back(to_string(v));
    auto want = c.at("expected").get<std::vector<std::string>>();
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want) << c.at("id");
    EXPECT_EQ(rep.compliant, want.empty()) << c.at("id");
  }
}

TEST(Extract, McqLastOccurrence) {
  EXPECT_EQ(extract_answer_text("...the correct answer is: C", TaskFamily::Mcq), "C");
  EXPECT_EQ(extract_answer_text("answer is: B ... the correct answer is: D", TaskFamily::Mcq), "D");
  EXPECT_EQ(extract_answer_text("The Correct Answer Is (b).", TaskFamily::Mcq), "B");
  EXPECT_EQ(extract_answer_text("the correct answer is: maybe", TaskFamily::Mcq), std::nullopt);
}

TEST(Extract, BoxedBalanced) {
  EXPECT_EQ(extract_answer_text("so \\boxed{1952}", TaskFamily::OpenQa), "1952");
  EXPECT_EQ(extract_answer_text("\\boxed{1} then \\boxed{\\frac{1}{2}}", TaskFamily::Math), "\\frac{1}{2}");
  EXPECT_EQ(extract_answer_text("\\boxed{2} then \\boxed{3", TaskFamily::Math), "2");
  EXPECT_EQ(extract_answer_text("none", TaskFamily::Math), std::nullopt);
}

TEST(Extract, IgnoresInjectedText) {
  auto t = parse_transcript(testkit::query_with_docs("q", "\\boxed{9}") + "done", TaskFamily::Math);
  EXPECT_EQ(extract_answer(t), std::nullopt);
}

TEST(Tokens, SpansTileResponse) {
  testkit::Engine rng(5);
  for (int i = 0; i < 200; ++i) {
    auto t = parse_transcript(testkit::random_response(rng, TaskFamily::OpenQa), TaskFamily::OpenQa);
    attach_tokens(t, gateway::whitespace_tokenize);
    std::size_t cursor = 0;
    for (const auto& s : t.segments) {
      ASSERT_EQ(s.token_span.begin, cursor);
      cursor = s.token_span.end;
    }
    ASSERT_EQ(cursor, t.response_tokens.size());
  }
}
