// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "ragrl/error.hpp"
#include "ragrl/rewards.hpp"
#include "testkit.hpp"

using namespace ragrl;
using namespace ragrl::rewards;

namespace {

Transcript parse(const std::string& r, TaskFamily f = TaskFamily::Math,
                 PromptMode m = PromptMode::Retrieval) {
  return parse_transcript(r, f, m);
}

std::string refused(std::string_view q) {
  return testkit::query_with_docs(q, protocol::kFallbackResponse) + std::string(protocol::kFallbackNotice);
}

}  // namespace

TEST(Stage1, CompliantTwoQueries) {
  auto t = testkit::two_query_transcript();
  auto b = score(t, "42", RewardConfig::make(Stage::One, Preset::Default7B));
  EXPECT_EQ(b.format, 1.0);
  EXPECT_EQ(b.retrieval, 4.0);
  EXPECT_EQ(b.answer, 0.0);
  EXPECT_EQ(b.total, 5.0);
}

TEST(Stage1, SingleQueryWithFallback) {
  auto t = parse(refused("compute the integral of x squared") + "\nSo \\boxed{1/3}");
  auto b = score(t, "", RewardConfig::make(Stage::One, Preset::Default7B));
  EXPECT_EQ(b.format, 1.0);
  EXPECT_EQ(b.retrieval, 3.0);
  EXPECT_EQ(b.fallback, 0.5);
  EXPECT_EQ(b.total, 3.5);
}

TEST(Stage1, OneViolationAndOneQuery) {
  // An answered query but no final answer.
  auto t = parse(testkit::query_with_docs("capital of France", "Doc 1 Paris") + " done.");
  auto b = score(t, "", RewardConfig::make(Stage::One, Preset::Default7B));
  EXPECT_EQ(b.format, -1.0);
  EXPECT_EQ(b.total, 2.0);
}

TEST(Stage1, ViolationsPenalizedPerOccurrence) {
  std::string longq;
  for (int i = 0; i < 21; ++i) longq += "w ";
  auto t = parse(testkit::query_with_docs(longq, "d") + " stray <|end_of_query|> no answer");
  auto b = score(t, "", RewardConfig::make(Stage::One, Preset::Default7B));
  // OverlongQuery, IllegalToken, MissingFinalAnswer; the overlong query is
  // still counted for the retrieval reward.
  EXPECT_EQ(b.format, -3.0);
  EXPECT_EQ(b.retrieval, 3.0);
  EXPECT_EQ(b.total, 0.0);
}

TEST(Stage1, PresetTableOnTwoQueryTranscript) {
  auto t = testkit::two_query_transcript();
  const std::pair<Preset, double> table[] = {
      {Preset::Default7B, 5.0}, {Preset::Small3B, 8.0}, {Preset::Llama8B, 4.0}, {Preset::McqWeak, 2.0}};
  for (auto [preset, want] : table) EXPECT_EQ(score(t, "", RewardConfig::make(Stage::One, preset)).total, want);
  const std::tuple<Preset, double, double> rr[] = {{Preset::Default7B, 3, 4},
                                                   {Preset::Small3B, 5, 7},
                                                   {Preset::Llama8B, 3, 3},
                                                   {Preset::McqWeak, 0.5, 1}};
  for (auto [preset, single, multi] : rr) {
    auto cfg = RewardConfig::make(Stage::One, preset);
    EXPECT_EQ(retrieval_reward(0, cfg), 0.0);
    EXPECT_EQ(retrieval_reward(1, cfg), single);
    EXPECT_EQ(retrieval_reward(2, cfg), multi);
    EXPECT_EQ(retrieval_reward(5, cfg), multi);
  }
}

TEST(Stage2, CorrectAndCompliant) {
  auto t = testkit::two_query_transcript(TaskFamily::Math, "42");
  auto b = score(t, "42", RewardConfig::make(Stage::Two, Preset::Default7B));
  EXPECT_EQ(b.answer, 2.0);
  EXPECT_EQ(b.format, 1.0);
  EXPECT_EQ(b.retrieval, 0.0);
  EXPECT_EQ(b.total, 3.0);
}

TEST(Stage2, WrongNonCompliantWithFallback) {
  auto t = parse(refused("compute a sum") + " no answer here");
  auto b = score(t, "7", RewardConfig::make(Stage::Two, Preset::Default7B));
  EXPECT_EQ(b.answer, 0.0);
  EXPECT_EQ(b.format, 0.0);
  EXPECT_EQ(b.total, -0.5);
}

TEST(Stage2, CorrectWithFallback) {
  auto t = parse(refused("compute a sum") + " \\boxed{7}");
  auto b = score(t, "7", RewardConfig::make(Stage::Two, Preset::Default7B));
  EXPECT_EQ(b.total, 2.5);
}

TEST(Stage2, MissingGold) {
  auto t = testkit::two_query_transcript();
  try {
    score(t, "  ", RewardConfig::make(Stage::Two, Preset::Default7B));
    FAIL() << "expected MissingGold";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingGold);
  }
  // Stage 1 never looks at the gold answer.
  EXPECT_NO_THROW(score(t, "", RewardConfig::make(Stage::One, Preset::Default7B)));
}

TEST(Stage2, McqWeakWarmWindow) {
  auto t = testkit::two_query_transcript(TaskFamily::Mcq, "B");
  auto cfg = RewardConfig::make(Stage::Two, Preset::McqWeak);
  EXPECT_EQ(cfg.warm_steps, 10u);
  EXPECT_EQ(score(t, "B", cfg, 0).total, 4.0);
  EXPECT_EQ(score(t, "B", cfg, 9).total, 4.0);
  EXPECT_EQ(score(t, "B", cfg, 10).total, 3.0);
  auto small = RewardConfig::make(Stage::Two, Preset::McqWeak, true);
  EXPECT_EQ(small.warm_steps, 15u);
  EXPECT_EQ(score(t, "B", small, 14).total, 4.0);
  EXPECT_EQ(score(t, "B", small, 15).total, 3.0);
}

TEST(Stage2, McqWeakSmallModelFlatPenalty) {
  // No retrieval call plus a stray delimiter: two violations, flat -1.
  auto t = parse("<|end_of_documents|> the correct answer is: B", TaskFamily::Mcq);
  auto small = RewardConfig::make(Stage::Two, Preset::McqWeak, true);
  auto b = score(t, "B", small, 20);
  EXPECT_EQ(b.format, -1.0);
  EXPECT_EQ(b.total, 1.0);
  // Without the small-model switch the same output just loses the bonus.
  EXPECT_EQ(score(t, "B", RewardConfig::make(Stage::Two, Preset::McqWeak), 20).total, 2.0);
  // The penalty only applies to missing retrieval.
  auto with_query = parse(testkit::query_with_docs("atp", "d") + " <|end_of_query|> the correct answer is: B",
                          TaskFamily::Mcq);
  EXPECT_EQ(score(with_query, "B", small, 20).format, 0.0);
}

TEST(MatchAnswer, Families) {
  using O = std::optional<std::string>;
  EXPECT_TRUE(match_answer(O("b"), "B", TaskFamily::Mcq));
  EXPECT_TRUE(match_answer(O("(C)"), "C", TaskFamily::Mcq));
  EXPECT_FALSE(match_answer(O("BC"), "B", TaskFamily::Mcq));
  EXPECT_TRUE(match_answer(O(" 1 889 "), "1889", TaskFamily::Math));
  EXPECT_TRUE(match_answer(O("{+540}"), "540", TaskFamily::Math));
  EXPECT_TRUE(match_answer(O("\\frac{1}{2}"), "\\frac{1}{2}", TaskFamily::Math));
  EXPECT_FALSE(match_answer(O("1/2"), "0.5", TaskFamily::Math));
  EXPECT_FALSE(match_answer(O("{1}{2}"), "1}{2", TaskFamily::Math));
  EXPECT_TRUE(match_answer(O("The Ninth Gate"), "ninth gate", TaskFamily::OpenQa));
  EXPECT_FALSE(match_answer(O("Polanski"), "Roman Polanski", TaskFamily::OpenQa));
  EXPECT_FALSE(match_answer(std::nullopt, "x", TaskFamily::OpenQa));
  EXPECT_FALSE(match_answer(O("  "), "", TaskFamily::Math));
  EXPECT_FALSE(match_answer(O("the"), "a", TaskFamily::OpenQa));
}

TEST(Config, ParseAndValidate) {
  EXPECT_EQ(parse_preset("small_3b"), Preset::Small3B);
  EXPECT_EQ(parse_preset("MCQWEAK"), Preset::McqWeak);
  EXPECT_EQ(parse_stage("two"), Stage::Two);
  EXPECT_THROW(parse_preset("huge"), Error);
  EXPECT_THROW(parse_stage("3"), Error);
  auto cfg = RewardConfig::make(Stage::One, Preset::Default7B);
  cfg.fallback_penalty = -0.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("reward.fallback_penalty"), std::string::npos);
  }
}

TEST(Property, TotalIsSumOfParts) {
  testkit::Engine rng(21);
  const Preset presets[] = {Preset::Default7B, Preset::Small3B, Preset::Llama8B, Preset::McqWeak};
  for (int i = 0; i < 500; ++i) {
    const auto family = static_cast<TaskFamily>(i % 3);
    auto t = parse(testkit::random_response(rng, family), family);
    for (auto stage : {Stage::One, Stage::Two}) {
      auto cfg = RewardConfig::make(stage, presets[i % 4], i % 2 == 0);
      auto b = score(t, family == TaskFamily::Mcq ? "C" : "x", cfg, static_cast<std::size_t>(i % 20));
      ASSERT_EQ(b.total, b.format + b.retrieval + b.answer - b.fallback);
      ASSERT_EQ(b.fallback, 0.5 * static_cast<double>(t.count(SegmentKind::FallbackNotice)));
      if (stage == Stage::One) ASSERT_EQ(b.answer, 0.0);
      auto rep = validate_format(t, FormatLimits::for_family(family));
      if (stage == Stage::One && !rep.compliant)
        ASSERT_EQ(b.format, -static_cast<double>(rep.violations.size()));
    }
  }
}
