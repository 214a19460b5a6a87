// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "ragrl/curriculum.hpp"
#include "ragrl/error.hpp"
#include "ragrl/gateway.hpp"
#include "testkit.hpp"

using namespace ragrl;
using namespace ragrl::curriculum;

namespace {

CurriculumItem item(std::string id, double s, TaskFamily f = TaskFamily::Math) {
  CurriculumItem it;
  it.question = {std::move(id), "text", "1", f};
  it.score_s = s;
  it.bucket = bucket(s);
  return it;
}

/// `n` items per bucket with distinct ids.
std::vector<CurriculumItem> pool(std::size_t hard, std::size_t medium, std::size_t easy,
                                 std::size_t filtered = 0) {
  std::vector<CurriculumItem> out;
  for (std::size_t i = 0; i < hard; ++i) out.push_back(item("h" + std::to_string(i), 0.3));
  for (std::size_t i = 0; i < medium; ++i) out.push_back(item("m" + std::to_string(i), 0.6));
  for (std::size_t i = 0; i < easy; ++i) out.push_back(item("e" + std::to_string(i), 0.9));
  for (std::size_t i = 0; i < filtered; ++i) out.push_back(item("f" + std::to_string(i), 0.05));
  return out;
}

std::map<Bucket, std::size_t> counts(const std::vector<CurriculumItem>& items) {
  std::map<Bucket, std::size_t> out;
  for (const auto& it : items) ++out[bucket(it.score_s)];
  return out;
}

}  // namespace

TEST(Bucket, Boundaries) {
  EXPECT_EQ(bucket(1.0), Bucket::Easy);
  EXPECT_EQ(bucket(0.8), Bucket::Easy);
  EXPECT_EQ(bucket(std::nextafter(0.8, 0.0)), Bucket::Medium);
  EXPECT_EQ(bucket(0.5), Bucket::Medium);
  EXPECT_EQ(bucket(std::nextafter(0.5, 0.0)), Bucket::Hard);
  EXPECT_EQ(bucket(0.2), Bucket::Hard);
  EXPECT_EQ(bucket(std::nextafter(0.2, 0.0)), Bucket::Filtered);
  EXPECT_EQ(bucket(0.0), Bucket::Filtered);
  for (double bad : {-0.01, 1.01, std::numeric_limits<double>::quiet_NaN()}) {
    try {
      bucket(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
    }
  }
  // k/20 scores land where integer arithmetic says they should.
  for (int k = 0; k <= 20; ++k) {
    Bucket want = k >= 16 ? Bucket::Easy : k >= 10 ? Bucket::Medium : k >= 4 ? Bucket::Hard : Bucket::Filtered;
    EXPECT_EQ(bucket(k / 20.0), want) << k;
  }
}

TEST(Quotas, SevenTwoOne) {
  EXPECT_EQ(Quotas::for_n(1000), (Quotas{700, 200, 100}));
  EXPECT_EQ(Quotas::for_n(10), (Quotas{7, 2, 1}));
  EXPECT_EQ(Quotas::for_n(3000), (Quotas{2100, 600, 300}));
  for (std::size_t n = 0; n < 200; ++n) {
    auto q = Quotas::for_n(n);
    ASSERT_EQ(q.hard + q.medium + q.easy, n);
    ASSERT_EQ(q.hard, n * 7 / 10);
    ASSERT_EQ(q.medium, n * 2 / 10);
  }
}

TEST(Sample, ExactQuotasWithoutReplacement) {
  auto p = pool(800, 300, 200, 50);
  SampleReport rep;
  auto s = sample_epoch(p, 1000, 5, &rep);
  ASSERT_EQ(s.size(), 1000u);
  auto c = counts(s);
  EXPECT_EQ(c[Bucket::Hard], 700u);
  EXPECT_EQ(c[Bucket::Medium], 200u);
  EXPECT_EQ(c[Bucket::Easy], 100u);
  EXPECT_EQ(c[Bucket::Filtered], 0u);
  EXPECT_EQ(rep.with_replacement, (Quotas{0, 0, 0}));
  std::set<std::string> ids;
  for (const auto& it : s) ids.insert(it.question.question_id);
  EXPECT_EQ(ids.size(), 1000u);
}

TEST(Sample, SmallBucketTopsUpWithReplacement) {
  auto p = pool(3, 5, 5);
  SampleReport rep;
  auto s = sample_epoch(p, 10, 1, &rep);
  auto c = counts(s);
  EXPECT_EQ(c[Bucket::Hard], 7u);
  EXPECT_EQ(rep.with_replacement.hard, 4u);
  EXPECT_EQ(rep.with_replacement.medium, 0u);
}

TEST(Sample, DeterministicPerSeed) {
  auto p = pool(50, 20, 20);
  auto a = sample_epoch(p, 40, 9);
  auto b = sample_epoch(p, 40, 9);
  auto c = sample_epoch(p, 40, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Sample, EmptyBucket) {
  try {
    sample_epoch(pool(10, 0, 5), 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyBucket);
  }
  // A bucket whose quota is zero may be empty.
  EXPECT_EQ(sample_epoch(pool(0, 0, 5), 1, 0).size(), 1u);
}

TEST(Rng, BelowIsUniformEnough) {
  Rng rng(3);
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[rng.below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
  // Fixed algorithm: the stream is pinned.
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.below(1000), b.below(1000));
}

TEST(Mixing, McqSplitPrefersHard) {
  std::vector<CurriculumItem> items;
  for (int i = 0; i < 600; ++i) items.push_back(item("h" + std::to_string(i), 0.3, TaskFamily::Mcq));
  for (int i = 0; i < 400; ++i) items.push_back(item("o" + std::to_string(i), 0.9, TaskFamily::Mcq));
  auto policy = MixingPolicy::solve(items, 4);
  EXPECT_EQ(policy.mcq_retrieval_ids.size(), 500u);
  for (const auto& id : policy.mcq_retrieval_ids) EXPECT_EQ(id[0], 'h');
  EXPECT_NEAR(policy.mcq_hard_probability, 500.0 / 600.0, 1e-12);
  apply_mixing(items, 4);
  std::size_t retrieval = 0;
  for (const auto& it : items) retrieval += it.prompt_mode == PromptMode::Retrieval;
  EXPECT_EQ(retrieval, 500u);
}

TEST(Mixing, FewHardItemsBorrowFromRest) {
  std::vector<CurriculumItem> items;
  for (int i = 0; i < 100; ++i) items.push_back(item("h" + std::to_string(i), 0.3, TaskFamily::Mcq));
  for (int i = 0; i < 300; ++i) items.push_back(item("o" + std::to_string(i), 0.6, TaskFamily::Mcq));
  auto policy = MixingPolicy::solve(items, 8);
  EXPECT_EQ(policy.mcq_retrieval_ids.size(), 200u);
  std::size_t hard = 0;
  for (const auto& id : policy.mcq_retrieval_ids) hard += id[0] == 'h';
  EXPECT_EQ(hard, 100u);
  EXPECT_EQ(policy.mcq_hard_probability, 1.0);
}

TEST(Mixing, FamilyRules) {
  MixingPolicy none;
  EXPECT_EQ(assign_mode(item("a", 0.3, TaskFamily::Math), none), PromptMode::Retrieval);
  EXPECT_EQ(assign_mode(item("b", 0.6, TaskFamily::Math), none), PromptMode::Direct);
  EXPECT_EQ(assign_mode(item("c", 0.9, TaskFamily::Math), none), PromptMode::Direct);
  EXPECT_EQ(assign_mode(item("d", 0.9, TaskFamily::OpenQa), none), PromptMode::Retrieval);
  EXPECT_EQ(assign_mode(item("e", 0.3, TaskFamily::Mcq), none), PromptMode::Direct);
  none.mcq_retrieval_ids.insert("e");
  EXPECT_EQ(assign_mode(item("e", 0.3, TaskFamily::Mcq), none), PromptMode::Retrieval);
}

TEST(Difficulty, FractionCorrectOverDirectRollouts) {
  auto backend = std::make_shared<gateway::ScriptedBackend>();
  // Seeds 0..19: residues 0 and 1 of 5 are correct, so 8 of 20.
  backend->add_rule({"seven", {"\\boxed{7}", "so \\boxed{ 7 }", "\\boxed{8}", "none", "\\boxed{71}"}});
  backend->add_rule({"easy one", {"\\boxed{1}"}});
  rollout::RolloutRunner runner(backend, nullptr);
  Question q{"q", "what is seven", "7", TaskFamily::Math};
  EXPECT_DOUBLE_EQ(estimate_difficulty(q, 20, runner, 0), 0.4);

  std::vector<Question> qs = {q, {"e", "an easy one", "1", TaskFamily::Math}};
  auto items = score_questions(qs, 20, runner, 0);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_DOUBLE_EQ(items[0].score_s, 0.4);
  EXPECT_EQ(items[0].bucket, Bucket::Hard);
  EXPECT_EQ(items[1].bucket, Bucket::Easy);

  auto back = item_from_json(to_json(items[0]));
  EXPECT_EQ(back, items[0]);
}
