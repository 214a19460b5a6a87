// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/protocol.hpp"
#include "ragrl/question.hpp"
#include "ragrl/rollout.hpp"

namespace ragrl::curriculum {

enum class Bucket { Easy, Medium, Hard, Filtered };
std::string_view to_string(Bucket b);
Bucket parse_bucket(std::string_view s);

/// Easy [0.8, 1], Medium [0.5, 0.8), Hard [0.2, 0.5), Filtered [0, 0.2).
/// Throws OutOfRange for anything outside [0, 1], NaN included.
Bucket bucket(double s);

struct CurriculumItem {
  Question question;
  double score_s = 0.0;
  Bucket bucket = Bucket::Filtered;
  PromptMode prompt_mode = PromptMode::Retrieval;

  bool operator==(const CurriculumItem&) const = default;
};

nlohmann::json to_json(const CurriculumItem& item);
CurriculumItem item_from_json(const nlohmann::json& j);

/// Seeded generator with a fixed algorithm, so samples are identical across
/// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// s = correct / n_rollouts over direct-mode rollouts graded with the strict
/// answer matcher. Rollout i uses seed + i.
double estimate_difficulty(const Question& q, std::size_t n_rollouts,
                           const rollout::RolloutRunner& runner, std::int64_t seed = 0);

/// Scores every question (all rollouts share the runner's worker pool) and
/// buckets the results. Question j uses seeds seed + j * n_rollouts + i.
std::vector<CurriculumItem> score_questions(const std::vector<Question>& questions,
                                            std::size_t n_rollouts,
                                            const rollout::RolloutRunner& runner,
                                            std::int64_t seed = 0);

struct Quotas {
  std::size_t hard = 0;
  std::size_t medium = 0;
  std::size_t easy = 0;

  /// floor(0.7 n) hard, floor(0.2 n) medium, the rest easy.
  static Quotas for_n(std::size_t n);
  bool operator==(const Quotas&) const = default;
};

struct SampleReport {
  Quotas quotas;
  /// Draws made with replacement because the bucket ran out.
  Quotas with_replacement;
};

/// Draws the 7:2:1 mix without replacement inside each bucket, topping up
/// with replacement only when a bucket is smaller than its quota, then
/// shuffles the combined list. Filtered items are never drawn. Throws
/// EmptyBucket when a bucket with a nonzero quota has no members.
std::vector<CurriculumItem> sample_epoch(const std::vector<CurriculumItem>& pool, std::size_t n,
                                         std::uint64_t seed, SampleReport* report = nullptr);

/// Retrieval/direct assignment. Math uses retrieval only for Hard items,
/// open-domain QA always retrieves, and mcq items are split 1:1: a seeded
/// shuffle picks half of the mcq items for retrieval, drawing from Hard items
/// first and from the rest only when there are too few Hard ones.
struct MixingPolicy {
  std::set<std::string> mcq_retrieval_ids;
  /// Share of Hard mcq items sent to retrieval.
  double mcq_hard_probability = 1.0;

  static MixingPolicy solve(const std::vector<CurriculumItem>& pool, std::uint64_t seed);
};

PromptMode assign_mode(const CurriculumItem& item, const MixingPolicy& policy);

/// solve() then assign_mode() for every item.
void apply_mixing(std::vector<CurriculumItem>& items, std::uint64_t seed);

}  // namespace ragrl::curriculum
