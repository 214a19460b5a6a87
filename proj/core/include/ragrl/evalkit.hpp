// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/gateway.hpp"
#include "ragrl/question.hpp"
#include "ragrl/rollout.hpp"

namespace ragrl::evalkit {

/// 1 when the prediction matches under the answer matcher of `family`
/// (mcq letters by default), else 0.
double exact_match(std::string_view pred, std::string_view gold, TaskFamily family = TaskFamily::Mcq);

/// Multiset token F1 after QA normalization. Both empty -> 1, one empty -> 0.
double token_f1(std::string_view pred, std::string_view gold);

enum class JudgeKind { Math, Qa };
enum class Verdict { Correct, PartiallyCorrect, Incorrect };
std::string_view to_string(Verdict v);

/// Value of the last "Judgment:" line: Correct, Partially correct or Incorrect.
std::optional<Verdict> parse_math_verdict(std::string_view response);
/// Exactly True or False, ignoring case, surrounding whitespace, quotes and a final period.
std::optional<Verdict> parse_qa_verdict(std::string_view response);

/// Correct 1, PartiallyCorrect 0.5, Incorrect 0.
double verdict_score(Verdict v);

std::string build_judge_prompt(JudgeKind kind, std::string_view question, std::string_view gold,
                               std::string_view pred);

struct JudgeOptions {
  /// Total calls before giving up on an unparseable reply.
  int max_attempts = 2;
  std::size_t max_new_tokens = 512;
  gateway::SamplingParams sampling = gateway::SamplingParams::evaluation();
  std::int64_t seed = 0;
};

class Judge {
 public:
  explicit Judge(std::shared_ptr<gateway::Backend> backend, JudgeOptions options = {});

  /// Throws JudgeProtocolError when no attempt yields a parseable verdict.
  Verdict judge(std::string_view pred, std::string_view gold, std::string_view question,
                JudgeKind kind) const;

 private:
  std::shared_ptr<gateway::Backend> backend_;
  JudgeOptions options_;
};

enum class Metric { Em, F1, Judge };
std::string_view to_string(Metric m);
/// Comma separated list such as "em,f1,judge".
std::set<Metric> parse_metrics(std::string_view s);

struct ItemResult {
  std::string question_id;
  TaskFamily task_family = TaskFamily::OpenQa;
  std::optional<std::string> prediction;
  std::string gold;
  std::map<std::string, double> metrics;
  std::optional<Verdict> verdict;
  std::string error;
};

struct EvalReport {
  std::string benchmark_id;
  PromptMode mode = PromptMode::Retrieval;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  /// Mean of each metric over the items that produced it.
  std::map<std::string, double> metrics;
  std::vector<ItemResult> items;
  /// False when any item failed.
  bool complete = true;
};

nlohmann::json to_json(const EvalReport& r);

/// Sorted indices of a seeded uniform sample of min(sample_n, n_items) items.
std::vector<std::size_t> sample_indices(std::size_t n_items, std::size_t sample_n, std::uint64_t seed);

struct EvalOptions {
  std::string benchmark_id;
  PromptMode mode = PromptMode::Retrieval;
  std::set<Metric> metrics = {Metric::Em, Metric::F1};
  std::size_t sample_n = 500;
  std::uint64_t seed = 0;
};

/// One rollout per sampled item (seed + position in the sample); the runner
/// should carry evaluation sampling parameters. `judge` may be null when the
/// judge metric is not requested.
EvalReport evaluate_benchmark(const std::vector<Question>& items, const EvalOptions& options,
                              const rollout::RolloutRunner& runner, const Judge* judge = nullptr);

}  // namespace ragrl::evalkit
