// SPDX-License-Identifier: Apache-2.0
#include "ragrl/curriculum.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/parallel.hpp"
#include "ragrl/rewards.hpp"

namespace ragrl::curriculum {

std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::Easy: return "easy";
    case Bucket::Medium: return "medium";
    case Bucket::Hard: return "hard";
    case Bucket::Filtered: return "filtered";
  }
  return "?";
}

Bucket parse_bucket(std::string_view s) {
  if (s == "easy") return Bucket::Easy;
  if (s == "medium") return Bucket::Medium;
  if (s == "hard") return Bucket::Hard;
  if (s == "filtered") return Bucket::Filtered;
  throw Error(ErrorKind::SchemaMismatch, "unknown bucket '" + std::string(s) + "'");
}

Bucket bucket(double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw Error(ErrorKind::OutOfRange, "difficulty score " + std::to_string(s) + " is outside [0, 1]");
  if (s >= 0.8) return Bucket::Easy;
  if (s >= 0.5) return Bucket::Medium;
  if (s >= 0.2) return Bucket::Hard;
  return Bucket::Filtered;
}

nlohmann::json to_json(const CurriculumItem& item) {
  auto j = ragrl::to_json(item.question);
  j["score_s"] = item.score_s;
  j["bucket"] = std::string(to_string(item.bucket));
  j["prompt_mode"] = std::string(to_string(item.prompt_mode));
  return j;
}

CurriculumItem item_from_json(const nlohmann::json& j) {
  CurriculumItem item;
  item.question = question_from_json(j);
  try {
    item.score_s = j.at("score_s").get<double>();
    item.prompt_mode = parse_prompt_mode(j.value("prompt_mode", std::string("retrieval")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("curriculum record: ") + e.what());
  }
  item.bucket = bucket(item.score_s);
  if (j.contains("bucket") && parse_bucket(j.at("bucket").get<std::string>()) != item.bucket)
    throw Error(ErrorKind::SchemaMismatch, "bucket of " + item.question.question_id +
                                               " disagrees with its score");
  return item;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "Rng::below(0)");
  // Reject the low values that would bias the modulo.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % n;
  }
}

std::vector<CurriculumItem> score_questions(const std::vector<Question>& questions,
                                            std::size_t n_rollouts,
                                            const rollout::RolloutRunner& runner, std::int64_t seed) {
  if (n_rollouts == 0) throw Error(ErrorKind::InvalidArgument, "n_rollouts must be >= 1");
  std::vector<std::string> prompts;
  prompts.reserve(questions.size());
  for (const auto& q : questions)
    prompts.push_back(prompts::build_task_prompt(q.task_family, PromptMode::Direct, q.question_text));

  std::vector<std::uint8_t> correct(questions.size() * n_rollouts, 0);
  parallel_for(correct.size(), runner.options().workers, [&](std::size_t n) {
    const auto& q = questions[n / n_rollouts];
    auto t = runner.run_rollout(prompts[n / n_rollouts], q.task_family, PromptMode::Direct,
                                rollout::RolloutBudget::for_family(q.task_family),
                                seed + static_cast<std::int64_t>(n),
                                "score/" + q.question_id + "/" + std::to_string(n % n_rollouts));
    correct[n] = rewards::match_answer(extract_answer(t), q.gold, q.task_family) ? 1 : 0;
  });

  std::vector<CurriculumItem> out;
  out.reserve(questions.size());
  for (std::size_t j = 0; j < questions.size(); ++j) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n_rollouts; ++i) hits += correct[j * n_rollouts + i];
    CurriculumItem item;
    item.question = questions[j];
    item.score_s = static_cast<double>(hits) / static_cast<double>(n_rollouts);
    item.bucket = bucket(item.score_s);
    out.push_back(std::move(item));
  }
  return out;
}

double estimate_difficulty(const Question& q, std::size_t n_rollouts,
                           const rollout::RolloutRunner& runner, std::int64_t seed) {
  return score_questions({q}, n_rollouts, runner, seed).front().score_s;
}

Quotas Quotas::for_n(std::size_t n) {
  Quotas q;
  q.hard = n * 7 / 10;
  q.medium = n * 2 / 10;
  q.easy = n - q.hard - q.medium;
  return q;
}

std::vector<CurriculumItem> sample_epoch(const std::vector<CurriculumItem>& pool, std::size_t n,
                                         std::uint64_t seed, SampleReport* report) {
  std::vector<std::size_t> hard, medium, easy;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    switch (bucket(pool[i].score_s)) {
      case Bucket::Hard: hard.push_back(i); break;
      case Bucket::Medium: medium.push_back(i); break;
      case Bucket::Easy: easy.push_back(i); break;
      case Bucket::Filtered: break;
    }
  }

  const auto quotas = Quotas::for_n(n);
  Quotas replaced;
  Rng rng(seed);
  std::vector<CurriculumItem> out;
  out.reserve(n);
  auto draw = [&](std::vector<std::size_t>& members, std::size_t quota, std::size_t& extra,
                  const char* name) {
    if (quota == 0) return;
    if (members.empty())
      throw Error(ErrorKind::EmptyBucket, std::string(name) + " bucket is empty but its quota is " +
                                              std::to_string(quota));
    rng.shuffle(members);
    const auto take = std::min(quota, members.size());
    for (std::size_t i = 0; i < take; ++i) out.push_back(pool[members[i]]);
    for (std::size_t i = take; i < quota; ++i) {
      out.push_back(pool[members[rng.below(members.size())]]);
      ++extra;
    }
  };
  draw(hard, quotas.hard, replaced.hard, "hard");
  draw(medium, quotas.medium, replaced.medium, "medium");
  draw(easy, quotas.easy, replaced.easy, "easy");
  for (auto& item : out) item.bucket = bucket(item.score_s);
  rng.shuffle(out);
  if (report) *report = {quotas, replaced};
  return out;
}

MixingPolicy MixingPolicy::solve(const std::vector<CurriculumItem>& pool, std::uint64_t seed) {
  std::vector<std::string> hard, rest;
  for (const auto& item : pool) {
    if (item.question.task_family != TaskFamily::Mcq) continue;
    (bucket(item.score_s) == Bucket::Hard ? hard : rest).push_back(item.question.question_id);
  }
  MixingPolicy policy;
  const std::size_t target = (hard.size() + rest.size()) / 2;
  Rng rng(seed);
  rng.shuffle(hard);
  rng.shuffle(rest);
  const auto from_hard = std::min(target, hard.size());
  policy.mcq_retrieval_ids.insert(hard.begin(), hard.begin() + static_cast<std::ptrdiff_t>(from_hard));
  policy.mcq_retrieval_ids.insert(rest.begin(),
                                  rest.begin() + static_cast<std::ptrdiff_t>(target - from_hard));
  policy.mcq_hard_probability =
      hard.empty() ? 0.0 : static_cast<double>(from_hard) / static_cast<double>(hard.size());
  return policy;
}

PromptMode assign_mode(const CurriculumItem& item, const MixingPolicy& policy) {
  switch (item.question.task_family) {
    case TaskFamily::Math:
      return bucket(item.score_s) == Bucket::Hard ? PromptMode::Retrieval : PromptMode::Direct;
    case TaskFamily::OpenQa:
      return PromptMode::Retrieval;
    case TaskFamily::Mcq:
      return policy.mcq_retrieval_ids.count(item.question.question_id) ? PromptMode::Retrieval
                                                                       : PromptMode::Direct;
  }
  return PromptMode::Retrieval;
}

void apply_mixing(std::vector<CurriculumItem>& items, std::uint64_t seed) {
  auto policy = MixingPolicy::solve(items, seed);
  for (auto& item : items) item.prompt_mode = assign_mode(item, policy);
}

}  // namespace ragrl::curriculum
