// SPDX-License-Identifier: Apache-2.0
#include "ragrl/evalkit.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ragrl/curriculum.hpp"
#include "ragrl/error.hpp"
#include "ragrl/parallel.hpp"
#include "ragrl/prompts.hpp"
#include "ragrl/rewards.hpp"
#include "ragrl/text.hpp"

namespace ragrl::evalkit {

double exact_match(std::string_view pred, std::string_view gold, TaskFamily family) {
  if (text::trim(gold).empty()) return 0.0;
  return rewards::match_answer(std::string(pred), gold, family) ? 1.0 : 0.0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  auto p = text::qa_tokens(pred);
  auto g = text::qa_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : g) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::PartiallyCorrect: return "partially_correct";
    case Verdict::Incorrect: return "incorrect";
  }
  return "?";
}

namespace {

std::string_view strip_decoration(std::string_view s) {
  s = text::trim(s);
  auto junk = [](char c) { return c == '"' || c == '\'' || c == '*' || c == '`' || c == '.'; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return text::trim(s);
}

}  // namespace

std::optional<Verdict> parse_math_verdict(std::string_view response) {
  static constexpr std::string_view kLabel = "judgment:";
  const auto lower = text::to_lower(response);
  auto pos = lower.rfind(kLabel);
  if (pos == std::string::npos) return std::nullopt;
  auto rest = std::string_view(lower).substr(pos + kLabel.size());
  rest = rest.substr(0, rest.find('\n'));
  auto value = strip_decoration(rest);
  if (value == "correct") return Verdict::Correct;
  if (value == "partially correct") return Verdict::PartiallyCorrect;
  if (value == "incorrect") return Verdict::Incorrect;
  return std::nullopt;
}

std::optional<Verdict> parse_qa_verdict(std::string_view response) {
  auto value = text::to_lower(strip_decoration(response));
  if (value == "true") return Verdict::Correct;
  if (value == "false") return Verdict::Incorrect;
  return std::nullopt;
}

double verdict_score(Verdict v) {
  switch (v) {
    case Verdict::Correct: return 1.0;
    case Verdict::PartiallyCorrect: return 0.5;
    case Verdict::Incorrect: return 0.0;
  }
  return 0.0;
}

std::string build_judge_prompt(JudgeKind kind, std::string_view question, std::string_view gold,
                               std::string_view pred) {
  if (kind == JudgeKind::Math) {
    return text::fill_template(prompts::math_judge_template(), {{"question", std::string(question)},
                                                               {"gold", std::string(gold)},
                                                               {"pred", std::string(pred)}});
  }
  return text::fill_template(prompts::qa_judge_template(), {{"question", std::string(question)},
                                                            {"gold_answer", std::string(gold)},
                                                            {"predicted_answer", std::string(pred)}});
}

Judge::Judge(std::shared_ptr<gateway::Backend> backend, JudgeOptions options)
    : backend_(std::move(backend)), options_(options) {
  if (!backend_) throw Error(ErrorKind::InvalidArgument, "judge needs a backend");
  if (options_.max_attempts < 1) throw Error(ErrorKind::InvalidArgument, "judge needs >= 1 attempt");
}

Verdict Judge::judge(std::string_view pred, std::string_view gold, std::string_view question,
                     JudgeKind kind) const {
  gateway::GenerationRequest req;
  req.context = build_judge_prompt(kind, question, gold, pred);
  req.max_new_tokens = options_.max_new_tokens;
  req.temperature = options_.sampling.temperature;
  req.top_p = options_.sampling.top_p;
  std::string last;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    req.seed = options_.seed + attempt;
    req.correlation_id = "judge#" + std::to_string(attempt);
    last = backend_->generate(req).text;
    auto v = kind == JudgeKind::Math ? parse_math_verdict(last) : parse_qa_verdict(last);
    if (v) return *v;
  }
  throw Error(ErrorKind::JudgeProtocolError, "no verdict after " + std::to_string(options_.max_attempts) +
                                                 " attempts; last reply: " + last.substr(0, 200));
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Em: return "em";
    case Metric::F1: return "f1";
    case Metric::Judge: return "judge";
  }
  return "?";
}

std::set<Metric> parse_metrics(std::string_view s) {
  std::set<Metric> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    auto name = text::to_lower(text::trim(s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos)));
    if (name == "em") out.insert(Metric::Em);
    else if (name == "f1") out.insert(Metric::F1);
    else if (name == "judge") out.insert(Metric::Judge);
    else if (!name.empty()) throw Error(ErrorKind::InvalidArgument, "unknown metric '" + name + "'");
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no metrics requested");
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json j = {{"question_id", it.question_id},
                        {"task_family", std::string(to_string(it.task_family))},
                        {"prediction", it.prediction ? nlohmann::json(*it.prediction) : nlohmann::json(nullptr)},
                        {"gold", it.gold},
                        {"metrics", it.metrics}};
    if (it.verdict) j["verdict"] = std::string(to_string(*it.verdict));
    if (!it.error.empty()) j["error"] = it.error;
    items.push_back(std::move(j));
  }
  return {{"benchmark_id", r.benchmark_id},
          {"mode", std::string(to_string(r.mode))},
          {"seed", r.seed},
          {"n_samples", r.n_samples},
          {"metrics", r.metrics},
          {"complete", r.complete},
          {"items", std::move(items)}};
}

std::vector<std::size_t> sample_indices(std::size_t n_items, std::size_t sample_n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n_items);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (sample_n >= n_items) return idx;
  curriculum::Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(sample_n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

EvalReport evaluate_benchmark(const std::vector<Question>& items, const EvalOptions& options,
                              const rollout::RolloutRunner& runner, const Judge* judge) {
  if (options.metrics.count(Metric::Judge) && !judge)
    throw Error(ErrorKind::InvalidArgument, "judge metric requested without a judge backend");
  EvalReport report;
  report.benchmark_id = options.benchmark_id;
  report.mode = options.mode;
  report.seed = options.seed;
  const auto chosen = sample_indices(items.size(), options.sample_n, options.seed);
  report.n_samples = chosen.size();
  report.items.resize(chosen.size());

  parallel_for(chosen.size(), runner.options().workers, [&](std::size_t n) {
    const auto& q = items[chosen[n]];
    auto& res = report.items[n];
    res.question_id = q.question_id;
    res.task_family = q.task_family;
    res.gold = q.gold;
    try {
      auto prompt = prompts::build_task_prompt(q.task_family, options.mode, q.question_text);
      auto t = runner.run_rollout(prompt, q.task_family, options.mode,
                                  rollout::RolloutBudget::for_family(q.task_family),
                                  static_cast<std::int64_t>(options.seed + n), "eval/" + q.question_id);
      res.prediction = extract_answer(t);
      const std::string pred = res.prediction.value_or("");
      if (options.metrics.count(Metric::Em))
        res.metrics["em"] = exact_match(pred, q.gold, q.task_family);
      if (options.metrics.count(Metric::F1)) res.metrics["f1"] = token_f1(pred, q.gold);
      if (options.metrics.count(Metric::Judge)) {
        auto kind = q.task_family == TaskFamily::Math ? JudgeKind::Math : JudgeKind::Qa;
        res.verdict = res.prediction ? judge->judge(pred, q.gold, q.question_text, kind)
                                     : Verdict::Incorrect;
        res.metrics["judge"] = verdict_score(*res.verdict);
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });

  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& res : report.items) {
    if (!res.error.empty()) report.complete = false;
    for (const auto& [name, v] : res.metrics) {
      sums[name].first += v;
      sums[name].second += 1;
    }
  }
  for (const auto& [name, s] : sums) report.metrics[name] = s.first / static_cast<double>(s.second);
  return report;
}

}  // namespace ragrl::evalkit
