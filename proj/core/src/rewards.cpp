// SPDX-License-Identifier: Apache-2.0
#include "ragrl/rewards.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/text.hpp"

namespace ragrl::rewards {

std::string_view to_string(Stage s) { return s == Stage::One ? "1" : "2"; }

Stage parse_stage(std::string_view s) {
  auto l = text::to_lower(text::trim(s));
  if (l == "1" || l == "one") return Stage::One;
  if (l == "2" || l == "two") return Stage::Two;
  throw Error(ErrorKind::InvalidArgument, "unknown stage '" + std::string(s) + "'");
}

std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::Default7B: return "Default7B";
    case Preset::Small3B: return "Small3B";
    case Preset::Llama8B: return "Llama8B";
    case Preset::McqWeak: return "McqWeak";
  }
  return "?";
}

Preset parse_preset(std::string_view s) {
  std::string key;
  for (char c : s)
    if (c != '_' && c != '-') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key == "default7b") return Preset::Default7B;
  if (key == "small3b") return Preset::Small3B;
  if (key == "llama8b") return Preset::Llama8B;
  if (key == "mcqweak") return Preset::McqWeak;
  throw Error(ErrorKind::InvalidArgument, "unknown reward preset '" + std::string(s) + "'");
}

RewardConfig RewardConfig::make(Stage stage, Preset preset, bool small_model) {
  RewardConfig c;
  c.stage = stage;
  c.preset = preset;
  switch (preset) {
    case Preset::Default7B: c.retrieval_reward_single = 3.0; c.retrieval_reward_multi = 4.0; break;
    case Preset::Small3B: c.retrieval_reward_single = 5.0; c.retrieval_reward_multi = 7.0; break;
    case Preset::Llama8B: c.retrieval_reward_single = 3.0; c.retrieval_reward_multi = 3.0; break;
    case Preset::McqWeak: c.retrieval_reward_single = 0.5; c.retrieval_reward_multi = 1.0; break;
  }
  if (preset == Preset::McqWeak && small_model) {
    c.warm_steps = 15;
    c.penalize_missing_retrieval = true;
  }
  return c;
}

void RewardConfig::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0)) throw Error(ErrorKind::ConfigInvalid, std::string("reward.") + name + " must be >= 0");
  };
  check(retrieval_reward_single, "retrieval_reward_single");
  check(retrieval_reward_multi, "retrieval_reward_multi");
  check(fallback_penalty, "fallback_penalty");
  check(answer_reward, "answer_reward");
  check(format_bonus, "format_bonus");
  check(format_violation_penalty, "format_violation_penalty");
  check(missing_retrieval_penalty, "missing_retrieval_penalty");
}

nlohmann::json to_json(const RewardBreakdown& b) {
  return {{"format", b.format}, {"retrieval", b.retrieval}, {"answer", b.answer},
          {"fallback", b.fallback}, {"total", b.total}};
}

namespace {

std::string normalize_math(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!text::is_space(c)) out += c;
  while (true) {
    if (!out.empty() && out.front() == '+') {
      out.erase(0, 1);
      continue;
    }
    if (out.size() >= 2 && out.front() == '{' && out.back() == '}') {
      // Only strip when the first brace closes at the very end.
      int depth = 0;
      std::size_t close = 0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == '{') ++depth;
        else if (out[i] == '}' && --depth == 0) {
          close = i;
          break;
        }
      }
      if (close == out.size() - 1) {
        out = out.substr(1, out.size() - 2);
        continue;
      }
    }
    break;
  }
  return out;
}

std::string mcq_letter(std::string_view s) {
  std::string out;
  for (char c : text::trim(s)) {
    if (c == '(' || c == ')' || c == '.' || text::is_space(c)) continue;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

double fallback_penalty(const Transcript& t, const RewardConfig& cfg) {
  return cfg.fallback_penalty * static_cast<double>(t.count(SegmentKind::FallbackNotice));
}

}  // namespace

bool match_answer(const std::optional<std::string>& extracted, std::string_view gold,
                  TaskFamily family) {
  if (!extracted || text::trim(*extracted).empty()) return false;
  switch (family) {
    case TaskFamily::Mcq: {
      auto a = mcq_letter(*extracted);
      auto b = mcq_letter(gold);
      return a.size() == 1 && a == b && std::isalpha(static_cast<unsigned char>(a[0]));
    }
    case TaskFamily::Math: {
      auto a = normalize_math(*extracted);
      return !a.empty() && a == normalize_math(gold);
    }
    case TaskFamily::OpenQa: {
      auto a = text::normalize_qa(*extracted);
      return !a.empty() && a == text::normalize_qa(gold);
    }
  }
  return false;
}

double retrieval_reward(std::size_t valid_queries, const RewardConfig& cfg) {
  if (valid_queries == 0) return 0.0;
  return valid_queries == 1 ? cfg.retrieval_reward_single : cfg.retrieval_reward_multi;
}

RewardBreakdown score_stage1(const Transcript& t, const FormatReport& report, const RewardConfig& cfg) {
  RewardBreakdown b;
  b.format = report.compliant
                 ? cfg.format_bonus
                 : -cfg.format_violation_penalty * static_cast<double>(report.violations.size());
  b.retrieval = retrieval_reward(t.valid_query_count(), cfg);
  b.fallback = fallback_penalty(t, cfg);
  b.total = b.format + b.retrieval + b.answer - b.fallback;
  return b;
}

RewardBreakdown score_stage2(const Transcript& t, const FormatReport& report, std::string_view gold,
                             const RewardConfig& cfg, std::size_t step) {
  if (text::trim(gold).empty()) throw Error(ErrorKind::MissingGold, "stage-2 scoring needs a gold answer");
  RewardBreakdown b;
  b.answer = match_answer(extract_answer(t), gold, t.task_family) ? cfg.answer_reward : 0.0;
  b.format = report.compliant ? cfg.format_bonus : 0.0;
  if (cfg.preset == Preset::McqWeak) {
    if (step < cfg.warm_steps) b.retrieval = retrieval_reward(t.valid_query_count(), cfg);
    if (cfg.penalize_missing_retrieval && report.count(ViolationKind::MissingRetrieval) > 0)
      b.format = -cfg.missing_retrieval_penalty;
  }
  b.fallback = fallback_penalty(t, cfg);
  b.total = b.format + b.retrieval + b.answer - b.fallback;
  return b;
}

RewardBreakdown score(const Transcript& t, std::string_view gold, const RewardConfig& cfg,
                      std::size_t step) {
  auto report = validate_format(t, FormatLimits::for_family(t.task_family));
  if (cfg.stage == Stage::One) return score_stage1(t, report, cfg);
  return score_stage2(t, report, gold, cfg, step);
}

}  // namespace ragrl::rewards
