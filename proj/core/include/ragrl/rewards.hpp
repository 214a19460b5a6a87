// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/protocol.hpp"

namespace ragrl::rewards {

enum class Stage { One = 1, Two = 2 };
std::string_view to_string(Stage s);
/// Accepts "1"/"2" and "one"/"two".
Stage parse_stage(std::string_view s);

/// Retrieval reward tables per model family.
enum class Preset { Default7B, Small3B, Llama8B, McqWeak };
std::string_view to_string(Preset p);
/// Case-insensitive; also accepts snake_case ("default_7b", "mcq_weak").
Preset parse_preset(std::string_view s);

struct RewardConfig {
  Stage stage = Stage::One;
  Preset preset = Preset::Default7B;
  double retrieval_reward_single = 3.0;
  double retrieval_reward_multi = 4.0;
  double fallback_penalty = 0.5;
  double answer_reward = 2.0;
  double format_bonus = 1.0;
  double format_violation_penalty = 1.0;
  /// McqWeak only: stage-2 steps [0, warm_steps) still earn the retrieval reward.
  std::size_t warm_steps = 10;
  /// McqWeak only: outputs with no retrieval call get a flat format reward of
  /// -missing_retrieval_penalty in stage 2, however many other faults they have.
  bool penalize_missing_retrieval = false;
  double missing_retrieval_penalty = 1.0;

  /// Preset values; `small_model` selects the longer McqWeak window (15 steps)
  /// and turns on the missing-retrieval penalty.
  static RewardConfig make(Stage stage, Preset preset, bool small_model = false);

  /// Throws ConfigInvalid when a magnitude is negative.
  void validate() const;
};

struct RewardBreakdown {
  double format = 0.0;
  double retrieval = 0.0;
  double answer = 0.0;
  /// Penalty magnitude; subtracted from the total.
  double fallback = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json to_json(const RewardBreakdown& b);

/// mcq: single letter, case-insensitive; math: equal after removing all
/// whitespace, wrapping braces and a leading '+'; open_qa: equal after QA
/// normalization. An absent or blank extraction never matches.
bool match_answer(const std::optional<std::string>& extracted, std::string_view gold,
                  TaskFamily family);

/// Retrieval reward for a number of valid queries under `cfg`.
double retrieval_reward(std::size_t valid_queries, const RewardConfig& cfg);

RewardBreakdown score_stage1(const Transcript& t, const FormatReport& report, const RewardConfig& cfg);

/// `step` is the stage-2 training step; it only matters for the McqWeak
/// warm window. Throws MissingGold for a blank gold answer.
RewardBreakdown score_stage2(const Transcript& t, const FormatReport& report, std::string_view gold,
                             const RewardConfig& cfg, std::size_t step = 0);

/// Validates the transcript with the family's limits and dispatches on cfg.stage.
RewardBreakdown score(const Transcript& t, std::string_view gold, const RewardConfig& cfg,
                      std::size_t step = 0);

}  // namespace ragrl::rewards
