// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragrl/credit.hpp"
#include "ragrl/curriculum.hpp"
#include "ragrl/gateway.hpp"
#include "ragrl/retrieval_service.hpp"
#include "ragrl/rewards.hpp"
#include "ragrl/rollout.hpp"

namespace ragrl::pipeline {

/// Where generated text comes from.
struct BackendConfig {
  /// "scripted" or "remote".
  std::string kind = "scripted";
  std::filesystem::path script;
  gateway::RemoteConfig remote;
  /// Environment variable holding the API key of a remote backend.
  std::string api_key_env;
};

struct RetrievalConfig {
  std::filesystem::path corpus_path;
  std::size_t top_k = 10;
  /// Base URL of a running retrieval server; empty means in-process.
  std::string endpoint;
  bool summarize = true;
  std::optional<BackendConfig> summarizer;
  std::size_t no_summary_top_k = 3;
  double bm25_k1 = 0.9;
  double bm25_b = 0.4;
  bool online_enabled = false;
  std::string search_endpoint;
  std::string search_api_key_env;
  std::string converter_endpoint;
};

struct RunConfig {
  /// 0 picks the stage default: 10 steps for stage 1, one pass over the data
  /// for stage 2.
  std::size_t steps = 0;
  std::size_t questions_per_step = 64;
  std::size_t group_size = 16;
  std::size_t workers = 4;
  double eps = credit::kDefaultEps;
};

/// Parsed pipeline config. Relative paths are resolved against the config
/// file's directory.
struct PipelineConfig {
  nlohmann::json raw;
  std::filesystem::path base_dir;
  BackendConfig gateway;
  RetrievalConfig retrieval;
  /// Judge model for the evaluation harness.
  std::optional<BackendConfig> judge;
  rewards::Preset preset = rewards::Preset::Default7B;
  bool small_model = false;
  std::optional<std::size_t> warm_steps;
  /// Questions (stage 1) or curriculum items (stage 2) file.
  std::filesystem::path data;
  std::map<TaskFamily, rollout::RolloutBudget> budgets;
  std::int64_t rollout_seed = 0;
  std::uint64_t sample_seed = 0;
  RunConfig run;

  rewards::RewardConfig reward_config(rewards::Stage stage) const;
  rollout::RolloutBudget budget_for(TaskFamily f) const;
};

/// Throws ConfigInvalid naming the offending field.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

std::shared_ptr<gateway::Backend> make_backend(const BackendConfig& cfg);

/// The retrieval client described by the config: an HTTP client when an
/// endpoint is set, otherwise an in-process service over corpus_path.
std::shared_ptr<retrieval::RetrievalClient> make_retrieval(const RetrievalConfig& cfg);
std::shared_ptr<retrieval::RetrievalService> make_retrieval_service(const RetrievalConfig& cfg);

/// Curriculum items or plain questions, one record per line. Plain questions
/// load with prompt_mode retrieval and no score.
struct DataItem {
  Question question;
  PromptMode mode = PromptMode::Retrieval;
};
std::vector<DataItem> read_data(const std::filesystem::path& path);

void write_items(const std::filesystem::path& path, const std::vector<curriculum::CurriculumItem>& items);
std::vector<curriculum::CurriculumItem> read_items(const std::filesystem::path& path);

void write_groups(const std::filesystem::path& path, const std::vector<rollout::RolloutGroup>& groups);
std::vector<rollout::RolloutGroup> read_groups(const std::filesystem::path& path);

/// Per-trajectory reward lines: question_id, group_index, components, stage, preset.
nlohmann::json breakdown_record(const std::string& question_id, std::size_t group_index,
                                const rewards::RewardBreakdown& b, const rewards::RewardConfig& cfg);

/// Scores every complete group. Gold answers are looked up by question id;
/// stage 2 throws MissingGold when one is absent.
std::vector<credit::ScoredGroup> score_groups(const std::vector<rollout::RolloutGroup>& groups,
                                              const std::map<std::string, std::string>& gold,
                                              const rewards::RewardConfig& cfg, std::size_t step);

struct RunManifest {
  nlohmann::json config;
  rewards::Stage stage = rewards::Stage::One;
  rewards::Preset preset = rewards::Preset::Default7B;
  std::map<std::string, std::int64_t> seeds;
  /// Input file name -> git blob id of its content.
  std::map<std::string, std::string> inputs;
  /// Batch file name -> git blob id.
  std::map<std::string, std::string> outputs;
  std::size_t steps = 0;
  std::size_t questions_per_step = 0;
  std::size_t group_size = 0;
  std::size_t workers = 0;
  /// Dataset passes covered by the run (steps * questions_per_step / size).
  double epochs = 0.0;
  std::size_t excluded_groups = 0;
  std::string status = "ok";
  std::string error;
  std::string started_at;
  std::string finished_at;

  /// SHA-256 over every field except the timestamps and the worker count.
  std::string content_hash() const;
  nlohmann::json to_json() const;
};

struct StageOptions {
  std::filesystem::path out_dir;
  /// Overrides run.workers when set.
  std::optional<std::size_t> workers;
  /// Overrides run.steps when set.
  std::optional<std::size_t> steps;
};

/// Runs the stage schedule, writing out_dir/batches/step_NNN.jsonl and
/// out_dir/manifest.json. On a module error the manifest is written with
/// status "failed" and the error is rethrown.
RunManifest run_stage(rewards::Stage stage, const PipelineConfig& cfg, const StageOptions& options);

}  // namespace ragrl::pipeline
