// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/protocol.hpp"
#include "ragrl/rollout.hpp"

namespace ragrl::credit {

inline constexpr double kDefaultEps = 1e-8;

struct ScoredGroup {
  rollout::RolloutGroup group;
  std::vector<double> rewards;
};

/// One line of a batch file. The token, mask and advantage arrays all index
/// the response tokens; prompt tokens are context only and never trained on.
struct TrajectoryRecord {
  std::string question_id;
  std::size_t group_index = 0;
  std::vector<std::int64_t> prompt_tokens;
  std::vector<std::int64_t> response_tokens;
  std::vector<std::uint8_t> action_mask;
  std::vector<double> advantage;
  double reward = 0.0;
  int stage = 1;
  std::string preset;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct BatchStats {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const BatchStats&) const = default;
};

struct AdvantageBatch {
  std::vector<TrajectoryRecord> records;
  /// Statistics of the group-normalized values the batch step whitened.
  BatchStats batch_stats;
};

/// Mean and population standard deviation.
BatchStats population_stats(const std::vector<double>& xs);

/// Trajectory-level advantages, same shape as `rewards`. Each group is
/// centered on its mean and divided by max(std, eps); then every value in the
/// batch is whitened the same way. Groups whose rewards are all identical get
/// exactly zero at both steps. Throws GroupTooSmall for groups with < 2
/// members and InvalidArgument for eps <= 0.
std::vector<std::vector<double>> normalize_advantages(const std::vector<std::vector<double>>& rewards,
                                                      double eps = kDefaultEps,
                                                      BatchStats* stats = nullptr);

/// 1 for ModelText and Query tokens, 0 for injected documents and fallback
/// notices; one entry per response token. Throws SpanGap unless the segment
/// spans tile the response tokens exactly.
std::vector<std::uint8_t> build_action_mask(const Transcript& t);

/// Mask over prompt followed by response tokens, for trainers that feed the
/// whole sequence: zeros for the prompt, then the action mask.
std::vector<std::uint8_t> full_sequence_mask(const TrajectoryRecord& r);

struct BatchLabels {
  int stage = 1;
  std::string preset;
};

/// Incomplete groups are skipped. Throws InvalidArgument when a group's
/// reward count differs from its transcript count.
AdvantageBatch compute_advantages(const std::vector<ScoredGroup>& groups, double eps = kDefaultEps,
                                  const BatchLabels& labels = {});

nlohmann::json to_json(const TrajectoryRecord& r);
/// Throws SchemaMismatch for missing fields, unequal array lengths or mask
/// values outside {0, 1}.
TrajectoryRecord record_from_json(const nlohmann::json& j);

/// One canonical JSON line per record; returns the record count.
std::size_t emit_batch(const AdvantageBatch& batch, const std::filesystem::path& path);
std::vector<TrajectoryRecord> load_batch(const std::filesystem::path& path);

}  // namespace ragrl::credit
