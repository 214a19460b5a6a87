// SPDX-License-Identifier: Apache-2.0
#include "ragrl/credit.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/json_io.hpp"

namespace ragrl::credit {

BatchStats population_stats(const std::vector<double>& xs) {
  BatchStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(xs.size()));
  return s;
}

namespace {

bool all_equal(const std::vector<double>& xs) {
  return std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) == xs.end();
}

}  // namespace

std::vector<std::vector<double>> normalize_advantages(const std::vector<std::vector<double>>& rewards,
                                                      double eps, BatchStats* stats) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be > 0");
  std::vector<std::vector<double>> out(rewards.size());
  std::vector<bool> degenerate(rewards.size());
  std::vector<double> flat;
  for (std::size_t g = 0; g < rewards.size(); ++g) {
    const auto& r = rewards[g];
    if (r.size() < 2)
      throw Error(ErrorKind::GroupTooSmall, "group " + std::to_string(g) + " has " +
                                                std::to_string(r.size()) + " member(s)");
    out[g].assign(r.size(), 0.0);
    degenerate[g] = all_equal(r);
    if (!degenerate[g]) {
      // Subtract the group baseline, then whiten the centered values.
      const auto base = population_stats(r).mean;
      std::vector<double> centered(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) centered[i] = r[i] - base;
      const auto s = population_stats(centered);
      const double denom = std::max(s.std, eps);
      for (std::size_t i = 0; i < r.size(); ++i) out[g][i] = (centered[i] - s.mean) / denom;
    }
    flat.insert(flat.end(), out[g].begin(), out[g].end());
  }

  const auto bs = population_stats(flat);
  if (stats) *stats = bs;
  const double denom = std::max(bs.std, eps);
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (degenerate[g]) continue;
    for (double& x : out[g]) x = (x - bs.mean) / denom;
  }
  return out;
}

std::vector<std::uint8_t> build_action_mask(const Transcript& t) {
  std::vector<std::uint8_t> mask(t.response_tokens.size(), 0);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    if (s.token_span.begin != cursor || s.token_span.end < s.token_span.begin ||
        s.token_span.end > mask.size())
      throw Error(ErrorKind::SpanGap, "segment " + std::to_string(i) + " span [" +
                                          std::to_string(s.token_span.begin) + ", " +
                                          std::to_string(s.token_span.end) + ") does not continue at " +
                                          std::to_string(cursor));
    const std::uint8_t bit = s.kind == SegmentKind::ModelText || s.kind == SegmentKind::Query;
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.token_span.begin),
              mask.begin() + static_cast<std::ptrdiff_t>(s.token_span.end), bit);
    cursor = s.token_span.end;
  }
  if (cursor != mask.size())
    throw Error(ErrorKind::SpanGap, "segments cover " + std::to_string(cursor) + " of " +
                                        std::to_string(mask.size()) + " response tokens");
  return mask;
}

std::vector<std::uint8_t> full_sequence_mask(const TrajectoryRecord& r) {
  std::vector<std::uint8_t> out(r.prompt_tokens.size(), 0);
  out.insert(out.end(), r.action_mask.begin(), r.action_mask.end());
  return out;
}

namespace {

std::vector<std::int64_t> ids(const std::vector<Token>& toks) {
  std::vector<std::int64_t> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.id);
  return out;
}

}  // namespace

AdvantageBatch compute_advantages(const std::vector<ScoredGroup>& groups, double eps,
                                  const BatchLabels& labels) {
  std::vector<const ScoredGroup*> kept;
  std::vector<std::vector<double>> rewards;
  for (const auto& sg : groups) {
    if (!sg.group.complete) continue;
    if (sg.rewards.size() != sg.group.transcripts.size())
      throw Error(ErrorKind::InvalidArgument, "group " + sg.group.question_id + " has " +
                                                  std::to_string(sg.rewards.size()) + " rewards for " +
                                                  std::to_string(sg.group.transcripts.size()) +
                                                  " transcripts");
    kept.push_back(&sg);
    rewards.push_back(sg.rewards);
  }

  AdvantageBatch batch;
  auto adv = normalize_advantages(rewards, eps, &batch.batch_stats);
  for (std::size_t g = 0; g < kept.size(); ++g) {
    const auto& sg = *kept[g];
    for (std::size_t i = 0; i < sg.group.transcripts.size(); ++i) {
      const auto& t = sg.group.transcripts[i];
      TrajectoryRecord rec;
      rec.question_id = sg.group.question_id;
      rec.group_index = i;
      rec.prompt_tokens = ids(t.prompt_tokens);
      rec.response_tokens = ids(t.response_tokens);
      rec.action_mask = build_action_mask(t);
      rec.advantage.resize(rec.action_mask.size());
      for (std::size_t k = 0; k < rec.action_mask.size(); ++k)
        rec.advantage[k] = rec.action_mask[k] ? adv[g][i] : 0.0;
      rec.reward = sg.rewards[i];
      rec.stage = labels.stage;
      rec.preset = labels.preset;
      batch.records.push_back(std::move(rec));
    }
  }
  return batch;
}

nlohmann::json to_json(const TrajectoryRecord& r) {
  nlohmann::json mask = nlohmann::json::array();
  for (auto m : r.action_mask) mask.push_back(static_cast<int>(m));
  nlohmann::json adv = nlohmann::json::array();
  for (double a : r.advantage) adv.push_back(a);
  return {{"question_id", r.question_id},
          {"group_index", r.group_index},
          {"prompt_tokens", r.prompt_tokens},
          {"response_tokens", r.response_tokens},
          {"action_mask", std::move(mask)},
          {"advantage", std::move(adv)},
          {"reward", r.reward},
          {"stage", r.stage},
          {"preset", r.preset}};
}

TrajectoryRecord record_from_json(const nlohmann::json& j) {
  TrajectoryRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    r.group_index = j.at("group_index").get<std::size_t>();
    r.prompt_tokens = j.at("prompt_tokens").get<std::vector<std::int64_t>>();
    r.response_tokens = j.at("response_tokens").get<std::vector<std::int64_t>>();
    for (const auto& m : j.at("action_mask")) {
      auto v = m.get<int>();
      if (v != 0 && v != 1) throw Error(ErrorKind::SchemaMismatch, "action_mask entry " + std::to_string(v));
      r.action_mask.push_back(static_cast<std::uint8_t>(v));
    }
    r.advantage = j.at("advantage").get<std::vector<double>>();
    r.reward = j.at("reward").get<double>();
    r.stage = j.at("stage").get<int>();
    r.preset = j.at("preset").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("batch record: ") + e.what());
  }
  if (r.action_mask.size() != r.response_tokens.size() || r.advantage.size() != r.response_tokens.size())
    throw Error(ErrorKind::SchemaMismatch, "batch record arrays differ in length for " + r.question_id);
  return r;
}

std::size_t emit_batch(const AdvantageBatch& batch, const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  lines.reserve(batch.records.size());
  for (const auto& r : batch.records) lines.push_back(to_json(r));
  return json_io::write_jsonl(path, lines);
}

std::vector<TrajectoryRecord> load_batch(const std::filesystem::path& path) {
  std::vector<TrajectoryRecord> out;
  for (const auto& j : json_io::read_jsonl(path)) out.push_back(record_from_json(j));
  return out;
}

}  // namespace ragrl::credit
