// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ragrl/credit.hpp"
#include "ragrl/error.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/pipeline.hpp"
#include "testkit.hpp"

using namespace ragrl;
using namespace ragrl::pipeline;
namespace fs = std::filesystem;

namespace {

nlohmann::json fixture_config() {
  return nlohmann::json::parse(json_io::read_text(testkit::fixture("pipeline.json")));
}

PipelineConfig parsed(const nlohmann::json& j) { return parse_config(j, testkit::fixture("")); }

void expect_invalid(const nlohmann::json& j, const std::string& field) {
  try {
    parsed(j);
    FAIL() << "expected ConfigInvalid for " << field;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
  }
}

RunManifest run(const fs::path& out, std::size_t workers, std::size_t steps = 2) {
  auto cfg = load_config(testkit::fixture("pipeline.json"));
  return run_stage(rewards::Stage::One, cfg, {out, workers, steps});
}

int run_cli(const std::string& args) {
#ifdef RAGRL_CLI_PATH
  const std::string cmd = std::string("\"") + RAGRL_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

TEST(Config, FixtureParses) {
  auto cfg = load_config(testkit::fixture("pipeline.json"));
  EXPECT_EQ(cfg.preset, rewards::Preset::Default7B);
  EXPECT_EQ(cfg.run.group_size, 4u);
  EXPECT_EQ(cfg.rollout_seed, 7);
  EXPECT_EQ(cfg.retrieval.top_k, 5u);
  EXPECT_TRUE(fs::exists(cfg.retrieval.corpus_path));
  EXPECT_TRUE(cfg.judge.has_value());
  EXPECT_EQ(cfg.budget_for(TaskFamily::OpenQa).max_queries, 5u);
  EXPECT_EQ(cfg.reward_config(rewards::Stage::Two).retrieval_reward_multi, 4.0);
}

TEST(Config, ErrorsNameTheField) {
  auto j = fixture_config();
  j["reward"]["preset"] = "Huge99B";
  expect_invalid(j, "reward.preset");

  j = fixture_config();
  j["run"]["group_size"] = 0;
  expect_invalid(j, "run.group_size");

  j = fixture_config();
  j.erase("gateway");
  expect_invalid(j, "gateway");

  j = fixture_config();
  j["gateway"]["backend"] = "magic";
  expect_invalid(j, "gateway.backend");

  j = fixture_config();
  j["retrieval"].erase("corpus_path");
  expect_invalid(j, "retrieval.corpus_path");

  j = fixture_config();
  j["retrieval"]["top_k"] = "five";
  expect_invalid(j, "retrieval.top_k");

  j = fixture_config();
  j.erase("questions");
  expect_invalid(j, "curriculum.path");

  EXPECT_THROW(load_config("/nonexistent/pipeline.json"), Error);
}

TEST(Stage1, TwoStepsWriteBatchesAndManifest) {
  testkit::TempDir dir;
  auto m = run(dir / "a", 2);
  EXPECT_EQ(m.status, "ok");
  EXPECT_EQ(m.steps, 2u);
  ASSERT_EQ(m.outputs.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "a" / "batches" / "step_000.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "a" / "batches" / "step_001.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest.json"));
  auto records = credit::load_batch(dir / "a" / "batches" / "step_000.jsonl");
  EXPECT_EQ(records.size(), 6u * 4u);
  for (const auto& r : records) {
    EXPECT_EQ(r.stage, 1);
    EXPECT_EQ(r.action_mask.size(), r.response_tokens.size());
    for (std::size_t k = 0; k < r.advantage.size(); ++k)
      if (!r.action_mask[k]) ASSERT_EQ(r.advantage[k], 0.0);
  }

  auto again = run(dir / "b", 2);
  EXPECT_EQ(m.content_hash(), again.content_hash());
  EXPECT_TRUE(testkit::same_tree(dir / "a" / "batches", dir / "b" / "batches"));
}

TEST(Stage1, WorkerCountDoesNotChangeBatches) {
  testkit::TempDir dir;
  auto one = run(dir / "w1", 1);
  auto eight = run(dir / "w8", 8);
  EXPECT_TRUE(testkit::same_tree(dir / "w1" / "batches", dir / "w8" / "batches"));
  // The worker count is left out of the hash on purpose.
  EXPECT_EQ(one.content_hash(), eight.content_hash());
  EXPECT_NE(one.workers, eight.workers);
}

TEST(Stage1, GoldenFirstBatch) {
  testkit::TempDir dir;
  run(dir / "g", 2, 1);
  EXPECT_TRUE(testkit::same_bytes(dir / "g" / "batches" / "step_000.jsonl",
                                  testkit::fixture("golden/stage1_step_000.jsonl")));
}

TEST(Stage2, RunsOverCuratedItems) {
  testkit::TempDir dir;
  auto cfg = load_config(testkit::fixture("pipeline.json"));
  std::vector<curriculum::CurriculumItem> items;
  for (const auto& d : read_data(cfg.data)) {
    curriculum::CurriculumItem it;
    it.question = d.question;
    it.score_s = 0.4;
    it.bucket = curriculum::bucket(0.4);
    items.push_back(it);
  }
  curriculum::apply_mixing(items, 3);
  write_items(dir / "items.jsonl", items);
  EXPECT_EQ(read_items(dir / "items.jsonl"), items);
  cfg.data = dir / "items.jsonl";
  auto m = run_stage(rewards::Stage::Two, cfg, {dir / "out", 1, std::nullopt});
  EXPECT_EQ(m.status, "ok");
  // One pass over six items at six per step.
  EXPECT_EQ(m.steps, 1u);
  for (const auto& r : credit::load_batch(dir / "out" / "batches" / "step_000.jsonl")) EXPECT_EQ(r.stage, 2);
}

TEST(Stage1, FailureWritesFailedManifest) {
  testkit::TempDir dir;
  auto cfg = load_config(testkit::fixture("pipeline.json"));
  cfg.data = dir / "missing.jsonl";
  EXPECT_THROW(run_stage(rewards::Stage::One, cfg, {dir / "out", 1, 1}), Error);
  auto j = nlohmann::json::parse(json_io::read_text(dir / "out" / "manifest.json"));
  EXPECT_EQ(j.at("status"), "failed");
  EXPECT_FALSE(j.at("error").get<std::string>().empty());
}

TEST(Cli, ChainMatchesRunStage) {
#ifndef RAGRL_CLI_PATH
  GTEST_SKIP() << "CLI not built";
#endif
  testkit::TempDir dir;
  const std::string cfg = testkit::fixture("pipeline.json").string();
  const std::string q = testkit::fixture("questions.jsonl").string();
  const std::string d = dir.path().string();
  ASSERT_EQ(run_cli("rollout --questions " + q + " --mode retrieval --group-size 4 --seed 7 --config " + cfg +
                    " --out " + d + "/roll"),
            0);
  ASSERT_EQ(run_cli("reward --stage 1 --preset Default7B --rollouts " + d + "/roll --gold " + q + " --out " + d +
                    "/rewards.jsonl"),
            0);
  ASSERT_EQ(run_cli("batch --rollouts " + d + "/roll --rewards " + d + "/rewards.jsonl --out " + d + "/batch.jsonl"),
            0);
  // The same seed and group size as step 0 of the pipeline, so the chain
  // reproduces its first batch.
  ASSERT_EQ(run_cli("run-stage --stage 1 --config " + cfg + " --out " + d + "/run --steps 1"), 0);
  auto chain = credit::load_batch(dir / "batch.jsonl");
  auto staged = credit::load_batch(dir / "run" / "batches" / "step_000.jsonl");
  ASSERT_EQ(chain.size(), staged.size());
  EXPECT_EQ(run_cli("reward --stage 9 --rollouts " + d + "/roll --out " + d + "/x.jsonl"), 2);
  EXPECT_EQ(run_cli("score --questions /nonexistent.jsonl --out " + d + "/s.jsonl --config " + cfg), 2);
}
