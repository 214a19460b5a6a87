// SPDX-License-Identifier: Apache-2.0
// Command line front end for the data plane: scoring, curation, rollouts,
// rewards, batch emission, evaluation, stage runs and the retrieval server.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "ragrl/credit.hpp"
#include "ragrl/curriculum.hpp"
#include "ragrl/error.hpp"
#include "ragrl/evalkit.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/pipeline.hpp"
#include "ragrl/retrieval_http.hpp"
#include "ragrl/rewards.hpp"
#include "ragrl/rollout.hpp"

namespace fs = std::filesystem;
using namespace ragrl;

namespace {

struct Common {
  std::string config;
  std::size_t workers = 0;
};

pipeline::PipelineConfig require_config(const Common& c) {
  if (c.config.empty()) throw Error(ErrorKind::ConfigInvalid, "--config is required");
  return pipeline::load_config(c.config);
}

rollout::RolloutRunner make_runner(const pipeline::PipelineConfig& cfg, std::size_t workers,
                                   bool evaluation, bool need_retrieval) {
  rollout::RolloutOptions ro;
  ro.sampling = evaluation ? gateway::SamplingParams::evaluation() : gateway::SamplingParams::training();
  ro.summary_mode = evaluation ? prompts::SummaryMode::Eval : prompts::SummaryMode::Train;
  ro.top_k = cfg.retrieval.top_k;
  ro.workers = workers ? workers : cfg.run.workers;
  std::shared_ptr<retrieval::RetrievalClient> client;
  if (need_retrieval) {
    client = pipeline::make_retrieval(cfg.retrieval);
    if (!client) throw Error(ErrorKind::ConfigInvalid, "retrieval: retrieval mode needs a corpus or endpoint");
  }
  return rollout::RolloutRunner(pipeline::make_backend(cfg.gateway), std::move(client), ro);
}

std::map<std::string, std::string> gold_map(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& d : pipeline::read_data(path)) out[d.question.question_id] = d.question.gold;
  return out;
}

fs::path groups_file(const fs::path& dir) { return dir / "groups.jsonl"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ragrl: retrieval-augmented RL data plane"};
  app.require_subcommand(1);
  Common common;

  // score
  auto* score = app.add_subcommand("score", "Estimate difficulty with direct-mode rollouts");
  std::string score_questions, score_out;
  std::size_t score_n = 20;
  std::int64_t score_seed = 0;
  score->add_option("--questions", score_questions, "Question file (JSONL)")->required();
  score->add_option("--n", score_n, "Rollouts per question")->check(CLI::PositiveNumber);
  score->add_option("--seed", score_seed, "Base seed");
  score->add_option("--out", score_out, "Output scores table")->required();
  score->add_option("--config", common.config, "Pipeline config (gateway section)")->required();
  score->add_option("--workers", common.workers, "Worker threads");

  // curate
  auto* curate = app.add_subcommand("curate", "Sample a 7:2:1 curriculum and assign prompt modes");
  std::string curate_scores, curate_out, curate_report;
  std::size_t curate_n = 3000;
  std::uint64_t curate_seed = 0;
  curate->add_option("--scores", curate_scores, "Scores table from `score`")->required();
  curate->add_option("--n", curate_n, "Items to sample")->check(CLI::PositiveNumber);
  curate->add_option("--seed", curate_seed, "Sampling seed");
  curate->add_option("--out", curate_out, "Output curriculum table")->required();
  curate->add_option("--report", curate_report, "Optional JSON sampling report");

  // rollout
  auto* roll = app.add_subcommand("rollout", "Run rollout groups for a question file");
  std::string roll_questions, roll_mode = "retrieval", roll_out;
  std::size_t roll_g = 16;
  std::int64_t roll_seed = 0;
  bool roll_eval = false;
  roll->add_option("--questions", roll_questions, "Question or curriculum file")->required();
  roll->add_option("--mode", roll_mode, "retrieval, direct, or curriculum (per-item modes)")
      ->check(CLI::IsMember({"retrieval", "direct", "curriculum"}));
  roll->add_option("--group-size", roll_g, "Rollouts per question");
  roll->add_option("--seed", roll_seed, "Base seed");
  roll->add_option("--out", roll_out, "Output directory")->required();
  roll->add_flag("--eval-sampling", roll_eval, "Use evaluation sampling and summarizer prompts");
  roll->add_option("--config", common.config, "Pipeline config")->required();
  roll->add_option("--workers", common.workers, "Worker threads");

  // reward
  auto* reward = app.add_subcommand("reward", "Score rollout groups");
  std::string reward_stage = "1", reward_preset = "Default7B", reward_rollouts, reward_gold, reward_out;
  std::size_t reward_step = 0;
  bool reward_small = false;
  reward->add_option("--stage", reward_stage, "1 or 2")->check(CLI::IsMember({"1", "2"}));
  reward->add_option("--preset", reward_preset, "Default7B, Small3B, Llama8B or McqWeak");
  reward->add_option("--rollouts", reward_rollouts, "Directory written by `rollout`")->required();
  reward->add_option("--gold", reward_gold, "Question file with gold answers");
  reward->add_option("--out", reward_out, "Output breakdown file (JSONL)")->required();
  reward->add_option("--step", reward_step, "Training step (McqWeak warm window)");
  reward->add_flag("--small-model", reward_small, "Small-model McqWeak variant");

  // batch
  auto* batch = app.add_subcommand("batch", "Normalize advantages and emit a trainer batch");
  std::string batch_rollouts, batch_rewards, batch_out;
  double batch_eps = credit::kDefaultEps;
  batch->add_option("--rollouts", batch_rollouts, "Directory written by `rollout`")->required();
  batch->add_option("--rewards", batch_rewards, "Breakdown file written by `reward`")->required();
  batch->add_option("--eps", batch_eps, "Normalization epsilon");
  batch->add_option("--out", batch_out, "Output batch file")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a benchmark");
  std::string eval_bench, eval_mode = "retrieval", eval_metrics = "em,f1", eval_out;
  std::size_t eval_n = 500;
  std::uint64_t eval_seed = 0;
  eval->add_option("--benchmark", eval_bench, "Benchmark file (question format)")->required();
  eval->add_option("--mode", eval_mode, "retrieval or direct")->check(CLI::IsMember({"retrieval", "direct"}));
  eval->add_option("--metrics", eval_metrics, "Comma separated: em,f1,judge");
  eval->add_option("--n", eval_n, "Items to sample");
  eval->add_option("--seed", eval_seed, "Sampling seed");
  eval->add_option("--out", eval_out, "Report path")->required();
  eval->add_option("--config", common.config, "Pipeline config")->required();
  eval->add_option("--workers", common.workers, "Worker threads");

  // run-stage
  auto* stage = app.add_subcommand("run-stage", "Run a training stage schedule");
  std::string stage_id = "1", stage_out;
  std::size_t stage_steps = 0;
  stage->add_option("--stage", stage_id, "1 or 2")->check(CLI::IsMember({"1", "2"}));
  stage->add_option("--config", common.config, "Pipeline config")->required();
  stage->add_option("--out", stage_out, "Output directory")->required();
  stage->add_option("--workers", common.workers, "Worker threads");
  stage->add_option("--steps", stage_steps, "Override run.steps");

  // serve-retrieval
  auto* serve = app.add_subcommand("serve-retrieval", "Serve the retrieval service over HTTP");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve->add_option("--config", common.config, "Pipeline config (retrieval section)")->required();
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; every usage error exits 2 like a module error would.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*score) {
      auto cfg = require_config(common);
      auto runner = make_runner(cfg, common.workers, false, false);
      auto items = curriculum::score_questions(read_questions(score_questions), score_n, runner, score_seed);
      pipeline::write_items(score_out, items);
      std::size_t counts[4] = {};
      for (const auto& it : items) ++counts[static_cast<int>(it.bucket)];
      std::printf("scored %zu questions: easy %zu, medium %zu, hard %zu, filtered %zu\n", items.size(),
                  counts[0], counts[1], counts[2], counts[3]);
    } else if (*curate) {
      auto pool = pipeline::read_items(curate_scores);
      curriculum::SampleReport rep;
      auto sample = curriculum::sample_epoch(pool, curate_n, curate_seed, &rep);
      curriculum::apply_mixing(sample, curate_seed);
      pipeline::write_items(curate_out, sample);
      nlohmann::json report = {
          {"n", curate_n},
          {"seed", curate_seed},
          {"quotas", {{"hard", rep.quotas.hard}, {"medium", rep.quotas.medium}, {"easy", rep.quotas.easy}}},
          {"with_replacement",
           {{"hard", rep.with_replacement.hard}, {"medium", rep.with_replacement.medium},
            {"easy", rep.with_replacement.easy}}}};
      if (!curate_report.empty()) json_io::write_text(curate_report, report.dump(2) + "\n");
      std::printf("%s\n", json_io::canonical_dump(report).c_str());
    } else if (*roll) {
      auto cfg = require_config(common);
      auto data = pipeline::read_data(roll_questions);
      std::vector<rollout::RolloutTask> tasks;
      bool any_retrieval = false;
      for (const auto& d : data) {
        rollout::RolloutTask t;
        t.question = d.question;
        t.mode = roll_mode == "curriculum" ? d.mode : parse_prompt_mode(roll_mode);
        t.budget = cfg.budget_for(d.question.task_family);
        any_retrieval |= t.mode == PromptMode::Retrieval;
        tasks.push_back(std::move(t));
      }
      auto runner = make_runner(cfg, common.workers, roll_eval, any_retrieval);
      auto groups = runner.run_groups(tasks, roll_g, roll_seed);
      fs::create_directories(roll_out);
      pipeline::write_groups(groups_file(roll_out), groups);
      std::size_t incomplete = 0;
      for (const auto& g : groups) incomplete += g.complete ? 0 : 1;
      std::printf("wrote %zu groups (%zu incomplete) to %s\n", groups.size(), incomplete,
                  groups_file(roll_out).c_str());
    } else if (*reward) {
      auto cfg = rewards::RewardConfig::make(rewards::parse_stage(reward_stage),
                                             rewards::parse_preset(reward_preset), reward_small);
      auto groups = pipeline::read_groups(groups_file(reward_rollouts));
      std::map<std::string, std::string> gold;
      if (!reward_gold.empty()) gold = gold_map(reward_gold);
      std::vector<nlohmann::json> lines;
      for (const auto& g : groups) {
        if (!g.complete) continue;
        const auto it = gold.find(g.question_id);
        const std::string answer = it == gold.end() ? std::string() : it->second;
        for (std::size_t i = 0; i < g.transcripts.size(); ++i)
          lines.push_back(pipeline::breakdown_record(
              g.question_id, i, rewards::score(g.transcripts[i], answer, cfg, reward_step), cfg));
      }
      json_io::write_jsonl(reward_out, lines);
      std::printf("wrote %zu reward records to %s\n", lines.size(), reward_out.c_str());
    } else if (*batch) {
      auto groups = pipeline::read_groups(groups_file(batch_rollouts));
      std::map<std::pair<std::string, std::size_t>, double> totals;
      credit::BatchLabels labels;
      for (const auto& j : json_io::read_jsonl(batch_rewards)) {
        totals[{j.at("question_id").get<std::string>(), j.at("group_index").get<std::size_t>()}] =
            j.at("total").get<double>();
        labels.stage = j.at("stage").get<int>();
        labels.preset = j.at("preset").get<std::string>();
      }
      std::vector<credit::ScoredGroup> scored;
      for (const auto& g : groups) {
        if (!g.complete) continue;
        credit::ScoredGroup sg{g, {}};
        for (std::size_t i = 0; i < g.transcripts.size(); ++i) {
          auto it = totals.find({g.question_id, i});
          if (it == totals.end())
            throw Error(ErrorKind::SchemaMismatch, "no reward for " + g.question_id + "/" + std::to_string(i));
          sg.rewards.push_back(it->second);
        }
        scored.push_back(std::move(sg));
      }
      auto b = credit::compute_advantages(scored, batch_eps, labels);
      auto n = credit::emit_batch(b, batch_out);
      std::printf("wrote %zu records to %s (batch mean %.6g, std %.6g)\n", n, batch_out.c_str(),
                  b.batch_stats.mean, b.batch_stats.std);
    } else if (*eval) {
      auto cfg = require_config(common);
      const auto mode = parse_prompt_mode(eval_mode);
      auto runner = make_runner(cfg, common.workers, true, mode == PromptMode::Retrieval);
      evalkit::EvalOptions opts;
      opts.benchmark_id = fs::path(eval_bench).stem().string();
      opts.mode = mode;
      opts.metrics = evalkit::parse_metrics(eval_metrics);
      opts.sample_n = eval_n;
      opts.seed = eval_seed;
      std::unique_ptr<evalkit::Judge> judge;
      if (opts.metrics.count(evalkit::Metric::Judge)) {
        if (!cfg.judge) throw Error(ErrorKind::ConfigInvalid, "judge: required for the judge metric");
        judge = std::make_unique<evalkit::Judge>(pipeline::make_backend(*cfg.judge));
      }
      auto report = evalkit::evaluate_benchmark(read_questions(eval_bench), opts, runner, judge.get());
      json_io::write_text(eval_out, evalkit::to_json(report).dump(2) + "\n");
      for (const auto& [name, v] : report.metrics) std::printf("%s %.4f\n", name.c_str(), v);
      if (!report.complete) {
        std::fprintf(stderr, "report incomplete: some items failed\n");
        return 3;
      }
    } else if (*stage) {
      auto cfg = require_config(common);
      pipeline::StageOptions opts;
      opts.out_dir = stage_out;
      if (common.workers) opts.workers = common.workers;
      if (stage_steps) opts.steps = stage_steps;
      auto m = pipeline::run_stage(rewards::parse_stage(stage_id), cfg, opts);
      std::printf("stage %s: %zu steps, manifest %s\n", stage_id.c_str(), m.steps, m.content_hash().c_str());
    } else if (*serve) {
      auto cfg = require_config(common);
      auto service = pipeline::make_retrieval_service(cfg.retrieval);
      retrieval::RetrievalServer server(service, {cfg.retrieval.bm25_k1, cfg.retrieval.bm25_b});
      std::printf("serving %zu chunks on %s:%d\n", service->index()->size(), serve_host.c_str(), serve_port);
      std::fflush(stdout);
      server.serve_forever(serve_host, serve_port);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
