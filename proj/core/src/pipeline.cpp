// SPDX-License-Identifier: Apache-2.0
#include "ragrl/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>

#include "ragrl/error.hpp"
#include "ragrl/hash.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/online.hpp"
#include "ragrl/retrieval_http.hpp"

namespace ragrl::pipeline {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::ConfigInvalid, field + ": " + why);
}

const nlohmann::json* child(const nlohmann::json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, const std::string& prefix, T fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(prefix + key, "has the wrong type");
  }
}

std::size_t positive(const nlohmann::json& j, const char* key, const std::string& prefix,
                     std::size_t fallback) {
  const auto* v = child(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<std::int64_t>() <= 0) invalid(prefix + key, "must be a positive integer");
  return v->get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

BackendConfig parse_backend(const nlohmann::json& j, const std::string& prefix, const fs::path& base) {
  if (!j.is_object()) invalid(prefix, "must be an object");
  BackendConfig b;
  b.kind = get_or<std::string>(j, "backend", prefix, "scripted");
  if (b.kind == "scripted") {
    b.script = resolve(base, get_or<std::string>(j, "script", prefix, ""));
    if (b.script.empty()) invalid(prefix + "script", "is required for the scripted backend");
  } else if (b.kind == "remote") {
    b.remote.endpoint = get_or<std::string>(j, "endpoint", prefix, "");
    if (b.remote.endpoint.empty()) invalid(prefix + "endpoint", "is required for the remote backend");
    b.remote.model = get_or<std::string>(j, "model", prefix, "");
    b.remote.tokenizer_endpoint = get_or<std::string>(j, "tokenizer_endpoint", prefix, "");
    b.remote.max_retries = get_or<int>(j, "max_retries", prefix, 2);
    b.remote.timeout_seconds = get_or<double>(j, "timeout_seconds", prefix, 120.0);
    b.api_key_env = get_or<std::string>(j, "api_key_env", prefix, "");
  } else {
    invalid(prefix + "backend", "must be \"scripted\" or \"remote\", got \"" + b.kind + "\"");
  }
  return b;
}

rollout::RolloutBudget parse_budget(const nlohmann::json& j, const std::string& prefix,
                                    rollout::RolloutBudget b) {
  b.max_queries = positive(j, "max_queries", prefix, b.max_queries);
  b.max_tokens_per_turn = positive(j, "max_tokens_per_turn", prefix, b.max_tokens_per_turn);
  b.max_turns = positive(j, "max_turns", prefix, b.max_queries + 2);
  try {
    b.validate();
  } catch (const Error& e) {
    invalid(prefix.substr(0, prefix.size() - 1), e.what());
  }
  return b;
}

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string blob_of(const fs::path& p) { return hash::git_blob_id(json_io::read_text(p)); }

}  // namespace

rewards::RewardConfig PipelineConfig::reward_config(rewards::Stage stage) const {
  auto c = rewards::RewardConfig::make(stage, preset, small_model);
  if (warm_steps) c.warm_steps = *warm_steps;
  return c;
}

rollout::RolloutBudget PipelineConfig::budget_for(TaskFamily f) const {
  auto it = budgets.find(f);
  return it == budgets.end() ? rollout::RolloutBudget::for_family(f) : it->second;
}

PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) invalid("config", "must be a JSON object");
  PipelineConfig c;
  c.raw = j;
  c.base_dir = base_dir;

  const auto* gw = child(j, "gateway");
  if (!gw) invalid("gateway", "is required");
  c.gateway = parse_backend(*gw, "gateway.", base_dir);

  if (const auto* r = child(j, "retrieval")) {
    const std::string p = "retrieval.";
    c.retrieval.corpus_path = resolve(base_dir, get_or<std::string>(*r, "corpus_path", p, ""));
    c.retrieval.endpoint = get_or<std::string>(*r, "endpoint", p, "");
    c.retrieval.top_k = positive(*r, "top_k", p, 10);
    c.retrieval.no_summary_top_k = positive(*r, "no_summary_top_k", p, 3);
    c.retrieval.bm25_k1 = get_or<double>(*r, "bm25_k1", p, 0.9);
    c.retrieval.bm25_b = get_or<double>(*r, "bm25_b", p, 0.4);
    if (const auto* s = child(*r, "summarizer")) {
      c.retrieval.summarize = get_or<bool>(*s, "enabled", p + "summarizer.", true);
      if (c.retrieval.summarize) c.retrieval.summarizer = parse_backend(*s, p + "summarizer.", base_dir);
    } else {
      c.retrieval.summarize = false;
    }
    if (const auto* o = child(*r, "online")) {
      const std::string op = p + "online.";
      c.retrieval.online_enabled = get_or<bool>(*o, "enabled", op, false);
      c.retrieval.search_endpoint = get_or<std::string>(*o, "search_endpoint", op, "");
      c.retrieval.search_api_key_env = get_or<std::string>(*o, "api_key_env", op, "");
      c.retrieval.converter_endpoint = get_or<std::string>(*o, "converter_endpoint", op, "");
      if (c.retrieval.online_enabled && c.retrieval.search_endpoint.empty())
        invalid(op + "search_endpoint", "is required when online retrieval is enabled");
    }
    if (c.retrieval.endpoint.empty() && c.retrieval.corpus_path.empty())
      invalid("retrieval.corpus_path", "is required unless retrieval.endpoint is set");
  }

  if (const auto* jd = child(j, "judge")) c.judge = parse_backend(*jd, "judge.", base_dir);

  if (const auto* rw = child(j, "reward")) {
    auto name = get_or<std::string>(*rw, "preset", "reward.", "Default7B");
    try {
      c.preset = rewards::parse_preset(name);
    } catch (const Error&) {
      invalid("reward.preset", "unknown preset \"" + name + "\"");
    }
    c.small_model = get_or<bool>(*rw, "small_model", "reward.", false);
    if (child(*rw, "warm_steps")) c.warm_steps = get_or<std::size_t>(*rw, "warm_steps", "reward.", 10);
  }

  if (const auto* cur = child(j, "curriculum")) {
    c.data = resolve(base_dir, get_or<std::string>(*cur, "path", "curriculum.", ""));
  }
  if (c.data.empty()) c.data = resolve(base_dir, get_or<std::string>(j, "questions", "", ""));
  if (c.data.empty()) invalid("curriculum.path", "is required");

  if (const auto* b = child(j, "budgets")) {
    for (auto f : {TaskFamily::Math, TaskFamily::OpenQa, TaskFamily::Mcq}) {
      const std::string key(to_string(f));
      if (const auto* fb = child(*b, key.c_str()))
        c.budgets[f] = parse_budget(*fb, "budgets." + key + ".", rollout::RolloutBudget::for_family(f));
    }
  }

  if (const auto* s = child(j, "seeds")) {
    c.rollout_seed = get_or<std::int64_t>(*s, "rollout", "seeds.", 0);
    c.sample_seed = get_or<std::uint64_t>(*s, "sample", "seeds.", 0);
  }

  if (const auto* r = child(j, "run")) {
    const std::string p = "run.";
    if (child(*r, "steps")) c.run.steps = positive(*r, "steps", p, 0);
    c.run.questions_per_step = positive(*r, "questions_per_step", p, c.run.questions_per_step);
    c.run.group_size = positive(*r, "group_size", p, c.run.group_size);
    if (c.run.group_size < 2) invalid("run.group_size", "must be at least 2");
    c.run.workers = positive(*r, "workers", p, c.run.workers);
    c.run.eps = get_or<double>(*r, "eps", p, c.run.eps);
    if (!(c.run.eps > 0.0)) invalid("run.eps", "must be > 0");
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = json_io::read_json(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
  return parse_config(j, path.parent_path());
}

std::shared_ptr<gateway::Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "scripted") return gateway::ScriptedBackend::load(cfg.script);
  auto remote = cfg.remote;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key) throw Error(ErrorKind::ConfigInvalid, "environment variable " + cfg.api_key_env + " is not set");
    remote.api_key = key;
  }
  return std::make_shared<gateway::RemoteBackend>(remote);
}

std::shared_ptr<retrieval::RetrievalService> make_retrieval_service(const RetrievalConfig& cfg) {
  retrieval::Bm25Params params{cfg.bm25_k1, cfg.bm25_b};
  auto index = std::make_shared<const retrieval::CorpusIndex>(
      retrieval::CorpusIndex::build(retrieval::read_corpus_jsonl(cfg.corpus_path), params));
  std::shared_ptr<gateway::Backend> summarizer;
  if (cfg.summarize && cfg.summarizer) summarizer = make_backend(*cfg.summarizer);
  retrieval::ServiceConfig sc;
  sc.top_k = cfg.top_k;
  sc.summarize = cfg.summarize;
  sc.no_summary_top_k = cfg.no_summary_top_k;
  std::shared_ptr<online::OnlineFetcher> fetcher;
  if (cfg.online_enabled) {
    std::string key;
    if (!cfg.search_api_key_env.empty())
      if (const char* k = std::getenv(cfg.search_api_key_env.c_str())) key = k;
    std::shared_ptr<online::HtmlConverter> converter;
    if (cfg.converter_endpoint.empty()) converter = std::make_shared<online::RuleBasedConverter>();
    else converter = std::make_shared<online::RemoteConverter>(cfg.converter_endpoint);
    fetcher = std::make_shared<online::OnlineFetcher>(
        std::make_shared<online::HttpSearchApi>(cfg.search_endpoint, key),
        std::make_shared<online::HttpPageFetcher>(), std::move(converter));
  }
  return std::make_shared<retrieval::RetrievalService>(std::move(index), std::move(summarizer), sc,
                                                       nullptr, std::move(fetcher));
}

std::shared_ptr<retrieval::RetrievalClient> make_retrieval(const RetrievalConfig& cfg) {
  if (!cfg.endpoint.empty()) return std::make_shared<retrieval::HttpRetrievalClient>(cfg.endpoint);
  if (cfg.corpus_path.empty()) return nullptr;
  return make_retrieval_service(cfg);
}

std::vector<DataItem> read_data(const fs::path& path) {
  std::vector<DataItem> out;
  for (const auto& j : json_io::read_jsonl(path)) {
    DataItem d;
    d.question = question_from_json(j);
    if (j.contains("prompt_mode")) {
      try {
        d.mode = parse_prompt_mode(j.at("prompt_mode").get<std::string>());
      } catch (const std::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, path.string() + ": " + e.what());
      }
    }
    if (j.contains("bucket") && j.at("bucket") == "filtered") continue;
    out.push_back(std::move(d));
  }
  return out;
}

void write_items(const fs::path& path, const std::vector<curriculum::CurriculumItem>& items) {
  std::vector<nlohmann::json> lines;
  for (const auto& it : items) lines.push_back(curriculum::to_json(it));
  json_io::write_jsonl(path, lines);
}

std::vector<curriculum::CurriculumItem> read_items(const fs::path& path) {
  std::vector<curriculum::CurriculumItem> out;
  for (const auto& j : json_io::read_jsonl(path)) out.push_back(curriculum::item_from_json(j));
  return out;
}

void write_groups(const fs::path& path, const std::vector<rollout::RolloutGroup>& groups) {
  std::vector<nlohmann::json> lines;
  for (const auto& g : groups) lines.push_back(rollout::to_json(g));
  json_io::write_jsonl(path, lines);
}

std::vector<rollout::RolloutGroup> read_groups(const fs::path& path) {
  std::vector<rollout::RolloutGroup> out;
  for (const auto& j : json_io::read_jsonl(path)) out.push_back(rollout::group_from_json(j));
  return out;
}

nlohmann::json breakdown_record(const std::string& question_id, std::size_t group_index,
                                const rewards::RewardBreakdown& b, const rewards::RewardConfig& cfg) {
  auto j = rewards::to_json(b);
  j["question_id"] = question_id;
  j["group_index"] = group_index;
  j["stage"] = static_cast<int>(cfg.stage);
  j["preset"] = std::string(rewards::to_string(cfg.preset));
  return j;
}

std::vector<credit::ScoredGroup> score_groups(const std::vector<rollout::RolloutGroup>& groups,
                                              const std::map<std::string, std::string>& gold,
                                              const rewards::RewardConfig& cfg, std::size_t step) {
  std::vector<credit::ScoredGroup> out;
  for (const auto& g : groups) {
    if (!g.complete) continue;
    std::string answer;
    if (auto it = gold.find(g.question_id); it != gold.end()) answer = it->second;
    credit::ScoredGroup sg{g, {}};
    for (const auto& t : g.transcripts) sg.rewards.push_back(rewards::score(t, answer, cfg, step).total);
    out.push_back(std::move(sg));
  }
  return out;
}

std::string RunManifest::content_hash() const {
  auto j = to_json();
  j.erase("started_at");
  j.erase("finished_at");
  j.erase("workers");
  j.erase("manifest_hash");
  return hash::sha256_hex(json_io::canonical_dump(j));
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j = {{"config", config},
                      {"stage", static_cast<int>(stage)},
                      {"preset", std::string(rewards::to_string(preset))},
                      {"seeds", seeds},
                      {"inputs", inputs},
                      {"outputs", outputs},
                      {"steps", steps},
                      {"questions_per_step", questions_per_step},
                      {"group_size", group_size},
                      {"workers", workers},
                      {"epochs", epochs},
                      {"excluded_groups", excluded_groups},
                      {"status", status},
                      {"error", error},
                      {"started_at", started_at},
                      {"finished_at", finished_at}};
  return j;
}

RunManifest run_stage(rewards::Stage stage, const PipelineConfig& cfg, const StageOptions& options) {
  if (options.out_dir.empty()) throw Error(ErrorKind::InvalidArgument, "run_stage needs an output directory");
  RunManifest m;
  m.config = cfg.raw;
  m.stage = stage;
  m.preset = cfg.preset;
  m.seeds = {{"rollout", cfg.rollout_seed}, {"sample", static_cast<std::int64_t>(cfg.sample_seed)}};
  m.questions_per_step = cfg.run.questions_per_step;
  m.group_size = cfg.run.group_size;
  m.workers = options.workers.value_or(cfg.run.workers);
  m.started_at = utc_now();

  const fs::path batch_dir = options.out_dir / "batches";
  auto write_manifest = [&] {
    auto j = m.to_json();
    j["manifest_hash"] = m.content_hash();
    json_io::write_text(options.out_dir / "manifest.json", j.dump(2) + "\n");
  };

  try {
    m.inputs["data"] = blob_of(cfg.data);
    if (cfg.gateway.kind == "scripted") m.inputs["gateway_script"] = blob_of(cfg.gateway.script);
    if (!cfg.retrieval.corpus_path.empty() && cfg.retrieval.endpoint.empty())
      m.inputs["corpus"] = blob_of(cfg.retrieval.corpus_path);
    if (cfg.retrieval.summarizer && cfg.retrieval.summarizer->kind == "scripted")
      m.inputs["summarizer_script"] = blob_of(cfg.retrieval.summarizer->script);

    auto data = read_data(cfg.data);
    if (data.empty()) throw Error(ErrorKind::ConfigInvalid, "curriculum.path: no usable questions");
    std::map<std::string, std::string> gold;
    for (const auto& d : data) gold[d.question.question_id] = d.question.gold;

    const auto per_step = cfg.run.questions_per_step;
    std::size_t steps = options.steps.value_or(cfg.run.steps);
    if (steps == 0)
      steps = stage == rewards::Stage::One ? 10 : (data.size() + per_step - 1) / per_step;
    m.steps = steps;
    m.epochs = static_cast<double>(steps * per_step) / static_cast<double>(data.size());

    rollout::RolloutOptions ro;
    ro.sampling = gateway::SamplingParams::training();
    ro.top_k = cfg.retrieval.top_k;
    ro.summary_mode = prompts::SummaryMode::Train;
    ro.workers = m.workers;
    rollout::RolloutRunner runner(make_backend(cfg.gateway), make_retrieval(cfg.retrieval), ro);
    const auto reward_cfg = cfg.reward_config(stage);
    reward_cfg.validate();

    fs::remove_all(batch_dir);
    fs::create_directories(batch_dir);
    std::vector<std::size_t> order;
    std::size_t order_epoch = static_cast<std::size_t>(-1);
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<rollout::RolloutTask> tasks;
      for (std::size_t k = 0; k < per_step; ++k) {
        const std::size_t pos = step * per_step + k;
        const std::size_t epoch = pos / data.size();
        if (epoch != order_epoch) {
          order.resize(data.size());
          for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
          curriculum::Rng(cfg.sample_seed + epoch).shuffle(order);
          order_epoch = epoch;
        }
        const auto& d = data[order[pos % data.size()]];
        rollout::RolloutTask task;
        task.question = d.question;
        task.mode = stage == rewards::Stage::One ? PromptMode::Retrieval : d.mode;
        task.budget = cfg.budget_for(d.question.task_family);
        tasks.push_back(std::move(task));
      }
      const auto step_seed = cfg.rollout_seed + static_cast<std::int64_t>(step * per_step * cfg.run.group_size);
      auto groups = runner.run_groups(tasks, cfg.run.group_size, step_seed);
      for (const auto& g : groups) m.excluded_groups += g.complete ? 0 : 1;
      auto scored = score_groups(groups, gold, reward_cfg, step);
      auto batch = credit::compute_advantages(scored, cfg.run.eps,
                                              {static_cast<int>(stage), std::string(rewards::to_string(cfg.preset))});
      char name[32];
      std::snprintf(name, sizeof name, "step_%03zu.jsonl", step);
      credit::emit_batch(batch, batch_dir / name);
      m.outputs[name] = blob_of(batch_dir / name);
    }
  } catch (const std::exception& e) {
    m.status = "failed";
    m.error = e.what();
    m.finished_at = utc_now();
    write_manifest();
    throw;
  }
  m.finished_at = utc_now();
  write_manifest();
  return m;
}

}  // namespace ragrl::pipeline
