// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per primary criterion. Tolerances and
// runtime budgets are pinned here; the exit status is nonzero if any fail.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragrl/corpus_index.hpp"
#include "ragrl/credit.hpp"
#include "ragrl/curriculum.hpp"
#include "ragrl/evalkit.hpp"
#include "ragrl/gateway.hpp"
#include "ragrl/json_io.hpp"
#include "ragrl/lru_cache.hpp"
#include "ragrl/online.hpp"
#include "ragrl/pipeline.hpp"
#include "ragrl/protocol.hpp"
#include "ragrl/rate_limiter.hpp"
#include "ragrl/retrieval_service.hpp"
#include "ragrl/rewards.hpp"
#include "ragrl/rollout.hpp"
#include "testkit.hpp"

using namespace ragrl;
namespace tk = ragrl::testkit;

namespace {

constexpr double kAdvTol = 1e-9;
constexpr double kScaleTol = 1e-6;
constexpr double kMetricTol = 1e-12;
constexpr double kScoreTol = 1e-12;

/// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::ostringstream out;
    out << checks_ << " checks";
    if (failures_) {
      out << ", " << failures_ << " failed";
      for (const auto& n : notes_) out << "; " << n;
    }
    return out.str();
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------

void reward_table(Check& c) {
  using namespace rewards;
  const auto t = tk::two_query_transcript(TaskFamily::Math, "42");
  const std::pair<Preset, double> want[] = {
      {Preset::Default7B, 5.0}, {Preset::Small3B, 8.0}, {Preset::Llama8B, 4.0}, {Preset::McqWeak, 2.0}};
  for (auto [preset, total] : want) {
    auto got = score(t, "42", RewardConfig::make(Stage::One, preset)).total;
    c.expect(got == total, std::string(to_string(preset)) + " stage 1 total " + fmt(got));
  }
  auto s2 = score(t, "42", RewardConfig::make(Stage::Two, Preset::Default7B)).total;
  c.expect(s2 == 3.0, "stage 2 correct-compliant total " + fmt(s2));
}

// ---------------------------------------------------------------------------

std::vector<double> flatten(const std::vector<std::vector<double>>& v) {
  std::vector<double> out;
  for (const auto& g : v) out.insert(out.end(), g.begin(), g.end());
  return out;
}

void advantage_suite(Check& c) {
  tk::Engine rng(1000);
  std::uniform_int_distribution<int> group_size(2, 16), batch_groups(1, 12), level(-6, 10);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::size_t groups_seen = 0;
  int batch_no = 0;
  while (groups_seen < 1000) {
    ++batch_no;
    std::vector<std::vector<double>> rewards(static_cast<std::size_t>(batch_groups(rng)));
    std::vector<bool> flat(rewards.size());
    for (std::size_t g = 0; g < rewards.size(); ++g) {
      rewards[g].resize(static_cast<std::size_t>(group_size(rng)));
      flat[g] = rng() % 6 == 0;
      const double base = level(rng) * 0.5;
      for (auto& r : rewards[g]) r = flat[g] ? base : level(rng) * 0.5;
      flat[g] = std::all_of(rewards[g].begin(), rewards[g].end(), [&](double r) { return r == rewards[g][0]; });
    }
    groups_seen += rewards.size();
    const std::string tag = "batch " + std::to_string(batch_no);

    auto adv = credit::normalize_advantages(rewards);
    bool any_live = false;
    for (std::size_t g = 0; g < rewards.size(); ++g) {
      double sum = 0;
      for (double a : adv[g]) sum += a;
      c.expect(std::abs(sum) < kAdvTol, tag + " group sum " + fmt(sum));
      if (flat[g]) {
        c.expect(std::all_of(adv[g].begin(), adv[g].end(), [](double a) { return a == 0.0; }),
                 tag + " zero-variance group not all zero");
        continue;
      }
      any_live = true;
      for (std::size_t i = 0; i < rewards[g].size(); ++i)
        for (std::size_t j = 0; j < rewards[g].size(); ++j)
          if (rewards[g][i] < rewards[g][j]) c.expect(adv[g][i] < adv[g][j], tag + " rank order broken");
    }
    if (any_live) {
      auto stats = credit::population_stats(flatten(adv));
      c.expect(std::abs(stats.mean) < kAdvTol, tag + " batch mean " + fmt(stats.mean));
      c.expect(std::abs(stats.std - 1.0) < kAdvTol, tag + " batch std " + fmt(stats.std));
    }

    const double k = scale(rng);
    auto scaled_rewards = rewards;
    for (auto& g : scaled_rewards)
      for (auto& r : g) r *= k;
    auto scaled = credit::normalize_advantages(scaled_rewards);
    double worst = 0;
    for (std::size_t g = 0; g < adv.size(); ++g)
      for (std::size_t i = 0; i < adv[g].size(); ++i) worst = std::max(worst, std::abs(adv[g][i] - scaled[g][i]));
    c.expect(worst < kScaleTol, tag + " rescale by " + fmt(k) + " moved advantages by " + fmt(worst));
  }
}

// ---------------------------------------------------------------------------

void masking_totality(Check& c) {
  tk::Engine rng(200);
  for (int i = 0; i < 200; ++i) {
    const auto family = static_cast<TaskFamily>(i % 3);
    const std::string prompt = "Question: item " + std::to_string(i) + "\nThink and answer.\n";
    auto r = tk::random_response(rng, family);
    auto t = parse_transcript(r, family, PromptMode::Retrieval, prompt);
    attach_tokens(t, gateway::whitespace_tokenize);
    const std::string tag = "transcript " + std::to_string(i);

    auto mask = credit::build_action_mask(t);
    for (const auto& s : t.segments) {
      const std::uint8_t want = (s.kind == SegmentKind::ModelText || s.kind == SegmentKind::Query) ? 1 : 0;
      for (auto k = s.token_span.begin; k < s.token_span.end; ++k)
        c.expect(mask.at(k) == want, tag + " token " + std::to_string(k) + " in " + std::string(to_string(s.kind)));
    }
    bool straddles = false, mismatch = false;
    c.expect(mask == tk::span_walk_mask(r, t.response_tokens, &straddles, &mismatch), tag + " span-walk disagrees");
    c.expect(!straddles && !mismatch, tag + " token boundaries straddle a block");

    credit::TrajectoryRecord rec;
    for (const auto& tok : t.prompt_tokens) rec.prompt_tokens.push_back(tok.id);
    for (const auto& tok : t.response_tokens) rec.response_tokens.push_back(tok.id);
    rec.action_mask = mask;
    auto full = credit::full_sequence_mask(rec);
    c.expect(full.size() == rec.prompt_tokens.size() + mask.size(), tag + " full mask length");
    c.expect(std::all_of(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(rec.prompt_tokens.size()),
                         [](std::uint8_t m) { return m == 0; }),
             tag + " prompt token unmasked");
  }
}

// ---------------------------------------------------------------------------

class NotesRetrieval final : public retrieval::RetrievalClient {
 public:
  retrieval::RetrievalResult retrieve(const retrieval::RetrievalRequest& req) override {
    retrieval::RetrievalResult r;
    r.query = req.query;
    r.payload = "notes on " + req.query;
    return r;
  }
};

void protocol_conformance(Check& c) {
  tk::Engine rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto family = static_cast<TaskFamily>(i % 3);
    const auto r = tk::random_response(rng, family);
    auto t = parse_transcript(r, family, PromptMode::Retrieval, "P: ");
    attach_tokens(t, gateway::whitespace_tokenize);
    const std::string tag = "fuzz " + std::to_string(i);
    c.expect(t.response_text() == r, tag + " response round trip");
    auto back = rollout::transcript_from_json(nlohmann::json::parse(json_io::canonical_dump(rollout::to_json(t))));
    c.expect(back.full_text() == "P: " + r, tag + " json round trip");
  }

  auto retrieval = std::make_shared<NotesRetrieval>();
  for (auto family : {TaskFamily::Math, TaskFamily::Mcq, TaskFamily::OpenQa}) {
    const std::size_t cap = family == TaskFamily::OpenQa ? 5 : 4;
    for (std::size_t n = 1; n <= 8; ++n) {
      auto backend = std::make_shared<gateway::ScriptedBackend>();
      std::string script;
      for (std::size_t q = 0; q < n; ++q)
        script += "step " + std::string(protocol::kBeginQuery) + " fact number " + std::to_string(q) + " " +
                  std::string(protocol::kEndQuery) + "\n";
      script += tk::answer_line(family, "C");
      backend->set_default(script);
      rollout::RolloutRunner runner(backend, retrieval);
      auto t = runner.run_rollout("P: ", family, PromptMode::Retrieval, rollout::RolloutBudget::for_family(family), 0);
      const auto injected = t.count(SegmentKind::InjectedDocs);
      c.expect(injected == std::min(n, cap), std::string(to_string(family)) + " with " + std::to_string(n) +
                                                 " queries injected " + std::to_string(injected));
      c.expect(t.count(SegmentKind::Query) == n, "query count changed");
    }
  }

  for (const auto& cs : json_io::read_jsonl(tk::fixture("violation_cases.jsonl"))) {
    const auto family = parse_task_family(cs.at("task_family").get<std::string>());
    auto t = parse_transcript(cs.at("response").get<std::string>(), family,
                              parse_prompt_mode(cs.at("prompt_mode").get<std::string>()));
    auto rep = validate_format(t, FormatLimits::for_family(family));
    std::vector<std::string> got;
    for (auto v : rep.violations) got.emplace_back(to_string(v));
    auto want = cs.at("expected").get<std::vector<std::string>>();
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    c.expect(got == want, "case " + cs.at("id").get<std::string>());
  }
}

// ---------------------------------------------------------------------------

curriculum::CurriculumItem citem(const std::string& id, double s, TaskFamily f) {
  curriculum::CurriculumItem it;
  it.question = {id, "text", "A", f};
  it.score_s = s;
  it.bucket = curriculum::bucket(s);
  return it;
}

void curriculum_check(Check& c) {
  using curriculum::Bucket;
  const std::pair<double, Bucket> edges[] = {{0.2, Bucket::Hard},
                                             {std::nextafter(0.2, 0.0), Bucket::Filtered},
                                             {0.5, Bucket::Medium},
                                             {std::nextafter(0.5, 0.0), Bucket::Hard},
                                             {0.8, Bucket::Easy},
                                             {std::nextafter(0.8, 0.0), Bucket::Medium},
                                             {1.0, Bucket::Easy}};
  for (auto [s, b] : edges) c.expect(curriculum::bucket(s) == b, "bucket(" + fmt(s) + ")");

  std::vector<curriculum::CurriculumItem> pool;
  for (int i = 0; i < 900; ++i) pool.push_back(citem("h" + std::to_string(i), 0.2 + 0.001 * (i % 300), TaskFamily::Math));
  for (int i = 0; i < 300; ++i) pool.push_back(citem("m" + std::to_string(i), 0.5 + 0.001 * (i % 300), TaskFamily::Math));
  for (int i = 0; i < 150; ++i) pool.push_back(citem("e" + std::to_string(i), 0.8 + 0.001 * (i % 200), TaskFamily::Math));
  for (int i = 0; i < 400; ++i) pool.push_back(citem("f" + std::to_string(i), 0.0005 * i, TaskFamily::Math));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto sample = curriculum::sample_epoch(pool, 1000, seed);
    std::map<Bucket, std::size_t> n;
    for (const auto& it : sample) ++n[curriculum::bucket(it.score_s)];
    const std::string tag = "seed " + std::to_string(seed);
    c.expect(sample.size() == 1000, tag + " sample size");
    c.expect(n[Bucket::Hard] == 700 && n[Bucket::Medium] == 200 && n[Bucket::Easy] == 100,
             tag + " mix " + std::to_string(n[Bucket::Hard]) + "/" + std::to_string(n[Bucket::Medium]) + "/" +
                 std::to_string(n[Bucket::Easy]));
    c.expect(n[Bucket::Filtered] == 0, tag + " sampled a filtered item");
  }

  std::vector<curriculum::CurriculumItem> mcq;
  for (int i = 0; i < 600; ++i) mcq.push_back(citem("hard" + std::to_string(i), 0.35, TaskFamily::Mcq));
  for (int i = 0; i < 400; ++i) mcq.push_back(citem("rest" + std::to_string(i), 0.65, TaskFamily::Mcq));
  curriculum::apply_mixing(mcq, 17);
  std::size_t retrieval = 0;
  for (const auto& it : mcq) retrieval += it.prompt_mode == PromptMode::Retrieval;
  c.expect(retrieval == 500, "mcq mixing retrieval:direct = " + std::to_string(retrieval) + ":" +
                                 std::to_string(mcq.size() - retrieval));
}

// ---------------------------------------------------------------------------

class FixedSummarizer final : public gateway::Backend {
 public:
  explicit FixedSummarizer(std::string reply) : reply_(std::move(reply)) {}
  gateway::GenerationChunk generate(const gateway::GenerationRequest&) override {
    return {reply_, {}, gateway::FinishReason::EndOfText};
  }
  std::vector<Token> tokenize(std::string_view s) const override { return gateway::whitespace_tokenize(s); }

 private:
  std::string reply_;
};

/// Hands out fresh urls and records when each search call was admitted.
class TimedSearch final : public online::SearchApi {
 public:
  explicit TimedSearch(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {}
  std::vector<std::string> search(std::string_view, std::size_t count, std::size_t) override {
    std::lock_guard lock(mu_);
    stamps.push_back(clock_->now());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back("https://example.test/" + std::to_string(next_++));
    return out;
  }
  std::vector<Clock::time_point> stamps;

 private:
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::size_t next_ = 0;
};

class EchoFetcher final : public online::PageFetcher {
 public:
  std::optional<std::string> fetch(const std::string& url) override { return "<p>" + url + "</p>"; }
};

void retrieval_service(Check& c) {
  tk::Engine rng(100);
  for (int corpus = 0; corpus < 100; ++corpus) {
    const std::size_t n = 1 + rng() % 1000;
    auto chunks = tk::random_corpus(rng, n);
    auto index = retrieval::CorpusIndex::build(chunks);
    for (int q = 0; q < 3; ++q) {
      const auto query = tk::random_query(rng);
      const std::size_t k = 1 + rng() % 10;
      auto scores = tk::bm25_oracle(chunks, query, 0.9, 0.4);
      auto want = tk::oracle_top_k(chunks, scores, k);
      auto got = retrieval::search(index, query, k);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < want.size(); ++i)
        same = got[i].chunk.chunk_id == chunks[want[i]].chunk_id && std::abs(got[i].score - scores[want[i]]) < kScoreTol;
      c.expect(same, "corpus " + std::to_string(corpus) + " (" + std::to_string(n) + " chunks) query '" + query + "'");
    }
  }

  {
    LruCache<std::string, std::string> cache(10000);
    bool bounded = true;
    for (int i = 0; i < 10001; ++i) {
      cache.put("u" + std::to_string(i), "x");
      bounded = bounded && cache.size() <= 10000;
    }
    c.expect(bounded && cache.size() == 10000, "LRU grew past capacity");

    auto clock = std::make_shared<ManualClock>();
    online::OnlineConfig cfg;
    cfg.workers = 8;
    online::OnlineFetcher fetcher(std::make_shared<TimedSearch>(clock), std::make_shared<EchoFetcher>(),
                                  std::make_shared<online::RuleBasedConverter>(), cfg, clock);
    auto res = fetcher.fetch_online("bulk", 10001);
    c.expect(res.documents.size() == 10001, "bulk crawl returned " + std::to_string(res.documents.size()));
    c.expect(fetcher.cache_size() == 10000, "page cache holds " + std::to_string(fetcher.cache_size()));
  }

  {
    auto clock = std::make_shared<ManualClock>();
    auto search = std::make_shared<TimedSearch>(clock);
    online::OnlineConfig cfg;
    cfg.workers = 1;
    online::OnlineFetcher fetcher(search, std::make_shared<EchoFetcher>(), std::make_shared<online::RuleBasedConverter>(),
                                  cfg, clock);
    std::vector<std::thread> burst;
    std::atomic<int> issued{0};
    for (int t = 0; t < 10; ++t)
      burst.emplace_back([&] {
        while (issued.fetch_add(1) < 500) fetcher.fetch_online("burst", 1);
      });
    for (auto& t : burst) t.join();
    auto stamps = search->stamps;
    std::sort(stamps.begin(), stamps.end());
    std::size_t worst = 0, lo = 0;
    for (std::size_t hi = 0; hi < stamps.size(); ++hi) {
      while (stamps[hi] - stamps[lo] >= std::chrono::seconds(1)) ++lo;
      worst = std::max(worst, hi - lo + 1);
    }
    c.expect(stamps.size() == 500, "burst issued " + std::to_string(stamps.size()) + " searches");
    c.expect(worst <= 95, "rate limiter admitted " + std::to_string(worst) + " calls in one second");
  }

  auto index = std::make_shared<const retrieval::CorpusIndex>(
      retrieval::CorpusIndex::build(retrieval::read_corpus_jsonl(tk::fixture("corpus.jsonl"))));
  for (const auto& cs : json_io::read_jsonl(tk::fixture("fallback_cases.jsonl"))) {
    retrieval::RetrievalService svc(index, std::make_shared<FixedSummarizer>(cs.at("summarizer_response").get<std::string>()));
    retrieval::RetrievalRequest req;
    req.query = "capital of France";
    const bool got = svc.retrieve(req).is_fallback;
    c.expect(got == cs.at("expected_fallback").get<bool>(), "fallback case " + cs.at("id").get<std::string>());
  }
}

// ---------------------------------------------------------------------------

void metrics(Check& c) {
  tk::Engine rng(10000);
  std::uniform_int_distribution<std::size_t> len(0, 15);
  for (int i = 0; i < 10000; ++i) {
    auto p = tk::random_words(rng, len(rng));
    auto g = tk::random_words(rng, len(rng));
    const double got = evalkit::token_f1(p, g), want = tk::multiset_f1(p, g);
    c.expect(std::abs(got - want) <= kMetricTol, "f1('" + p + "', '" + g + "') = " + fmt(got) + " vs " + fmt(want));
  }
  struct Case {
    const char* pred;
    const char* gold;
    double em;
    double f1;
  };
  const Case cases[] = {{"The Ninth Gate", "ninth gate", 1.0, 1.0},
                        {"paris france", "paris", 0.0, 2.0 / 3.0},
                        {"Roman Polanski", "Polanski", 0.0, 2.0 / 3.0},
                        {"an apple a day", "the Apple!", 0.0, 2.0 / 3.0},
                        {"1889", "1889", 1.0, 1.0},
                        {"red blue", "green", 0.0, 0.0},
                        {"", "", 0.0, 1.0}};
  for (const auto& cs : cases) {
    const double em = evalkit::exact_match(cs.pred, cs.gold, TaskFamily::OpenQa);
    const double f1 = evalkit::token_f1(cs.pred, cs.gold);
    c.expect(std::abs(em - cs.em) <= kMetricTol, std::string("em('") + cs.pred + "')");
    c.expect(std::abs(f1 - cs.f1) <= kMetricTol, std::string("f1('") + cs.pred + "') = " + fmt(f1));
  }
  c.expect(evalkit::exact_match("(b)", "B") == 1.0, "mcq letter em");
}

// ---------------------------------------------------------------------------

void end_to_end(Check& c) {
  auto cfg = pipeline::load_config(tk::fixture("pipeline.json"));
  tk::TempDir dir("ragrl-e2e");
  pipeline::run_stage(rewards::Stage::One, cfg, {dir / "run_a", std::nullopt, 2});
  pipeline::run_stage(rewards::Stage::One, cfg, {dir / "run_b", std::nullopt, 2});
  pipeline::run_stage(rewards::Stage::One, cfg, {dir / "w1", std::size_t{1}, 2});
  pipeline::run_stage(rewards::Stage::One, cfg, {dir / "w8", std::size_t{8}, 2});
  auto batch = credit::load_batch(dir / "run_a" / "batches" / "step_000.jsonl");
  c.expect(batch.size() == 6 * 4, "first batch has " + std::to_string(batch.size()) + " records");
  c.expect(tk::same_tree(dir / "run_a" / "batches", dir / "run_b" / "batches"), "repeat run differs");
  c.expect(tk::same_tree(dir / "w1" / "batches", dir / "w8" / "batches"), "workers 1 vs 8 differ");
  c.expect(tk::same_tree(dir / "run_a" / "batches", dir / "w8" / "batches"), "default workers vs 8 differ");
}

struct Criterion {
  const char* name;
  std::function<void(Check&)> body;
  /// Wall-clock budget in seconds; 0 means unbounded.
  double budget_s;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"reward-table", reward_table, 1.0},
      {"advantage-suite", advantage_suite, 10.0},
      {"masking-totality", masking_totality, 0.0},
      {"protocol-conformance", protocol_conformance, 0.0},
      {"curriculum", curriculum_check, 0.0},
      {"retrieval-service", retrieval_service, 60.0},
      {"metrics", metrics, 0.0},
      {"end-to-end-determinism", end_to_end, 30.0},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    std::string crash;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      crash = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = cr.budget_s <= 0.0 || secs < cr.budget_s;
    const bool pass = crash.empty() && check.ok() && in_budget;
    failed += !pass;
    std::string detail = check.summary();
    if (!crash.empty()) detail += "; threw: " + crash;
    if (!in_budget) detail += "; over the " + fmt(cr.budget_s) + " s budget";
    std::printf("%s %-24s %8.3fs  %s\n", pass ? "PASS" : "FAIL", cr.name, secs, detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
