// SPDX-License-Identifier: Apache-2.0
#include "ragrl/rollout.hpp"

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/parallel.hpp"

namespace ragrl::rollout {

RolloutBudget RolloutBudget::for_family(TaskFamily f) {
  RolloutBudget b;
  b.max_queries = FormatLimits::for_family(f).max_queries;
  switch (f) {
    case TaskFamily::Math: b.max_tokens_per_turn = 3072; break;
    case TaskFamily::Mcq: b.max_tokens_per_turn = 1536; break;
    case TaskFamily::OpenQa: b.max_tokens_per_turn = 512; break;
  }
  b.max_turns = b.max_queries + 2;
  return b;
}

void RolloutBudget::validate() const {
  if (max_queries == 0 || max_tokens_per_turn == 0 || max_turns == 0)
    throw Error(ErrorKind::InvalidArgument, "rollout budget fields must be positive");
  if (max_turns < max_queries + 1)
    throw Error(ErrorKind::InvalidArgument, "max_turns must be at least max_queries + 1");
}

RolloutRunner::RolloutRunner(std::shared_ptr<gateway::Backend> backend,
                             std::shared_ptr<retrieval::RetrievalClient> retrieval,
                             RolloutOptions options)
    : backend_(std::move(backend)), retrieval_(std::move(retrieval)), options_(options) {
  if (!backend_) throw Error(ErrorKind::InvalidArgument, "rollout runner needs a backend");
}

namespace {

/// The query that the latest turn stopped on, if the response ends with one.
const Segment* trailing_query(const Transcript& t) {
  if (t.segments.empty()) return nullptr;
  const auto& last = t.segments.back();
  if (last.kind != SegmentKind::Query || !last.well_formed) return nullptr;
  return &last;
}

}  // namespace

Transcript RolloutRunner::run_rollout(const std::string& prompt, TaskFamily family, PromptMode mode,
                                      const RolloutBudget& budget, std::int64_t seed,
                                      const std::string& correlation) const {
  budget.validate();
  const bool retrieving = mode == PromptMode::Retrieval;
  if (retrieving && !retrieval_)
    throw Error(ErrorKind::InvalidArgument, "retrieval-mode rollout without a retrieval client");

  std::string response;
  std::size_t injected = 0;
  int failures = 0;
  for (std::size_t turn = 0; turn < budget.max_turns; ++turn) {
    gateway::GenerationRequest req;
    req.context = prompt + response;
    req.prompt_chars = prompt.size();
    if (retrieving && injected < budget.max_queries)
      req.stop_sequences.emplace_back(protocol::kEndQuery);
    req.max_new_tokens = budget.max_tokens_per_turn;
    req.temperature = options_.sampling.temperature;
    req.top_p = options_.sampling.top_p;
    req.seed = seed;
    req.correlation_id = correlation + "#" + std::to_string(turn);

    auto chunk = backend_->generate(req);
    response += chunk.text;
    if (chunk.finish_reason != gateway::FinishReason::Stop || !retrieving) break;
    if (injected >= budget.max_queries) continue;

    auto parsed = parse_transcript(response, family, mode);
    const Segment* query = trailing_query(parsed);
    if (!query) continue;

    retrieval::RetrievalRequest rr;
    rr.query = std::string(query->body());
    rr.prev_reasoning = response.substr(0, response.size() - query->text.size());
    rr.k = options_.top_k;
    rr.mode = options_.summary_mode;
    rr.family = family;
    try {
      auto result = retrieval_->retrieve(rr);
      response += protocol::wrap_documents(result.payload);
      if (result.is_fallback) response += protocol::kFallbackNotice;
      ++injected;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RetrievalUnavailable) throw;
      ++failures;
    }
  }

  auto t = parse_transcript(response, family, mode, prompt);
  attach_tokens(t, backend_->tokenizer());
  t.retrieval_failures = failures;
  return t;
}

RolloutGroup RolloutRunner::run_group(const Question& q, PromptMode mode, const RolloutBudget& budget,
                                      std::size_t g, std::int64_t seed) const {
  auto groups = run_groups({RolloutTask{q, mode, budget}}, g, seed);
  return std::move(groups.front());
}

std::vector<RolloutGroup> RolloutRunner::run_groups(const std::vector<RolloutTask>& tasks,
                                                    std::size_t g, std::int64_t seed) const {
  if (g < 2) throw Error(ErrorKind::GroupTooSmall, "group size must be >= 2, got " + std::to_string(g));
  std::vector<std::string> prompts(tasks.size());
  std::vector<RolloutBudget> budgets(tasks.size());
  std::vector<RolloutGroup> groups(tasks.size());
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    const auto& q = tasks[j].question;
    prompts[j] = prompts::build_task_prompt(q.task_family, tasks[j].mode, q.question_text);
    budgets[j] = tasks[j].budget.value_or(RolloutBudget::for_family(q.task_family));
    budgets[j].validate();
    groups[j].question_id = q.question_id;
    groups[j].group_size = g;
    groups[j].transcripts.resize(g);
  }

  std::vector<std::string> errors(tasks.size() * g);
  parallel_for(tasks.size() * g, options_.workers, [&](std::size_t n) {
    const std::size_t j = n / g;
    const std::size_t i = n % g;
    const auto& task = tasks[j];
    const auto member_seed = seed + static_cast<std::int64_t>(n);
    try {
      groups[j].transcripts[i] =
          run_rollout(prompts[j], task.question.task_family, task.mode, budgets[j], member_seed,
                      task.question.question_id + "/" + std::to_string(i));
    } catch (const std::exception& e) {
      errors[n] = e.what();
    }
  });

  for (std::size_t n = 0; n < errors.size(); ++n) {
    if (errors[n].empty()) continue;
    auto& group = groups[n / g];
    group.complete = false;
    group.errors.push_back("member " + std::to_string(n % g) + ": " + errors[n]);
  }
  return groups;
}

namespace {

nlohmann::json tokens_to_json(const std::vector<Token>& toks) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : toks) out.push_back(nlohmann::json::array({t.id, t.text}));
  return out;
}

std::vector<Token> tokens_from_json(const nlohmann::json& j) {
  std::vector<Token> out;
  out.reserve(j.size());
  for (const auto& t : j) out.push_back({t.at(0).get<std::int64_t>(), t.at(1).get<std::string>()});
  return out;
}

}  // namespace

nlohmann::json to_json(const Transcript& t) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : t.segments) {
    segments.push_back({{"kind", std::string(to_string(s.kind))},
                        {"text", s.text},
                        {"token_span", {s.token_span.begin, s.token_span.end}},
                        {"well_formed", s.well_formed}});
  }
  return {{"prompt_text", t.prompt_text},
          {"task_family", std::string(to_string(t.task_family))},
          {"prompt_mode", std::string(to_string(t.prompt_mode))},
          {"segments", std::move(segments)},
          {"prompt_tokens", tokens_to_json(t.prompt_tokens)},
          {"response_tokens", tokens_to_json(t.response_tokens)},
          {"retrieval_failures", t.retrieval_failures}};
}

Transcript transcript_from_json(const nlohmann::json& j) {
  try {
    std::string response;
    for (const auto& s : j.at("segments")) response += s.at("text").get<std::string>();
    auto t = parse_transcript(response, parse_task_family(j.at("task_family").get<std::string>()),
                              parse_prompt_mode(j.at("prompt_mode").get<std::string>()),
                              j.at("prompt_text").get<std::string>());
    const auto& stored = j.at("segments");
    if (stored.size() != t.segments.size())
      throw Error(ErrorKind::SchemaMismatch, "stored segments disagree with the transcript text");
    for (std::size_t i = 0; i < stored.size(); ++i) {
      auto& seg = t.segments[i];
      if (parse_segment_kind(stored[i].at("kind").get<std::string>()) != seg.kind ||
          stored[i].at("text").get<std::string>() != seg.text)
        throw Error(ErrorKind::SchemaMismatch, "segment " + std::to_string(i) + " does not re-parse");
      seg.token_span = {stored[i].at("token_span").at(0).get<std::size_t>(),
                        stored[i].at("token_span").at(1).get<std::size_t>()};
    }
    t.prompt_tokens = tokens_from_json(j.at("prompt_tokens"));
    t.response_tokens = tokens_from_json(j.at("response_tokens"));
    t.retrieval_failures = j.value("retrieval_failures", 0);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("transcript record: ") + e.what());
  }
}

nlohmann::json to_json(const RolloutGroup& g) {
  nlohmann::json transcripts = nlohmann::json::array();
  for (const auto& t : g.transcripts) transcripts.push_back(to_json(t));
  return {{"question_id", g.question_id},
          {"group_size", g.group_size},
          {"complete", g.complete},
          {"errors", g.errors},
          {"transcripts", std::move(transcripts)}};
}

RolloutGroup group_from_json(const nlohmann::json& j) {
  try {
    RolloutGroup g;
    g.question_id = j.at("question_id").get<std::string>();
    g.group_size = j.at("group_size").get<std::size_t>();
    g.complete = j.value("complete", true);
    if (j.contains("errors")) g.errors = j.at("errors").get<std::vector<std::string>>();
    for (const auto& t : j.at("transcripts")) g.transcripts.push_back(transcript_from_json(t));
    if (g.complete && g.transcripts.size() != g.group_size)
      throw Error(ErrorKind::SchemaMismatch, "group " + g.question_id + " has the wrong member count");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("rollout group record: ") + e.what());
  }
}

}  // namespace ragrl::rollout
