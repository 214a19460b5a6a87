// SPDX-License-Identifier: Apache-2.0
#include "ragrl/retrieval_service.hpp"

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/text.hpp"

namespace ragrl::retrieval {

nlohmann::json to_json(const RetrievalResult& r) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& sc : r.ranked) {
    ranked.push_back({{"chunk_id", sc.chunk.chunk_id},
                      {"doc_id", sc.chunk.doc_id},
                      {"title", sc.chunk.source_title},
                      {"text", sc.chunk.text},
                      {"score", sc.score}});
  }
  nlohmann::json web = nlohmann::json::array();
  for (const auto& d : r.web) web.push_back({{"url", d.url}, {"markdown", d.markdown}});
  return {{"query", r.query},
          {"ranked", std::move(ranked)},
          {"summary", r.summary ? nlohmann::json(*r.summary) : nlohmann::json(nullptr)},
          {"is_fallback", r.is_fallback},
          {"payload", r.payload},
          {"web", std::move(web)},
          {"degraded", r.degraded}};
}

RetrievalResult result_from_json(const nlohmann::json& j) {
  try {
    RetrievalResult r;
    r.query = j.at("query").get<std::string>();
    for (const auto& c : j.at("ranked")) {
      CorpusChunk chunk{c.at("doc_id").get<std::string>(), c.at("chunk_id").get<std::string>(),
                        c.at("text").get<std::string>(), c.value("title", std::string())};
      r.ranked.push_back({std::move(chunk), c.at("score").get<double>()});
    }
    if (j.contains("summary") && !j.at("summary").is_null())
      r.summary = j.at("summary").get<std::string>();
    r.is_fallback = j.at("is_fallback").get<bool>();
    r.payload = j.at("payload").get<std::string>();
    if (j.contains("web"))
      for (const auto& d : j.at("web"))
        r.web.push_back({d.at("url").get<std::string>(), d.at("markdown").get<std::string>()});
    r.degraded = j.value("degraded", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("retrieval result: ") + e.what());
  }
}

nlohmann::json to_json(const RetrievalRequest& r) {
  return {{"query", r.query},
          {"prev_reasoning", r.prev_reasoning},
          {"k", r.k},
          {"mode", prompts::to_string(r.mode)},
          {"task_family", to_string(r.family)}};
}

RetrievalRequest request_from_json(const nlohmann::json& j) {
  try {
    RetrievalRequest r;
    r.query = j.at("query").get<std::string>();
    r.prev_reasoning = j.value("prev_reasoning", std::string());
    r.k = j.value("k", std::size_t{0});
    r.mode = prompts::parse_summary_mode(j.value("mode", std::string("train")));
    r.family = parse_task_family(j.value("task_family", std::string("open_qa")));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("retrieval request: ") + e.what());
  }
}

std::string format_documents(const std::vector<ScoredChunk>& ranked,
                             const std::vector<online::WebDocument>& web) {
  std::string out;
  std::size_t n = 0;
  for (const auto& sc : ranked) {
    if (n > 0) out += '\n';
    out += "Doc " + std::to_string(++n) + " (Title: " + sc.chunk.source_title + ") " + sc.chunk.text;
  }
  for (const auto& d : web) {
    if (n > 0) out += '\n';
    out += "Doc " + std::to_string(++n) + " (Source: " + d.url + ") " + d.markdown;
  }
  return out;
}

std::string extract_final_information(std::string_view response) {
  auto pos = response.rfind(prompts::kFinalInformationLabel);
  if (pos == std::string_view::npos) return std::string(text::trim(response));
  return std::string(text::trim(response.substr(pos + prompts::kFinalInformationLabel.size())));
}

RetrievalService::RetrievalService(std::shared_ptr<const CorpusIndex> index,
                                   std::shared_ptr<gateway::Backend> summarizer, ServiceConfig cfg,
                                   std::shared_ptr<const Scorer> scorer,
                                   std::shared_ptr<online::OnlineFetcher> online)
    : index_(std::move(index)),
      summarizer_(std::move(summarizer)),
      cfg_(cfg),
      scorer_(scorer ? std::move(scorer) : std::make_shared<Bm25Scorer>()),
      online_(std::move(online)),
      summaries_(cfg.summary_cache_capacity) {
  if (!index_) throw Error(ErrorKind::EmptyCorpus, "retrieval service needs an index");
  if (cfg_.top_k == 0 || cfg_.no_summary_top_k == 0)
    throw Error(ErrorKind::InvalidArgument, "top_k values must be >= 1");
}

void RetrievalService::swap_index(std::shared_ptr<const CorpusIndex> index) {
  if (!index) throw Error(ErrorKind::EmptyCorpus, "cannot swap in a null index");
  std::lock_guard lock(index_mu_);
  index_ = std::move(index);
}

std::shared_ptr<const CorpusIndex> RetrievalService::index() const {
  std::lock_guard lock(index_mu_);
  return index_;
}

std::string RetrievalService::summarize(const RetrievalRequest& req, std::size_t k,
                                        const std::string& documents) {
  std::string key;
  key.append(prompts::to_string(req.mode)).push_back('\x1f');
  key.append(to_string(req.family)).push_back('\x1f');
  key.append(std::to_string(k)).push_back('\x1f');
  key.append(req.query).push_back('\x1f');
  key.append(req.prev_reasoning);
  if (auto hit = summaries_.get(key)) return *hit;

  gateway::GenerationRequest gen;
  gen.context = prompts::build_summarizer_prompt(req.mode, req.family, req.prev_reasoning,
                                                 req.query, documents);
  gen.max_new_tokens = cfg_.summary_max_tokens;
  const auto& sp = req.mode == prompts::SummaryMode::Train ? cfg_.train_sampling : cfg_.eval_sampling;
  gen.temperature = sp.temperature;
  gen.top_p = sp.top_p;
  gen.seed = cfg_.summary_seed;
  gen.correlation_id = "summary:" + req.query;
  std::string summary;
  try {
    summary = extract_final_information(summarizer_->generate(gen).text);
  } catch (const Error& e) {
    if (!e.retriable()) throw;
    throw Error(ErrorKind::SummarizerUnavailable, e.what());
  }
  summaries_.put(key, summary);
  return summary;
}

RetrievalResult RetrievalService::retrieve(const RetrievalRequest& req) {
  const auto index = this->index();
  const std::size_t k = req.k == 0 ? cfg_.top_k : req.k;
  RetrievalResult result;
  result.query = req.query;

  const bool summarizing = cfg_.summarize && summarizer_ != nullptr;
  const std::size_t raw_k = std::min(k, cfg_.no_summary_top_k);
  result.ranked = search(*index, req.query, summarizing ? k : raw_k, *scorer_);

  if (online_ && (!cfg_.online_eval_only || req.mode == prompts::SummaryMode::Eval)) {
    try {
      result.web = online_->fetch_online(req.query, k).documents;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SearchApiUnavailable) throw;
    }
  }

  if (summarizing) {
    try {
      auto summary = summarize(req, k, format_documents(result.ranked, result.web));
      result.is_fallback = protocol::is_fallback_text(summary);
      result.payload = protocol::strip_delimiters(summary);
      result.summary = std::move(summary);
      return result;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SummarizerUnavailable) throw;
      result.degraded = true;
      if (result.ranked.size() > raw_k) result.ranked.resize(raw_k);
    }
  }
  result.payload = protocol::strip_delimiters(format_documents(result.ranked, result.web));
  return result;
}

}  // namespace ragrl::retrieval
