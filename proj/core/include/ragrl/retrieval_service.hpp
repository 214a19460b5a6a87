// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/corpus_index.hpp"
#include "ragrl/gateway.hpp"
#include "ragrl/lru_cache.hpp"
#include "ragrl/online.hpp"
#include "ragrl/prompts.hpp"
#include "ragrl/protocol.hpp"

namespace ragrl::retrieval {

struct RetrievalRequest {
  std::string query;
  /// Everything the policy wrote before the query; shown to the summarizer.
  std::string prev_reasoning;
  /// 0 means "use the service default".
  std::size_t k = 0;
  prompts::SummaryMode mode = prompts::SummaryMode::Train;
  TaskFamily family = TaskFamily::OpenQa;
};

struct RetrievalResult {
  std::string query;
  std::vector<ScoredChunk> ranked;
  /// Text after the Final Information label; empty when summarization is off
  /// or the summarizer could not be reached.
  std::optional<std::string> summary;
  bool is_fallback = false;
  /// What goes between the documents delimiters: the summary, or the raw
  /// chunks when there is none. Never contains a reserved delimiter.
  std::string payload;
  /// Pages pulled by the online pipeline, if enabled.
  std::vector<online::WebDocument> web;
  /// The summarizer failed and the raw chunks were used instead.
  bool degraded = false;
};

nlohmann::json to_json(const RetrievalResult& r);
RetrievalResult result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RetrievalRequest& r);
RetrievalRequest request_from_json(const nlohmann::json& j);

/// "Doc i (Title: t) text" per chunk, one per line, numbered from 1.
std::string format_documents(const std::vector<ScoredChunk>& ranked,
                             const std::vector<online::WebDocument>& web = {});

/// Text after the last Final Information label, trimmed. A response without
/// the label is returned whole (trimmed).
std::string extract_final_information(std::string_view response);

class RetrievalClient {
 public:
  virtual ~RetrievalClient() = default;
  /// Throws RetrievalUnavailable when the service cannot answer.
  virtual RetrievalResult retrieve(const RetrievalRequest& req) = 0;
};

struct ServiceConfig {
  std::size_t top_k = 10;
  bool summarize = true;
  /// Chunks passed through verbatim when no summary is produced.
  std::size_t no_summary_top_k = 3;
  std::size_t summary_max_tokens = 2048;
  gateway::SamplingParams train_sampling{0.3, 0.7};
  gateway::SamplingParams eval_sampling{0.3, 0.5};
  std::int64_t summary_seed = 0;
  std::size_t summary_cache_capacity = 10000;
  /// Only consult the online fetcher for eval-mode requests.
  bool online_eval_only = true;
};

/// Offline search, optional web fetch, then summarization. Safe for
/// concurrent retrieve() calls; the index can be swapped at any time and
/// in-flight requests finish against the index they started with.
class RetrievalService final : public RetrievalClient {
 public:
  RetrievalService(std::shared_ptr<const CorpusIndex> index,
                   std::shared_ptr<gateway::Backend> summarizer, ServiceConfig cfg = {},
                   std::shared_ptr<const Scorer> scorer = nullptr,
                   std::shared_ptr<online::OnlineFetcher> online = nullptr);

  RetrievalResult retrieve(const RetrievalRequest& req) override;

  void swap_index(std::shared_ptr<const CorpusIndex> index);
  std::shared_ptr<const CorpusIndex> index() const;
  const ServiceConfig& config() const noexcept { return cfg_; }
  std::size_t summary_cache_size() const { return summaries_.size(); }

 private:
  std::string summarize(const RetrievalRequest& req, std::size_t k, const std::string& documents);

  mutable std::mutex index_mu_;
  std::shared_ptr<const CorpusIndex> index_;
  std::shared_ptr<gateway::Backend> summarizer_;
  ServiceConfig cfg_;
  std::shared_ptr<const Scorer> scorer_;
  std::shared_ptr<online::OnlineFetcher> online_;
  LruCache<std::string, std::string> summaries_;
};

}  // namespace ragrl::retrieval
