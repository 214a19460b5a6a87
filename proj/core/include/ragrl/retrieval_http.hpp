// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <thread>

#include "ragrl/retrieval_service.hpp"

namespace httplib {
class Server;
}

namespace ragrl::retrieval {

/// HTTP front end for a RetrievalService.
///
///   POST /retrieve  {query, prev_reasoning, k, mode, task_family?} -> RetrievalResult JSON
///   POST /index     {"corpus_path": p} or {"chunks": [...]}      -> {"size": n}
///   GET  /health                                                  -> {"status": "ok", "size": n}
///
/// Errors come back as {"error": kind, "message": text} with 400 for bad
/// input and 500 otherwise.
class RetrievalServer {
 public:
  explicit RetrievalServer(std::shared_ptr<RetrievalService> service, Bm25Params params = {});
  ~RetrievalServer();

  RetrievalServer(const RetrievalServer&) = delete;
  RetrievalServer& operator=(const RetrievalServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void serve_forever(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  std::shared_ptr<RetrievalService> service_;
  Bm25Params params_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// Client for RetrievalServer. Transport failures and 5xx replies raise
/// RetrievalUnavailable after `retries` extra attempts.
class HttpRetrievalClient final : public RetrievalClient {
 public:
  explicit HttpRetrievalClient(std::string base_url, int retries = 1, double timeout_seconds = 120.0);

  RetrievalResult retrieve(const RetrievalRequest& req) override;
  /// Asks the server to rebuild its index from a corpus file it can read.
  std::size_t reindex(const std::string& corpus_path);

 private:
  std::string base_url_;
  int retries_;
  double timeout_seconds_;
};

}  // namespace ragrl::retrieval
