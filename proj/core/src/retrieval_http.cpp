// SPDX-License-Identifier: Apache-2.0
#include "ragrl/retrieval_http.hpp"

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "ragrl/error.hpp"
#include "ragrl/json_io.hpp"

namespace ragrl::retrieval {

namespace {

bool is_client_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyQuery:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::DuplicateChunkId:
    case ErrorKind::EmptyCorpus:
      return true;
    default:
      return false;
  }
}

void reply_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  res.status = is_client_error(kind) ? 400 : 500;
  nlohmann::json body = {{"error", std::string(to_string(kind))}, {"message", message}};
  res.set_content(json_io::canonical_dump(body), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    reply_error(res, ErrorKind::SchemaMismatch, e.what());
  } catch (const std::exception& e) {
    reply_error(res, ErrorKind::IoFailure, e.what());
  }
}

}  // namespace

RetrievalServer::RetrievalServer(std::shared_ptr<RetrievalService> service, Bm25Params params)
    : service_(std::move(service)), params_(params), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

RetrievalServer::~RetrievalServer() { stop(); }

void RetrievalServer::install_routes() {
  server_->Post("/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto request = request_from_json(nlohmann::json::parse(req.body));
      auto result = service_->retrieve(request);
      res.set_content(json_io::canonical_dump(to_json(result)), "application/json");
    });
  });
  server_->Post("/index", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = nlohmann::json::parse(req.body);
      std::vector<CorpusChunk> chunks;
      if (body.contains("corpus_path")) {
        chunks = read_corpus_jsonl(body.at("corpus_path").get<std::string>());
      } else if (body.contains("chunks")) {
        for (const auto& c : body.at("chunks"))
          chunks.push_back({c.at("doc_id").get<std::string>(), c.at("chunk_id").get<std::string>(),
                            c.at("text").get<std::string>(), c.value("title", std::string())});
      } else {
        throw Error(ErrorKind::SchemaMismatch, "expected corpus_path or chunks");
      }
      auto index = std::make_shared<const CorpusIndex>(CorpusIndex::build(std::move(chunks), params_));
      const auto size = index->size();
      service_->swap_index(std::move(index));
      res.set_content(json_io::canonical_dump({{"size", size}}), "application/json");
    });
  });
  server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    nlohmann::json body = {{"status", "ok"}, {"size", service_->index()->size()}};
    res.set_content(json_io::canonical_dump(body), "application/json");
  });
}

int RetrievalServer::start(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void RetrievalServer::serve_forever(const std::string& host, int port) {
  if (!server_->listen(host, port))
    throw Error(ErrorKind::IoFailure, "cannot listen on " + host + ":" + std::to_string(port));
}

void RetrievalServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

HttpRetrievalClient::HttpRetrievalClient(std::string base_url, int retries, double timeout_seconds)
    : base_url_(std::move(base_url)), retries_(retries), timeout_seconds_(timeout_seconds) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

RetrievalResult HttpRetrievalClient::retrieve(const RetrievalRequest& req) {
  auto reply = detail::post_json(base_url_ + "/retrieve", to_json(req), {}, retries_, timeout_seconds_,
                                 ErrorKind::RetrievalUnavailable);
  return result_from_json(reply);
}

std::size_t HttpRetrievalClient::reindex(const std::string& corpus_path) {
  auto reply = detail::post_json(base_url_ + "/index", {{"corpus_path", corpus_path}}, {}, retries_,
                                 timeout_seconds_, ErrorKind::RetrievalUnavailable);
  return reply.at("size").get<std::size_t>();
}

}  // namespace ragrl::retrieval
