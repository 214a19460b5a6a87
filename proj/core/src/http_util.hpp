// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "ragrl/error.hpp"

namespace ragrl::detail {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// POSTs a JSON body and parses a JSON reply. Transport errors and 5xx
/// replies are retried `retries` times with linear backoff; the final failure
/// is raised as `failure_kind`.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                                const httplib::Headers& headers, int retries,
                                double timeout_seconds, ErrorKind failure_kind) {
  auto parts = split_url(url);
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    httplib::Client cli(parts.origin);
    auto secs = static_cast<time_t>(timeout_seconds);
    cli.set_connection_timeout(5, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_write_timeout(secs, 0);
    auto res = cli.Post(parts.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw Error(failure_kind, url + " returned " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(failure_kind, url + " replied with invalid JSON: " + e.what());
    }
  }
  throw Error(failure_kind, url + ": " + last_error);
}

}  // namespace ragrl::detail
