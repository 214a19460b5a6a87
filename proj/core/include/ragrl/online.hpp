// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragrl/lru_cache.hpp"
#include "ragrl/rate_limiter.hpp"

namespace ragrl::online {

struct WebDocument {
  std::string url;
  std::string markdown;

  bool operator==(const WebDocument&) const = default;
};

/// Web search adapter returning candidate urls for a query.
class SearchApi {
 public:
  virtual ~SearchApi() = default;
  /// Throws SearchApiUnavailable on failure.
  virtual std::vector<std::string> search(std::string_view query, std::size_t count,
                                          std::size_t offset) = 0;
};

/// Bing Web Search v7 style endpoint: GET ?q=..&count=..&offset=.. with the
/// key in Ocp-Apim-Subscription-Key; urls read from webPages.value[].url.
class HttpSearchApi final : public SearchApi {
 public:
  HttpSearchApi(std::string endpoint, std::string api_key);
  std::vector<std::string> search(std::string_view query, std::size_t count,
                                  std::size_t offset) override;

 private:
  std::string endpoint_;
  std::string api_key_;
};

class PageFetcher {
 public:
  virtual ~PageFetcher() = default;
  /// Raw HTML, or nullopt when the page could not be fetched.
  virtual std::optional<std::string> fetch(const std::string& url) = 0;
};

class HttpPageFetcher final : public PageFetcher {
 public:
  explicit HttpPageFetcher(double timeout_seconds = 10.0) : timeout_seconds_(timeout_seconds) {}
  std::optional<std::string> fetch(const std::string& url) override;

 private:
  double timeout_seconds_;
};

/// Drops <script>, <style>, <noscript>, <svg>, HTML comments and base64 data
/// URIs before any conversion.
std::string strip_noise(std::string_view html);

/// Rule-based HTML to Markdown: headings, paragraphs, list items, links and
/// line breaks are mapped; other tags are dropped and entities decoded.
std::string html_to_markdown(std::string_view html);

class HtmlConverter {
 public:
  virtual ~HtmlConverter() = default;
  virtual std::string convert(std::string_view html) = 0;
};

class RuleBasedConverter final : public HtmlConverter {
 public:
  std::string convert(std::string_view html) override { return html_to_markdown(html); }
};

/// Sends the pre-cleaned HTML to a conversion model: POST {"html": s} -> {"markdown": s}.
class RemoteConverter final : public HtmlConverter {
 public:
  explicit RemoteConverter(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  std::string convert(std::string_view html) override;

 private:
  std::string endpoint_;
};

struct OnlineConfig {
  std::size_t max_rounds = 3;
  std::size_t candidate_multiplier = 3;
  std::size_t workers = 16;
  std::size_t cache_capacity = 10000;
  std::size_t search_calls_per_window = 95;
  std::chrono::nanoseconds rate_window = std::chrono::seconds(1);
};

struct OnlineFetchResult {
  std::vector<WebDocument> documents;
  std::size_t rounds_used = 0;
  std::size_t cache_hits = 0;
};

/// Multi-round search-and-crawl. Each round asks the search API for k*3 new
/// candidates, crawls untried ones in parallel until k pages have content,
/// and stops after max_rounds or k successes. Converted pages are cached by
/// url. Individual crawl failures never raise.
class OnlineFetcher {
 public:
  OnlineFetcher(std::shared_ptr<SearchApi> search, std::shared_ptr<PageFetcher> fetcher,
                std::shared_ptr<HtmlConverter> converter, OnlineConfig cfg = {},
                std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

  /// Throws SearchApiUnavailable only when the first search call fails.
  OnlineFetchResult fetch_online(std::string_view query, std::size_t k);

  std::size_t cache_size() const { return cache_.size(); }
  const OnlineConfig& config() const noexcept { return cfg_; }

 private:
  std::optional<std::string> crawl(const std::string& url, bool& cache_hit);

  std::shared_ptr<SearchApi> search_;
  std::shared_ptr<PageFetcher> fetcher_;
  std::shared_ptr<HtmlConverter> converter_;
  OnlineConfig cfg_;
  RateLimiter limiter_;
  LruCache<std::string, std::string> cache_;
};

}  // namespace ragrl::online
