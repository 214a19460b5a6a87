// SPDX-License-Identifier: Apache-2.0
#include "ragrl/online.hpp"

#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "ragrl/error.hpp"
#include "ragrl/parallel.hpp"
#include "ragrl/text.hpp"

namespace ragrl::online {

HttpSearchApi::HttpSearchApi(std::string endpoint, std::string api_key)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}

std::vector<std::string> HttpSearchApi::search(std::string_view query, std::size_t count,
                                               std::size_t offset) {
  auto parts = detail::split_url(endpoint_);
  httplib::Client cli(parts.origin);
  cli.set_connection_timeout(5, 0);
  cli.set_read_timeout(20, 0);
  httplib::Params params{{"q", std::string(query)},
                         {"count", std::to_string(count)},
                         {"offset", std::to_string(offset)}};
  httplib::Headers headers{{"Ocp-Apim-Subscription-Key", api_key_}};
  auto res = cli.Get(parts.path, params, headers);
  if (!res || res->status != 200)
    throw Error(ErrorKind::SearchApiUnavailable,
                res ? "search returned " + std::to_string(res->status)
                    : "search transport error: " + httplib::to_string(res.error()));
  std::vector<std::string> urls;
  try {
    auto body = nlohmann::json::parse(res->body);
    if (body.contains("webPages"))
      for (const auto& v : body["webPages"].at("value")) urls.push_back(v.at("url").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SearchApiUnavailable, std::string("malformed search reply: ") + e.what());
  }
  return urls;
}

std::optional<std::string> HttpPageFetcher::fetch(const std::string& url) {
  try {
    auto parts = detail::split_url(url);
    httplib::Client cli(parts.origin);
    auto secs = static_cast<time_t>(timeout_seconds_);
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_follow_location(true);
    auto res = cli.Get(parts.path);
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace {

std::string lower_copy(std::string_view s) { return text::to_lower(s); }

/// Removes every <tag ...>...</tag> block (case-insensitive); an unclosed
/// block runs to the end of the input.
std::string remove_blocks(std::string_view html, std::string_view tag) {
  const std::string lower = lower_copy(html);
  const std::string open = "<" + std::string(tag);
  const std::string close = "</" + std::string(tag);
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto p = lower.find(open, pos);
    while (p != std::string::npos) {
      auto after = p + open.size();
      if (after >= lower.size() || lower[after] == '>' || text::is_space(lower[after]) || lower[after] == '/')
        break;
      p = lower.find(open, p + 1);
    }
    if (p == std::string::npos) break;
    out.append(html.substr(pos, p - pos));
    auto c = lower.find(close, p);
    if (c == std::string::npos) return out;
    auto end = lower.find('>', c);
    pos = end == std::string::npos ? lower.size() : end + 1;
  }
  out.append(html.substr(pos));
  return out;
}

std::string remove_between(std::string_view s, std::string_view open, std::string_view close) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto p = s.find(open, pos);
    if (p == std::string_view::npos) break;
    out.append(s.substr(pos, p - pos));
    auto c = s.find(close, p + open.size());
    if (c == std::string_view::npos) return out;
    pos = c + close.size();
  }
  out.append(s.substr(pos));
  return out;
}

bool is_base64_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || c == '=';
}

/// Drops "data:<mime>;base64,<payload>" runs wherever they appear.
std::string remove_data_uris(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto p = s.find("data:", pos);
    if (p == std::string_view::npos) break;
    auto b64 = s.find(";base64,", p);
    auto stop = s.find_first_of("\"' >)", p);
    if (b64 == std::string_view::npos || (stop != std::string_view::npos && stop < b64)) {
      out.append(s.substr(pos, p + 5 - pos));
      pos = p + 5;
      continue;
    }
    out.append(s.substr(pos, p - pos));
    auto e = b64 + 8;
    while (e < s.size() && is_base64_char(s[e])) ++e;
    pos = e;
  }
  out.append(s.substr(pos));
  return out;
}

std::string decode_entities(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += s[i];
      continue;
    }
    auto name = s.substr(i + 1, semi - i - 1);
    std::string rep;
    if (name == "amp") rep = "&";
    else if (name == "lt") rep = "<";
    else if (name == "gt") rep = ">";
    else if (name == "quot") rep = "\"";
    else if (name == "apos" || name == "#39") rep = "'";
    else if (name == "nbsp") rep = " ";
    else if (name.size() > 1 && name[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = (name[1] == 'x' || name[1] == 'X') ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                                                : std::stoul(std::string(name.substr(1)));
      } catch (const std::exception&) {
        cp = 0;
      }
      if (cp > 0 && cp < 0x80) rep = std::string(1, static_cast<char>(cp));
      else if (cp >= 0x80 && cp < 0x800) {
        rep += static_cast<char>(0xC0 | (cp >> 6));
        rep += static_cast<char>(0x80 | (cp & 0x3F));
      } else if (cp >= 0x800 && cp < 0x10000) {
        rep += static_cast<char>(0xE0 | (cp >> 12));
        rep += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        rep += static_cast<char>(0x80 | (cp & 0x3F));
      }
    }
    if (rep.empty()) {
      out += s[i];
      continue;
    }
    out += rep;
    i = semi;
  }
  return out;
}

std::string attribute(std::string_view tag, std::string_view name) {
  const std::string lower = lower_copy(tag);
  auto p = lower.find(std::string(name) + "=");
  if (p == std::string::npos) return {};
  p += name.size() + 1;
  if (p >= tag.size()) return {};
  char q = tag[p];
  if (q == '"' || q == '\'') {
    auto e = tag.find(q, p + 1);
    return std::string(tag.substr(p + 1, e == std::string_view::npos ? std::string_view::npos : e - p - 1));
  }
  auto e = tag.find_first_of(" >", p);
  return std::string(tag.substr(p, e == std::string_view::npos ? std::string_view::npos : e - p));
}

/// Collapses whitespace inside lines, trims lines and keeps at most one blank
/// line between blocks.
std::string tidy(std::string_view s) {
  std::string out;
  int pending_newlines = 0;
  bool line_has_text = false;
  bool pending_space = false;
  for (char c : s) {
    if (c == '\n') {
      ++pending_newlines;
      line_has_text = false;
      pending_space = false;
      continue;
    }
    if (text::is_space(c)) {
      if (line_has_text) pending_space = true;
      continue;
    }
    if (pending_newlines > 0 && !out.empty()) out.append(std::min(pending_newlines, 2), '\n');
    pending_newlines = 0;
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
    line_has_text = true;
  }
  return out;
}

}  // namespace

std::string strip_noise(std::string_view html) {
  std::string s = remove_between(html, "<!--", "-->");
  for (auto tag : {"script", "style", "noscript", "svg", "head", "template", "iframe"})
    s = remove_blocks(s, tag);
  return remove_data_uris(s);
}

std::string html_to_markdown(std::string_view html) {
  const std::string cleaned = strip_noise(html);
  std::string raw;
  std::vector<std::string> hrefs;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    if (cleaned[i] != '<') {
      auto next = cleaned.find('<', i);
      auto chunk = std::string_view(cleaned).substr(i, next == std::string::npos ? std::string::npos : next - i);
      std::string flat;
      for (char c : chunk) flat += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
      raw += decode_entities(flat);
      i = next == std::string::npos ? cleaned.size() : next;
      continue;
    }
    auto end = cleaned.find('>', i);
    if (end == std::string::npos) break;
    std::string_view tag = std::string_view(cleaned).substr(i, end - i + 1);
    i = end + 1;
    bool closing = tag.size() > 1 && tag[1] == '/';
    std::size_t name_start = closing ? 2 : 1;
    std::size_t name_end = name_start;
    while (name_end < tag.size() && std::isalnum(static_cast<unsigned char>(tag[name_end]))) ++name_end;
    std::string name = lower_copy(tag.substr(name_start, name_end - name_start));

    if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') {
      raw += "\n\n";
      if (!closing) raw += std::string(static_cast<std::size_t>(name[1] - '0'), '#') + " ";
    } else if (name == "p" || name == "div" || name == "section" || name == "article" ||
               name == "table" || name == "tr" || name == "ul" || name == "ol" ||
               name == "blockquote" || name == "pre") {
      raw += "\n\n";
    } else if (name == "br") {
      raw += "\n";
    } else if (name == "li") {
      if (!closing) raw += "\n- ";
    } else if (name == "td" || name == "th") {
      if (closing) raw += " | ";
    } else if (name == "strong" || name == "b") {
      raw += "**";
    } else if (name == "a") {
      if (!closing) {
        hrefs.push_back(attribute(tag, "href"));
        raw += "[";
      } else if (!hrefs.empty()) {
        auto href = hrefs.back();
        hrefs.pop_back();
        if (href.empty() || href.starts_with("javascript:")) raw += "]";
        else raw += "](" + href + ")";
      }
    }
  }
  while (!hrefs.empty()) {
    raw += "]";
    hrefs.pop_back();
  }
  return tidy(raw);
}

std::string RemoteConverter::convert(std::string_view html) {
  auto reply = detail::post_json(endpoint_, {{"html", strip_noise(html)}}, {}, 1, 60.0,
                                 ErrorKind::RetrievalUnavailable);
  return reply.value("markdown", std::string());
}

OnlineFetcher::OnlineFetcher(std::shared_ptr<SearchApi> search, std::shared_ptr<PageFetcher> fetcher,
                             std::shared_ptr<HtmlConverter> converter, OnlineConfig cfg,
                             std::shared_ptr<Clock> clock)
    : search_(std::move(search)),
      fetcher_(std::move(fetcher)),
      converter_(std::move(converter)),
      cfg_(cfg),
      limiter_(cfg.search_calls_per_window, cfg.rate_window, std::move(clock)),
      cache_(cfg.cache_capacity) {
  if (!search_ || !fetcher_ || !converter_)
    throw Error(ErrorKind::ConfigInvalid, "online retrieval needs a search api, fetcher and converter");
}

std::optional<std::string> OnlineFetcher::crawl(const std::string& url, bool& cache_hit) {
  cache_hit = false;
  if (auto hit = cache_.get(url)) {
    cache_hit = true;
    return hit;
  }
  std::optional<std::string> html;
  try {
    html = fetcher_->fetch(url);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (!html) return std::nullopt;
  std::string markdown;
  try {
    markdown = converter_->convert(*html);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (text::trim(markdown).empty()) return std::nullopt;
  cache_.put(url, markdown);
  return markdown;
}

OnlineFetchResult OnlineFetcher::fetch_online(std::string_view query, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  OnlineFetchResult result;
  std::set<std::string> tried;
  const std::size_t per_round = k * cfg_.candidate_multiplier;
  for (std::size_t round = 0; round < cfg_.max_rounds && result.documents.size() < k; ++round) {
    std::vector<std::string> candidates;
    try {
      limiter_.acquire();
      candidates = search_->search(query, per_round, round * per_round);
    } catch (const Error& e) {
      if (round == 0) throw Error(ErrorKind::SearchApiUnavailable, e.what());
      break;
    }
    result.rounds_used = round + 1;
    std::vector<std::string> pool;
    for (auto& url : candidates)
      if (tried.insert(url).second) pool.push_back(std::move(url));

    std::size_t next = 0;
    while (result.documents.size() < k && next < pool.size()) {
      const std::size_t batch = std::min(k - result.documents.size(), pool.size() - next);
      std::vector<std::optional<std::string>> pages(batch);
      std::vector<char> hits(batch, 0);
      parallel_for(batch, cfg_.workers, [&](std::size_t j) {
        bool hit = false;
        pages[j] = crawl(pool[next + j], hit);
        hits[j] = hit ? 1 : 0;
      });
      for (std::size_t j = 0; j < batch; ++j) {
        result.cache_hits += static_cast<std::size_t>(hits[j]);
        if (pages[j]) result.documents.push_back({pool[next + j], std::move(*pages[j])});
      }
      next += batch;
    }
    if (candidates.empty()) break;
  }
  return result;
}

}  // namespace ragrl::online
