// SPDX-License-Identifier: Apache-2.0
#include "ragrl/gateway.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "ragrl/error.hpp"
#include "ragrl/text.hpp"

namespace ragrl::gateway {

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::EndOfText: return "end_of_text";
  }
  return "?";
}

std::string_view GenerationRequest::prompt() const noexcept {
  std::string_view c = context;
  return c.substr(0, std::min(prompt_chars, c.size()));
}

std::string_view GenerationRequest::partial_response() const noexcept {
  std::string_view c = context;
  return c.substr(std::min(prompt_chars, c.size()));
}

void GenerationRequest::validate() const {
  if (max_new_tokens == 0) throw Error(ErrorKind::InvalidArgument, "max_new_tokens must be > 0");
  if (!(temperature >= 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "top_p must be in (0, 1]");
}

std::int64_t token_id(std::string_view token_text) noexcept {
  std::uint32_t h = 2166136261u;
  for (char c : token_text) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return static_cast<std::int64_t>(h & 0x7fffffffu);
}

std::vector<Token> whitespace_tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t start = i;
    while (i < s.size() && text::is_space(s[i])) ++i;
    while (i < s.size() && !text::is_space(s[i])) ++i;
    std::string_view piece = s.substr(start, i - start);
    if (!out.empty() && text::trim(piece).empty()) {
      out.back().text += piece;
      out.back().id = token_id(out.back().text);
    } else {
      out.push_back(Token{token_id(piece), std::string(piece)});
    }
  }
  return out;
}

GenerationChunk finish_continuation(std::string_view continuation, const GenerationRequest& req,
                                    const TokenizeFn& tokenize) {
  GenerationChunk chunk;
  std::size_t cut = std::string_view::npos;
  for (const auto& stop : req.stop_sequences) {
    if (stop.empty()) continue;
    auto p = continuation.find(stop);
    if (p != std::string_view::npos && (cut == std::string_view::npos || p + stop.size() < cut))
      cut = p + stop.size();
  }
  std::string_view text = cut == std::string_view::npos ? continuation : continuation.substr(0, cut);
  auto toks = tokenize(text);
  if (toks.size() > req.max_new_tokens) {
    toks.resize(req.max_new_tokens);
    chunk.finish_reason = FinishReason::Length;
  } else {
    chunk.finish_reason = cut == std::string_view::npos ? FinishReason::EndOfText : FinishReason::Stop;
  }
  for (const auto& t : toks) chunk.text += t.text;
  chunk.tokens = std::move(toks);
  return chunk;
}

std::string context_hash(std::string_view context) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : context) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ScriptedBackend::add_context(std::string_view context, std::string response) {
  by_hash_[context_hash(context)] = std::move(response);
}

void ScriptedBackend::add_rule(Rule rule) {
  if (rule.responses.empty())
    throw Error(ErrorKind::InvalidArgument, "scripted rule '" + rule.match + "' has no responses");
  rules_.push_back(std::move(rule));
}

namespace {

/// The part of a partial response the model itself wrote.
std::string model_written(std::string_view partial) {
  auto t = parse_transcript(partial, TaskFamily::Math);
  std::string out;
  for (const auto& s : t.segments) {
    if (s.kind == SegmentKind::InjectedDocs || s.kind == SegmentKind::FallbackNotice) continue;
    out += s.text;
  }
  return out;
}

}  // namespace

GenerationChunk ScriptedBackend::generate(const GenerationRequest& req) {
  req.validate();
  auto tok = [this](std::string_view s) { return tokenize(s); };
  if (auto it = by_hash_.find(context_hash(req.context)); it != by_hash_.end())
    return finish_continuation(it->second, req, tok);

  const std::string* script = nullptr;
  auto prompt = req.prompt();
  for (const auto& rule : rules_) {
    if (prompt.find(rule.match) != std::string_view::npos &&
        (rule.unless.empty() || prompt.find(rule.unless) == std::string_view::npos)) {
      auto n = static_cast<std::int64_t>(rule.responses.size());
      auto idx = ((req.seed % n) + n) % n;
      script = &rule.responses[static_cast<std::size_t>(idx)];
      break;
    }
  }
  if (!script && default_response_) script = &*default_response_;
  if (!script) return GenerationChunk{};

  auto written = model_written(req.partial_response());
  if (!std::string_view(*script).starts_with(written)) return GenerationChunk{};
  return finish_continuation(std::string_view(*script).substr(written.size()), req, tok);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& j) {
  auto b = std::make_unique<ScriptedBackend>();
  try {
    if (j.contains("contexts")) {
      for (const auto& [hash, text] : j.at("contexts").items())
        b->by_hash_[hash] = text.get<std::string>();
    }
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules"))
        b->add_rule({r.at("match").get<std::string>(), r.at("responses").get<std::vector<std::string>>(),
                     r.value("unless", std::string())});
    }
    if (j.contains("default")) b->set_default(j.at("default").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("scripted backend: ") + e.what());
  }
  return b;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
}

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw Error(ErrorKind::ConfigInvalid, "gateway.endpoint is empty");
}

nlohmann::json RemoteBackend::request_body(const GenerationRequest& req) const {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "user"}, {"content", std::string(req.prompt())}});
  auto partial = req.partial_response();
  bool prefill = !partial.empty();
  if (prefill) messages.push_back({{"role", "assistant"}, {"content", std::string(partial)}});
  nlohmann::json body = {
      {"messages", messages},
      {"stop", req.stop_sequences},
      {"max_tokens", req.max_new_tokens},
      {"temperature", req.temperature},
      {"top_p", req.top_p},
      {"seed", req.seed},
      {"include_stop_str_in_output", true},
  };
  if (!cfg_.model.empty()) body["model"] = cfg_.model;
  if (prefill) {
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  return body;
}

GenerationChunk RemoteBackend::decode_response(const nlohmann::json& body,
                                               const GenerationRequest& req) const {
  GenerationChunk chunk;
  try {
    const auto& choice = body.at("choices").at(0);
    chunk.text = choice.at("message").at("content").get<std::string>();
    auto finish = choice.value("finish_reason", std::string("stop"));
    if (finish == "length") {
      chunk.finish_reason = FinishReason::Length;
    } else {
      chunk.finish_reason = FinishReason::EndOfText;
      std::string matched;
      if (choice.contains("stop_reason") && choice["stop_reason"].is_string())
        matched = choice["stop_reason"].get<std::string>();
      for (const auto& stop : req.stop_sequences) {
        if (stop.empty()) continue;
        if (std::string_view(chunk.text).ends_with(stop)) {
          chunk.finish_reason = FinishReason::Stop;
          break;
        }
        if (matched == stop) {
          chunk.text += stop;
          chunk.finish_reason = FinishReason::Stop;
          break;
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BackendUnavailable, std::string("malformed completion: ") + e.what());
  }
  chunk.tokens = tokenize(chunk.text);
  return chunk;
}

GenerationChunk RemoteBackend::generate(const GenerationRequest& req) {
  req.validate();
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  if (!req.correlation_id.empty()) headers.emplace("X-Request-Id", req.correlation_id);
  auto reply = detail::post_json(cfg_.endpoint, request_body(req), headers, cfg_.max_retries,
                                 cfg_.timeout_seconds, ErrorKind::BackendUnavailable);
  return decode_response(reply, req);
}

std::vector<Token> RemoteBackend::tokenize(std::string_view text) const {
  if (cfg_.tokenizer_endpoint.empty()) return whitespace_tokenize(text);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  auto reply = detail::post_json(cfg_.tokenizer_endpoint, {{"text", std::string(text)}}, headers,
                                 cfg_.max_retries, cfg_.timeout_seconds,
                                 ErrorKind::BackendUnavailable);
  std::vector<Token> out;
  std::string joined;
  try {
    for (const auto& t : reply.at("tokens")) {
      out.push_back(Token{t.at("id").get<std::int64_t>(), t.at("text").get<std::string>()});
      joined += out.back().text;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("tokenizer reply: ") + e.what());
  }
  if (joined != text)
    throw Error(ErrorKind::SchemaMismatch, "tokenizer pieces do not reproduce the input text");
  return out;
}

}  // namespace ragrl::gateway
