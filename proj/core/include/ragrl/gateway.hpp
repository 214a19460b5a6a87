// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/protocol.hpp"

namespace ragrl::gateway {

enum class FinishReason { Stop, Length, EndOfText };
std::string_view to_string(FinishReason r);

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.9;

  static SamplingParams training() { return {1.0, 0.9}; }
  static SamplingParams evaluation() { return {0.3, 0.5}; }
};

struct GenerationRequest {
  /// Prompt followed by the response written so far (model text plus injections).
  std::string context;
  /// Length of the prompt prefix inside `context`; npos means the whole context
  /// is prompt. Chat backends send the remainder as an assistant prefill.
  std::size_t prompt_chars = std::string::npos;
  std::vector<std::string> stop_sequences;
  std::size_t max_new_tokens = 512;
  double temperature = 1.0;
  double top_p = 0.9;
  std::int64_t seed = 0;
  std::string correlation_id;

  std::string_view prompt() const noexcept;
  std::string_view partial_response() const noexcept;

  /// Throws InvalidArgument when max_new_tokens == 0, temperature < 0 or
  /// top_p outside (0, 1].
  void validate() const;
};

struct GenerationChunk {
  std::string text;
  std::vector<Token> tokens;
  FinishReason finish_reason = FinishReason::EndOfText;

  bool operator==(const GenerationChunk&) const = default;
};

/// Text generation plus tokenization. Implementations must accept concurrent
/// generate() calls from many workers.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual GenerationChunk generate(const GenerationRequest& req) = 0;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;

  TokenizeFn tokenizer() const {
    return [this](std::string_view s) { return tokenize(s); };
  }
};

/// Deterministic id for a token string (31-bit FNV-1a).
std::int64_t token_id(std::string_view token_text) noexcept;

/// Each token is a run of whitespace followed by a run of non-whitespace, so
/// "a b" splits as ["a", " b"]. Trailing whitespace joins the last token.
std::vector<Token> whitespace_tokenize(std::string_view text);

/// Applies the halting rules to an intended continuation: cut at the earliest
/// stop sequence (kept in the output), then at max_new_tokens.
GenerationChunk finish_continuation(std::string_view continuation, const GenerationRequest& req,
                                    const TokenizeFn& tokenize);

/// 64-bit FNV-1a of the full context, hex encoded. Keys canned responses.
std::string context_hash(std::string_view context);

/// Test and desk-scale backend. A request is answered from, in order:
///   1. an exact context-hash table;
///   2. the first rule whose `match` text occurs in the prompt and whose
///      `unless` text (if set) does not, picking responses[seed % size];
///   3. the default response.
/// Rule and default responses are whole trajectories: the backend drops the
/// injected blocks from the partial response, checks that what remains is a
/// prefix of the script, and continues from there.
class ScriptedBackend final : public Backend {
 public:
  struct Rule {
    std::string match;
    std::vector<std::string> responses;
    std::string unless;
  };

  void add_context(std::string_view context, std::string response);
  void add_rule(Rule rule);
  void set_default(std::string response) { default_response_ = std::move(response); }

  GenerationChunk generate(const GenerationRequest& req) override;
  std::vector<Token> tokenize(std::string_view text) const override {
    return whitespace_tokenize(text);
  }

  /// {"contexts": {hash: text}, "rules": [{"match": s, "responses": [..]}], "default": s}
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& j);
  static std::unique_ptr<ScriptedBackend> load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::string> by_hash_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_response_;
};

struct RemoteConfig {
  /// Full URL of a chat-completions endpoint, e.g. http://host:8000/v1/chat/completions
  std::string endpoint;
  std::string api_key;
  std::string model;
  /// Optional URL answering {"text": s} with {"tokens": [{"id": n, "text": s}, ...]}.
  std::string tokenizer_endpoint;
  int max_retries = 2;
  double timeout_seconds = 120.0;
};

/// Chat-completion client. The partial response travels as an assistant
/// message the server is asked to continue.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig cfg);

  GenerationChunk generate(const GenerationRequest& req) override;
  std::vector<Token> tokenize(std::string_view text) const override;

  /// Request body for `req`; exposed for wire-format tests.
  nlohmann::json request_body(const GenerationRequest& req) const;
  /// Decodes a chat-completion response into a chunk.
  GenerationChunk decode_response(const nlohmann::json& body, const GenerationRequest& req) const;

 private:
  RemoteConfig cfg_;
};

}  // namespace ragrl::gateway
