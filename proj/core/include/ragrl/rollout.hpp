// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/gateway.hpp"
#include "ragrl/prompts.hpp"
#include "ragrl/protocol.hpp"
#include "ragrl/question.hpp"
#include "ragrl/retrieval_service.hpp"

namespace ragrl::rollout {

struct RolloutBudget {
  /// Documents blocks injected per rollout; later queries get nothing.
  std::size_t max_queries = 4;
  std::size_t max_tokens_per_turn = 3072;
  /// Generate calls per rollout.
  std::size_t max_turns = 6;

  /// 3072 tokens per turn for math, 1536 for mcq, 512 for open-domain QA;
  /// query cap 4 (5 for open-domain QA); max_turns = max_queries + 2.
  static RolloutBudget for_family(TaskFamily f);

  /// Throws InvalidArgument unless all fields are positive and
  /// max_turns >= max_queries + 1.
  void validate() const;
};

struct RolloutOptions {
  gateway::SamplingParams sampling = gateway::SamplingParams::training();
  /// Documents requested per query; 0 lets the retrieval service decide.
  std::size_t top_k = 10;
  prompts::SummaryMode summary_mode = prompts::SummaryMode::Train;
  std::size_t workers = 1;
};

struct RolloutGroup {
  std::string question_id;
  std::vector<Transcript> transcripts;
  std::size_t group_size = 0;
  /// False when any member failed; incomplete groups never reach a batch.
  bool complete = true;
  std::vector<std::string> errors;
};

/// A question together with the prompt mode it should be rolled out in.
struct RolloutTask {
  Question question;
  PromptMode mode = PromptMode::Retrieval;
  /// Defaults to RolloutBudget::for_family(question.task_family).
  std::optional<RolloutBudget> budget;
};

/// Drives generate -> retrieve -> inject cycles.
///
/// Each turn generates up to max_tokens_per_turn tokens, stopping at the
/// query end delimiter while injections remain. A turn that ends on a
/// well-formed query triggers retrieval and a documents block (plus the
/// fallback notice after a refusal); once the cap is reached the stop
/// sequence is dropped, so later queries stay in the text uninjected. The
/// rollout ends on end-of-text, a length stop, or after max_turns calls.
class RolloutRunner {
 public:
  /// `retrieval` may be null for direct-mode-only use.
  RolloutRunner(std::shared_ptr<gateway::Backend> backend,
                std::shared_ptr<retrieval::RetrievalClient> retrieval, RolloutOptions options = {});

  Transcript run_rollout(const std::string& prompt, TaskFamily family, PromptMode mode,
                         const RolloutBudget& budget, std::int64_t seed,
                         const std::string& correlation = {}) const;

  /// g rollouts of one question with seeds seed + i. Throws GroupTooSmall for g < 2.
  RolloutGroup run_group(const Question& q, PromptMode mode, const RolloutBudget& budget,
                         std::size_t g, std::int64_t seed) const;

  /// Groups for many questions; all g * tasks.size() rollouts share one
  /// worker pool. Question j uses seeds seed + j * g + i. Output order follows
  /// `tasks`, independent of the worker count.
  std::vector<RolloutGroup> run_groups(const std::vector<RolloutTask>& tasks, std::size_t g,
                                       std::int64_t seed) const;

  const RolloutOptions& options() const noexcept { return options_; }
  const gateway::Backend& backend() const noexcept { return *backend_; }

 private:
  std::shared_ptr<gateway::Backend> backend_;
  std::shared_ptr<retrieval::RetrievalClient> retrieval_;
  RolloutOptions options_;
};

nlohmann::json to_json(const Transcript& t);
/// Re-parses the stored response text and checks it against the stored
/// segments before restoring tokens; throws SchemaMismatch on disagreement.
Transcript transcript_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RolloutGroup& g);
RolloutGroup group_from_json(const nlohmann::json& j);

}  // namespace ragrl::rollout
