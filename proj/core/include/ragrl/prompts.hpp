// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "ragrl/protocol.hpp"

namespace ragrl::prompts {

/// Instruction text shown before the question.
std::string_view task_instruction(TaskFamily family, PromptMode mode);

/// Full prompt for one question: instruction, blank line, question text.
std::string build_task_prompt(TaskFamily family, PromptMode mode, std::string_view question);

enum class SummaryMode { Train, Eval };
std::string_view to_string(SummaryMode m);
SummaryMode parse_summary_mode(std::string_view s);

/// Summarizer template with {prev_reasoning}, {search_query} and
/// {wikipedia_content} placeholders. The training variants ask the model to
/// refuse reasoning-type queries first.
std::string_view summarizer_template(SummaryMode mode, TaskFamily family);

std::string build_summarizer_prompt(SummaryMode mode, TaskFamily family,
                                    std::string_view prev_reasoning, std::string_view query,
                                    std::string_view documents);

inline constexpr std::string_view kFinalInformationLabel = "**Final Information**";

/// Judge templates: math uses {question}/{gold}/{pred}; qa uses
/// {question}/{gold_answer}/{predicted_answer}.
std::string_view math_judge_template();
std::string_view qa_judge_template();

}  // namespace ragrl::prompts
