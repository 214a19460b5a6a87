// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragrl/protocol.hpp"

namespace ragrl {

/// One line of a question or benchmark file.
struct Question {
  std::string question_id;
  std::string question_text;
  std::string gold;
  TaskFamily task_family = TaskFamily::OpenQa;

  bool operator==(const Question&) const = default;
};

nlohmann::json to_json(const Question& q);
/// Throws SchemaMismatch for missing fields.
Question question_from_json(const nlohmann::json& j);

/// {question_id, question_text, gold, task_family} per line. Duplicate ids
/// are rejected with SchemaMismatch.
std::vector<Question> read_questions(const std::filesystem::path& path);

}  // namespace ragrl
