// SPDX-License-Identifier: Apache-2.0
#include "ragrl/question.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "ragrl/error.hpp"
#include "ragrl/json_io.hpp"

namespace ragrl {

nlohmann::json to_json(const Question& q) {
  return {{"question_id", q.question_id},
          {"question_text", q.question_text},
          {"gold", q.gold},
          {"task_family", to_string(q.task_family)}};
}

Question question_from_json(const nlohmann::json& j) {
  try {
    Question q;
    q.question_id = j.at("question_id").get<std::string>();
    q.question_text = j.at("question_text").get<std::string>();
    q.gold = j.value("gold", std::string());
    q.task_family = parse_task_family(j.at("task_family").get<std::string>());
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("question record: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::SchemaMismatch, e.what());
  }
}

std::vector<Question> read_questions(const std::filesystem::path& path) {
  std::vector<Question> out;
  std::set<std::string> seen;
  for (const auto& j : json_io::read_jsonl(path)) {
    auto q = question_from_json(j);
    if (!seen.insert(q.question_id).second)
      throw Error(ErrorKind::SchemaMismatch, path.string() + ": duplicate question_id " + q.question_id);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace ragrl
