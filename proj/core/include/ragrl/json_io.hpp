// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragrl::json_io {

/// Number text used in every emitted file: integers (and integral values of
/// integer type) print without exponent, floating values use 17 significant
/// digits so they reload bit-exact.
std::string format_number(double v);

/// Compact JSON with keys in sorted order and the number format above.
/// Identical values always serialize to identical bytes.
std::string canonical_dump(const nlohmann::json& j);

/// Parses one JSON value per non-blank line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Writes canonical_dump(record) + '\n' per record; returns the record count.
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace ragrl::json_io
