// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ragrl::text {

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string_view> split_whitespace(std::string_view s);

std::size_t word_count(std::string_view s);

std::string to_lower(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;

/// Replaces every `{name}` placeholder; unknown placeholders are left untouched.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

/// Open-domain QA answer normalization: lowercase, drop ASCII punctuation,
/// drop the articles a/an/the, collapse whitespace to single spaces.
std::string normalize_qa(std::string_view s);

/// Tokens of normalize_qa(s).
std::vector<std::string> qa_tokens(std::string_view s);

/// Lowercased alphanumeric runs; bytes >= 0x80 are kept as word characters so
/// UTF-8 text survives untouched.
std::vector<std::string> lexical_terms(std::string_view s);

}  // namespace ragrl::text
