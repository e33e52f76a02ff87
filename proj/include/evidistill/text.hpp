#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace evidistill::text {

// Runs of ASCII whitespace become one space; leading/trailing whitespace is
// dropped. Idempotent.
std::string normalize_whitespace(std::string_view s);

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);
std::string ascii_lower(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

bool is_valid_utf8(std::string_view s);

// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

// Longest prefix holding at most `max_code_points` code points.
std::string utf8_truncate(std::string_view s, std::size_t max_code_points);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// "12493" -> "12,493"
std::string thousands(long long value);

}  // namespace evidistill::text
