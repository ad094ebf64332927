#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace forge::util {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

/// Lowercased alphanumeric word tokens; punctuation separates tokens.
std::vector<std::string> word_tokens(std::string_view s);

/// Splits on '.', '!' and '?' followed by whitespace or end of text.
/// Empty fragments are dropped.
std::vector<std::string> split_sentences(std::string_view s);

}  // namespace forge::util
