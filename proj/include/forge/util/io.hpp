#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace forge::util {

using Json = nlohmann::json;

std::string read_text(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written artifact.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// One JSON object per line; blank lines are ignored.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& records);
void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<Json>& records);

}  // namespace forge::util
