#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace storyweave::jsonl {

using nlohmann::json;

/// Parses every non-blank line; throws std::runtime_error naming the file and
/// line on the first malformed record.
std::vector<json> read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const std::vector<json>& records);

/// One compact record per line, keys in insertion order as given.
std::string dump_line(const json& record);

}  // namespace storyweave::jsonl
