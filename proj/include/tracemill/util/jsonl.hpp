#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tracemill::util {

using json = nlohmann::json;

/// Calls fn(line_number, line) for each non-blank line; line numbers are 1-based.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

/// Writes the whole file, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

/// Sorted keys, no whitespace; the byte form used for hashing.
std::string canonical(const json& j);

/// Append-only JSONL sink; each append is flushed so a crash loses at most one line.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path, bool truncate = false);
  void append(const json& row);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace tracemill::util
