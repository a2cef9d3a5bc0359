#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hallaudit::jsonl {

using Json = nlohmann::json;

// Invokes `fn` for every non-blank line. Parse failures are reported as
// "<file>:<line>: ..." errors.
void for_each(const std::filesystem::path& path, const std::function<void(const Json&, std::size_t)>& fn);

std::vector<Json> read_all(const std::filesystem::path& path);

// Missing file reads as empty.
std::vector<Json> read_all_if_exists(const std::filesystem::path& path);

// Replaces the file in one rename so readers never see a partial write.
void write_all(const std::filesystem::path& path, std::span<const Json> records);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string read_text(const std::filesystem::path& path);

// Serialized single-writer append log.
class Appender {
 public:
  explicit Appender(std::filesystem::path path);

  void append(const Json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace hallaudit::jsonl
