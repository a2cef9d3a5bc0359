#include "hallaudit/jsonl.hpp"

#include <sstream>

#include "hallaudit/error.hpp"

namespace hallaudit::jsonl {

void for_each(const std::filesystem::path& path, const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    fn(record, number);
  }
}

std::vector<Json> read_all(const std::filesystem::path& path) {
  std::vector<Json> out;
  for_each(path, [&](const Json& j, std::size_t) { out.push_back(j); });
  return out;
}

std::vector<Json> read_all_if_exists(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return read_all(path);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_all(const std::filesystem::path& path, std::span<const Json> records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Appender::Appender(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorKind::io, "cannot open " + path_.string() + " for append");
}

void Appender::append(const Json& record) {
  const auto line = record.dump() + "\n";
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorKind::io, "append to " + path_.string() + " failed");
}

}  // namespace hallaudit::jsonl
