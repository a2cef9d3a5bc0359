#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace hallaudit::hash {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Incremental SHA-256 for stage fingerprints.
class Digest {
 public:
  Digest();
  ~Digest();
  Digest(const Digest&) = delete;
  Digest& operator=(const Digest&) = delete;

  // Each field is length-prefixed so ("ab","c") and ("a","bc") differ.
  Digest& add(std::string_view field);
  Digest& add_file(const std::filesystem::path& path);
  std::string hex();

 private:
  void* ctx_;
};

// Stable 64-bit seed from a base seed and labels.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels);

}  // namespace hallaudit::hash
