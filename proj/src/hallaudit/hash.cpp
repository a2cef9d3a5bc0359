#include "hallaudit/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "hallaudit/error.hpp"

namespace hallaudit::hash {

namespace {

std::string to_hex(const unsigned char* bytes, unsigned int n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (unsigned int i = 0; i < n; ++i) {
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 0xF];
  }
  return out;
}

EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

Digest::Digest() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::internal, "SHA-256 init failed");
}

Digest::~Digest() { EVP_MD_CTX_free(as_ctx(ctx_)); }

Digest& Digest::add(std::string_view field) {
  const std::string prefix = std::to_string(field.size()) + ":";
  EVP_DigestUpdate(as_ctx(ctx_), prefix.data(), prefix.size());
  EVP_DigestUpdate(as_ctx(ctx_), field.data(), field.size());
  return *this;
}

Digest& Digest::add_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot hash " + path.string());
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(as_ctx(ctx_), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return *this;
}

std::string Digest::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int n = 0;
  EVP_DigestFinal_ex(as_ctx(ctx_), out.data(), &n);
  return to_hex(out.data(), n);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int n = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &n, EVP_sha256(), nullptr);
  return to_hex(out.data(), n);
}

std::string sha256_file(const std::filesystem::path& path) {
  Digest d;
  d.add_file(path);
  return d.hex();
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels) {
  std::string material = std::to_string(base);
  for (auto l : labels) {
    material += '\x1f';
    material += l;
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int n = 0;
  EVP_Digest(material.data(), material.size(), out.data(), &n, EVP_sha256(), nullptr);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | out[static_cast<std::size_t>(i)];
  return seed;
}

}  // namespace hallaudit::hash
