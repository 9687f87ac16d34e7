#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "sane/errors.hpp"

namespace sane {

// Incremental SHA-256 (libcrypto). Used for cache keys and content digests.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(const void* data, std::size_t len) {
    EVP_DigestUpdate(ctx_, data, len);
    return *this;
  }
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }
  // Length-prefixed so that ("ab","c") and ("a","bc") differ.
  Sha256& field(std::string_view s) {
    const std::uint64_t n = s.size();
    update(&n, sizeof n);
    return update(s);
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view s) { return Sha256().update(s).hex(); }

// Cheap stable 64-bit hash for bulk float data (mock denoiser seeding).
// splitmix64 finalizer applied per 64-bit word.
class StableHash64 {
 public:
  explicit StableHash64(std::uint64_t seed = 0x9E3779B97F4A7C15ull) : h_(seed) {}

  StableHash64& word(std::uint64_t w) {
    h_ = mix(h_ ^ mix(w + 0x9E3779B97F4A7C15ull));
    return *this;
  }
  StableHash64& bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::size_t i = 0;
    for (; i + 8 <= len; i += 8) {
      std::uint64_t w;
      std::memcpy(&w, p + i, 8);
      word(w);
    }
    std::uint64_t tail = 0;
    std::memcpy(&tail, p + i, len - i);
    word(tail ^ (static_cast<std::uint64_t>(len) << 56));
    return *this;
  }
  StableHash64& text(std::string_view s) { return bytes(s.data(), s.size()); }
  std::uint64_t value() const noexcept { return h_; }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t h_;
};

}  // namespace sane
