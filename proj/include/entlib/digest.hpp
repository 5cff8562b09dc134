#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "entlib/common.hpp"

namespace entlib {

using Sha256 = std::array<std::uint8_t, 32>;

inline Sha256 sha256(const void* data, std::size_t len) {
  Sha256 out{};
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1 || out_len != 32) {
    throw Error("sha256 computation failed");
  }
  return out;
}

inline Sha256 sha256(const std::string& s) { return sha256(s.data(), s.size()); }

inline std::string hex(const Sha256& d) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

inline std::string sha256_hex(const std::string& s) { return hex(sha256(s)); }

// Digest of an ordered name list; a count prefix plus newline separation keeps
// distinct lists from colliding (names cannot contain newlines).
inline std::string digest_name_list(const std::vector<std::string>& names) {
  std::string joined = std::to_string(names.size());
  for (const auto& n : names) {
    joined.push_back('\n');
    joined += n;
  }
  return sha256_hex(joined);
}

}  // namespace entlib
