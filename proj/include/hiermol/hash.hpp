#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace hiermol {

/// 64-bit FNV-1a. Used by every fingerprint and by the text-embedding stub so
/// that bit positions can be reproduced exactly in other languages.
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 14695981039346656037ULL;
  static constexpr std::uint64_t kPrime = 1099511628211ULL;

  Fnv1a& bytes(std::span<const std::uint8_t> data) {
    for (auto byte : data) {
      state_ ^= byte;
      state_ *= kPrime;
    }
    return *this;
  }

  Fnv1a& text(std::string_view s) {
    for (char c : s) {
      state_ ^= static_cast<std::uint8_t>(c);
      state_ *= kPrime;
    }
    return *this;
  }

  // Integers are fed as little-endian bytes of their fixed width.
  Fnv1a& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= static_cast<std::uint8_t>(v >> (8 * i));
      state_ *= kPrime;
    }
    return *this;
  }

  Fnv1a& i32(std::int32_t v) {
    auto u = static_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
      state_ ^= static_cast<std::uint8_t>(u >> (8 * i));
      state_ *= kPrime;
    }
    return *this;
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a(std::string_view s) { return Fnv1a{}.text(s).value(); }

}  // namespace hiermol
