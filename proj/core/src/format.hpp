#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

namespace dfsdca::detail {

// Shortest representation that round-trips; "nan"/"inf" never reach JSON.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string json_number(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("null");
}

inline std::uint64_t fnv1a(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) s[static_cast<std::size_t>(k)] = digits[h & 0xf];
  return s;
}

}  // namespace dfsdca::detail
