#pragma once

// Internal helpers for the binary blob formats: 64-bit floats stored
// little-endian regardless of the host.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <string>

#include "svirkit/errors.hpp"

namespace svirkit::detail {

inline std::uint64_t swap_bytes(std::uint64_t x) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

inline void append_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  char raw[8];
  std::memcpy(raw, &bits, 8);
  out.append(raw, 8);
}

inline double read_le(std::istream& in, const char* what) {
  char raw[8];
  in.read(raw, 8);
  if (!in) throw ValidationError(std::string(what) + " truncated");
  std::uint64_t bits;
  std::memcpy(&bits, raw, 8);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

} // namespace svirkit::detail
