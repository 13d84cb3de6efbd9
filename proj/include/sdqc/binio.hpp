#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sdqc/error.hpp"

// Little-endian fixed-width helpers shared by the binary file formats.
namespace sdqc::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

inline void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Returns false on clean end of stream before the first byte.
inline bool try_get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() == 0) return false;
  if (in.gcount() != 4) fail(ErrorCode::MalformedDocument, "truncated binary record");
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!try_get_u32(in, v)) fail(ErrorCode::MalformedDocument, "unexpected end of binary file");
  return v;
}

inline std::int32_t get_i32(std::istream& in) { return static_cast<std::int32_t>(get_u32(in)); }

inline float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) fail(ErrorCode::MalformedDocument, "truncated string field");
  return s;
}

inline std::uint32_t fnv1a32(const std::string& s, std::uint32_t h = 2166136261u) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace sdqc::binio
