#pragma once

// Little-endian primitive readers/writers shared by the checkpoint and index
// file formats. Errors surface as FormatError so callers can map them to the
// data exit code.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ragtts/errors.hpp"

namespace ragtts::io {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
  write_bytes(os, buf, sizeof(T));
}

inline void write_f64(std::ostream& os, double value) {
  write_le(os, std::bit_cast<uint64_t>(value));
}

inline void write_f32(std::ostream& os, float value) {
  write_le(os, std::bit_cast<uint32_t>(value));
}

inline void read_bytes(std::istream& is, void* p, size_t n, const std::string& what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw FormatError("truncated file while reading " + what);
  }
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T), what);
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline double read_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(read_le<uint64_t>(is, what));
}

inline float read_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(read_le<uint32_t>(is, what));
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& kind) {
  char buf[4];
  read_bytes(is, buf, 4, kind + " magic");
  if (std::memcmp(buf, magic, 4) != 0) {
    throw FormatError("bad magic bytes, not a " + kind + " file");
  }
}

inline void expect_eof(std::istream& is, const std::string& kind) {
  char c;
  if (is.read(&c, 1)) throw FormatError(kind + " file has trailing bytes");
}

}  // namespace ragtts::io
