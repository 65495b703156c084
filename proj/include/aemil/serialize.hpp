#ifndef AEMIL_SERIALIZE_HPP
#define AEMIL_SERIALIZE_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "errors.hpp"

namespace aemil::io {

// Little-endian primitives shared by the bag and checkpoint formats.

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

inline void get_bytes(std::istream& is, void* p, std::size_t n,
                      const char* what, std::size_t offset) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw FormatError(std::string(what) + ": truncated at byte offset " +
                      std::to_string(offset + static_cast<std::size_t>(is.gcount())) +
                      ", needed " + std::to_string(n) + " more bytes");
}

inline std::uint32_t get_u32(std::istream& is, const char* what,
                             std::size_t offset) {
  unsigned char b[4];
  get_bytes(is, b, 4, what, offset);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is, const char* what,
                             std::size_t offset) {
  unsigned char b[8];
  get_bytes(is, b, 8, what, offset);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline float get_f32(std::istream& is, const char* what, std::size_t offset) {
  const std::uint32_t bits = get_u32(is, what, offset);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double get_f64(std::istream& is, const char* what, std::size_t offset) {
  const std::uint64_t bits = get_u64(is, what, offset);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

} // namespace aemil::io

#endif
