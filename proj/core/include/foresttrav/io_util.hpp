#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "foresttrav/error.hpp"

// Little-endian binary field helpers. All on-disk formats in this project are
// little-endian; the build targets little-endian hosts only.

namespace foresttrav {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian");

template <typename T>
void write_le(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* field) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw TruncatedError(std::string("truncated input while reading ") + field);
  }
  return value;
}

inline void write_magic(std::ostream& out, const char magic[4]) {
  out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char magic[4],
                         const char* what) {
  char got[4] = {0, 0, 0, 0};
  in.read(got, 4);
  if (!in) throw TruncatedError(std::string("truncated header in ") + what);
  if (std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic in ") + what + ": expected '" +
                      std::string(magic, 4) + "', got '" + std::string(got, 4) +
                      "'");
  }
}

inline void expect_version(std::istream& in, uint16_t expected,
                           const char* what) {
  const auto got = read_le<uint16_t>(in, "version");
  if (got != expected) {
    throw VersionError(std::string("unsupported ") + what + " version " +
                       std::to_string(got) + " (expected " +
                       std::to_string(expected) + ")");
  }
}

}  // namespace foresttrav
