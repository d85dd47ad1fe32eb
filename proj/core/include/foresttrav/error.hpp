#pragma once

#include <stdexcept>
#include <string>

namespace foresttrav {

// Invalid user input: unknown keys, out-of-range values, malformed CLI usage.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Structural problems in data files. Kept distinct so callers can report
// exactly what is wrong with an input file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

class VersionError : public FormatError {
 public:
  explicit VersionError(const std::string& what) : FormatError(what) {}
};

class TruncatedError : public FormatError {
 public:
  explicit TruncatedError(const std::string& what) : FormatError(what) {}
};

// Semantic conflicts in otherwise well-formed data (e.g. a voxel hand-labeled
// both traversable and non-traversable).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace foresttrav
