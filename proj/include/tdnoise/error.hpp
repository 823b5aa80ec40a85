#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tdn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (non-finite coordinates,
/// mismatched array lengths, bad parameter ranges).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Geometry file could not be parsed. `offset` is the byte offset into the
/// file where parsing stopped, `line` the 1-based line number for text
/// sections (0 inside binary payloads).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset, std::uint64_t line)
      : Error(format(what, offset, line)), offset_(offset), line_(line) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& what, std::uint64_t offset,
                            std::uint64_t line) {
    std::string s = what + " (byte " + std::to_string(offset);
    if (line > 0) s += ", line " + std::to_string(line);
    return s + ")";
  }

  std::uint64_t offset_;
  std::uint64_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An internal consistency check failed. Indicates a bug, not bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdn
