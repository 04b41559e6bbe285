#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flowid {

// Error categories map onto the CLI exit codes (1 = I/O, 2 = format, 3 = config).

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed capture file. Carries the byte offset where parsing stopped.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : FormatError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cosine similarity requested on a zero-norm embedding row.
class DegenerateEmbeddingError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowid
