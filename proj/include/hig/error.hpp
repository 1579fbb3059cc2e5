#pragma once

#include <stdexcept>
#include <string>

namespace hig {

// Shape mismatch in matrix or feature arithmetic.
class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Zero-norm vector handed to a similarity computation.
class DegenerateVectorError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite value where finite arithmetic is required.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Structural misuse of the cell hierarchy (non-consecutive parents, bad level).
class HierarchyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (not valid JSON); carries the byte offset when known.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg), byte_offset_(byte_offset) {}
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
  std::size_t byte_offset() const { return byte_offset_; }

private:
  std::size_t byte_offset_ = 0;
};

// Well-formed JSON violating the annotation schema; names frame and field.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid run, scenario or model configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure; message names the path.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Empty input where at least one element is required.
class EmptyInputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hig
