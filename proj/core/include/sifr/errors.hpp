#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sifr {

// Shape or extent mismatch between operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation that needs at least one element received none.
struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A requested count is out of range (e.g. sampling k > N points).
struct CountError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A class label or bin index is outside its valid range.
struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value or otherwise numerically invalid state.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An argument violates a documented invariant (e.g. non-positive box extent).
struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data. Carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

// Bad run configuration (unknown key, unparsable value, missing path).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sifr
