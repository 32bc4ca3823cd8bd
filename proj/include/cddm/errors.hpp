#pragma once

#include <stdexcept>
#include <string>

namespace cddm {

// Vector lengths that do not fit together (odd length, mismatched blocks, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input that is well-formed but degenerate for the operation (all-zero block, log of a
// nonpositive number, zero denominator).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// NaN or Inf reached a place that requires finite numbers.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary container or text config.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint written by a different container version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Filesystem failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metrics file already holds rows for this run id; records are append-only.
class DuplicateRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cddm
