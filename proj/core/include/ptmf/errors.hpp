#pragma once

#include <stdexcept>
#include <string>

namespace ptmf {

// Contract violations in caller-supplied data or configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// NaN/Inf produced or consumed by an operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files, unreadable files, malformed binary payloads.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace ptmf
