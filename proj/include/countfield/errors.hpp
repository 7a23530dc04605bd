#pragma once

#include <stdexcept>
#include <string>

namespace countfield {

/// Shape disagreement between vectors/matrices that must be conformable.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Input violates a documented precondition (bad value, unknown region, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A mis-declare column had no observations and no smoothing to fall back on.
class DegenerateColumnError : public ValidationError {
 public:
  explicit DegenerateColumnError(const std::string& what) : ValidationError(what) {}
};

/// File could not be read/parsed.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace countfield
