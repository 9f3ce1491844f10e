#pragma once

#include <stdexcept>
#include <string>

namespace repgeom {

/// Input failed a shape, range, schema or file-format check.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a finite, well-defined result
/// (degenerate data, no interior optimum, singular system).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace repgeom
