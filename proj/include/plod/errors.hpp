#pragma once

#include <stdexcept>
#include <string>

namespace plod {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometry preconditions.
struct NonPositiveDepth : Error {
  explicit NonPositiveDepth(double z)
      : Error("non-positive depth: " + std::to_string(z)) {}
};

struct DegenerateLine : Error {
  DegenerateLine() : Error("degenerate line: endpoints coincide") {}
  using Error::Error;
};

struct OutOfBounds : Error {
  OutOfBounds(int u, int v)
      : Error("pixel out of bounds: (" + std::to_string(u) + ", " +
              std::to_string(v) + ")") {}
};

// I/O and configuration.
struct DatasetFormatError : Error {
  using Error::Error;
};

struct SpecError : Error {
  using Error::Error;
};

struct NoOverlap : Error {
  using Error::Error;
};

}  // namespace plod
