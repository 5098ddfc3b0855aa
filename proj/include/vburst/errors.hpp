#pragma once

#include <stdexcept>

namespace vburst {

// Invalid run configuration: bad flag values, task/loss combinations that the
// task definitions forbid, degenerate generator parameters.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: unreadable files, bad magic numbers,
// truncated payloads, manifest rows that fail validation.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape or argument-contract violations in library calls.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required (NaN/Inf in tensors,
// domain violations in log/exp, diverged losses).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vburst
