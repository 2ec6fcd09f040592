#pragma once

#include <stdexcept>
#include <string>

namespace ohtes {

// Raised when a value that must stay finite (loss, gradient, fitness) is NaN/Inf.
// Callers decide whether to skip the update or abort the run.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an operation has no data to work with (empty buffer, no returns).
class Unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ohtes
