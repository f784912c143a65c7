#pragma once

#include <stdexcept>
#include <string>

namespace absorb {

/// Invalid parameters, malformed configuration, or a violated precondition on
/// user-supplied data. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A history was queried outside the interval it covers.
class CoverageError : public std::out_of_range {
 public:
  explicit CoverageError(const std::string& what) : std::out_of_range(what) {}
};

/// The damped observer correction needs |grad V(z)| > 0 whenever V(z) > R.
class DegenerateGradientError : public std::runtime_error {
 public:
  explicit DegenerateGradientError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Too few usable data points (decay fit rows, admissible check samples).
class InsufficientDataError : public std::runtime_error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace absorb
