#pragma once

#include <stdexcept>
#include <string>

// Error taxonomy shared across modules. The command-line driver maps these
// onto exit codes: NoMinimumError -> 2, DegenerateStatsError -> 3, anything
// else (including ConfigError and InvalidInputError) -> 1.

namespace shiftlab {

class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& what_arg)
      : std::invalid_argument(what_arg) {}
};

// Model assumption violated: the training objective has no finite minimizer
// (separable data) or the iterates left the trust region.
class NoMinimumError : public std::runtime_error {
 public:
  explicit NoMinimumError(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

// A requested statistic is undefined on the given inputs, e.g. a probit fit
// over a constant regressor or a reweighting with no usable mass.
class DegenerateStatsError : public std::runtime_error {
 public:
  explicit DegenerateStatsError(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

}  // namespace shiftlab
