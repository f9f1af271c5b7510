#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dso {

// Utility-comparison tolerance in seconds. "Strictly better" means an
// improvement larger than this; routes within it of the maximum count as
// equal-best. Far below any physical headway in the model.
inline constexpr double kUtilityEps = 1e-9;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Scenario / configuration input that fails validation.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A run that had to reach an equilibrium did not.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Loading could not make progress: vehicles remain but none can advance.
class GridlockError : public std::runtime_error {
 public:
  GridlockError(const std::string& what, std::vector<int> cycle_links)
      : std::runtime_error(what), cycle(std::move(cycle_links)) {}
  std::vector<int> cycle;  // link ids forming the blocked cycle
};

}  // namespace dso
