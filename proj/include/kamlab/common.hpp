#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace kamlab {

// Invalid user-facing configuration (bad grid size, slice mismatch, ...).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solver did not reach its tolerance (maps to exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// absent-edge sentinel for min-plus matrices; IEEE infinity, never a large
// finite float, so min-plus products cannot overflow into garbage
constexpr double kNoEdge = std::numeric_limits<double>::infinity();

} // namespace kamlab
