#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace damsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Index of an agent in [0, N).
using AgentId = std::size_t;

/// Round counter. Rounds are 1-based to match the update recursions.
using Round = std::size_t;

/// Bad input: malformed configuration, shape mismatch, violated precondition.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Internal inconsistency detected while running (e.g. a message that never
/// arrived). Indicates a bug rather than bad input.
class EngineError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace damsim
