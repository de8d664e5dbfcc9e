#pragma once

#include "damsim/losses.hpp"

namespace damsim::protocols::detail {

// Every learner accumulates weighted gradients and descends with exactly
// these expressions, so that reduction tests can compare runs bitwise.

inline void accumulate(Matrix& acc, double weight, const Matrix& grad) { acc += weight * grad; }

inline Matrix descend(const losses::DomainBall& domain, const Matrix& x, double eta, const Matrix& acc) {
  return losses::project(domain, x - eta * acc);
}

}  // namespace damsim::protocols::detail
