#pragma once

// Self-contained correctness checks over randomized instances. Shared by the
// `damsim selftest` command and the acceptance suite.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace damsim::oracles {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Six losses x `instances` random instances (dims 2-6): analytic vs central
/// finite-difference gradients, max relative error < 1e-6.
CheckResult check_gradients(std::uint64_t seed, int instances = 20);

/// Message engine vs history replay, bitwise, on `configs` random problems
/// with N <= 6 and T <= 100.
CheckResult check_engine_replay(std::uint64_t seed, int configs = 12);

/// W = I gives per-agent OGD and zero delay gives full-information OGD,
/// both bitwise.
CheckResult check_reductions(std::uint64_t seed, int configs = 6);

/// KMB cost <= 2 x brute-force optimum on `graphs` random graphs with at most
/// 8 nodes and 4 terminals.
CheckResult check_steiner(std::uint64_t seed, int graphs = 50);

/// DeltaNet comparator vs normal equations (interior case) within 1e-6, and a
/// perturbation probe that never improves the objective by more than 1e-6.
CheckResult check_comparators(std::uint64_t seed, int instances = 5);

/// Runs every check above and prints one PASS/FAIL line each.
bool run_selftest(std::ostream& out, std::uint64_t seed = 2024);

}  // namespace damsim::oracles
