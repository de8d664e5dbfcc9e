#pragma once

// Hindsight comparators, exact network regret, and the closed-form regret
// bounds for OGD, C-DOGD and DAM-TOGD.

#include <optional>
#include <span>
#include <vector>

#include "damsim/datagen.hpp"
#include "damsim/graph.hpp"
#include "damsim/losses.hpp"
#include "damsim/protocols.hpp"
#include "damsim/types.hpp"

namespace damsim::regret {

/// Agent n's cumulative objective sum_{t<=T} sum_m w(n,m) f_{m,t}(U) for a
/// fixed U. Every supported loss is quadratic in U, so it is stored as
///   1/2 sum_i u_i^T (Q + r_i I) u_i - <U, G> + h
/// where u_i is row i of U.
class CumulativeObjective {
 public:
  static CumulativeObjective build(const protocols::Problem& problem, AgentId n, Round horizon);

  double value(const Matrix& u) const;
  Matrix gradient(const Matrix& u) const;

  const Matrix& quadratic() const { return quadratic_; }
  const Vector& row_ridge() const { return row_ridge_; }
  const Matrix& linear() const { return linear_; }
  double constant() const { return constant_; }

  /// Largest eigenvalue of (Q + max_i r_i I) by power iteration.
  double curvature_estimate(int iterations = 50) const;

 private:
  Matrix quadratic_;  // d_k x d_k
  Vector row_ridge_;  // d_v
  Matrix linear_;     // d_v x d_k
  double constant_ = 0.0;
};

struct SolverOptions {
  double tolerance = 1e-9;
  std::size_t max_iterations = 100000;
};

struct ComparatorResult {
  Matrix memory;
  /// Gradient-mapping norm at the returned point.
  double achieved_tolerance = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// argmin over the ball of agent n's cumulative objective. DeltaNet uses a
/// fixed step 1/lambda_max; the other losses use backtracking line search.
ComparatorResult hindsight_optimum(const protocols::Problem& problem, AgentId n, Round horizon,
                                   const SolverOptions& options = {});

struct RegretTrace {
  Matrix cumulative_loss;    // (T x N) L_n^t of the iterates
  Matrix comparator_loss;    // (T x N) L_n^t of the fixed comparator
  Vector regret;             // (T) network regret of every prefix
  std::vector<Matrix> comparators;

  double final_regret() const { return regret(regret.size() - 1); }
};

RegretTrace compute_regret(const protocols::RunHistory& history, std::span<const Matrix> comparators,
                           const protocols::Problem& problem);

/// Reg(t) evaluated directly over rounds 1..t.
double regret_at(const protocols::RunHistory& history, std::span<const Matrix> comparators,
                 const protocols::Problem& problem, Round t);

/// Per-agent quantities entering the bounds.
struct AgentConstants {
  double lipschitz = 0.0;      // L_n of the agent's own loss stream
  double weighted_l = 0.0;     // L_bar_n = sum_m w L_m
  double k = 0.0;              // K_n = max_m w L_m
  double sum_l = 0.0;          // sum_{m in W_n} L_m
  std::size_t support = 0;     // |W_n|
  int tau_min = 0;
  int tau_max = 0;
  int delta_tau = 0;
  long long sum_tau = 0;       // sum_{m in W_n} tau_{n,m}
  double q = 0.0;
  double p = 0.0;
  double c_term = 0.0;         // C_n
};

struct BoundConstants {
  std::vector<AgentConstants> agents;
  double diameter = 0.0;       // B
  double c = 1.0;
  double l_max = 0.0;
  std::optional<double> alpha;  // second-largest singular value of A
  bool uniform_weights = false;
};

/// Empirical per-agent L_m from grad_norm_bound with the stream maxima of
/// ||phi(k)|| and ||v||.
std::vector<double> stream_lipschitz(const protocols::Problem& problem);

BoundConstants assemble_constants(const datagen::LogicalWeights& weights, std::span<const double> lipschitz,
                                  const graph::DelayTable& delays, double diameter, double c);

/// Second-largest singular value of a mixing matrix.
double spectral_alpha(const Matrix& mixing);

double bound_ogd(const BoundConstants& constants, Round horizon);
/// Throws ValidationError when alpha is missing or >= 1.
double bound_cdogd(const BoundConstants& constants, Round horizon);
double bound_damtogd(const BoundConstants& constants, Round horizon);

/// sum_{t=tau_min+1}^{T} (||X_t - U||^2 - ||X_{t+1} - U||^2) / (2 eta_t) for one
/// agent over the recorded rounds (diagnostic only).
double telescoping_diagnostic(const protocols::RunHistory& history, AgentId n, const Matrix& comparator,
                              const protocols::ScheduleParams& schedule);

}  // namespace damsim::regret
