#pragma once

// Seeded synthetic data: ground-truth memories, key/value streams, logical
// weight matrices and consensus mixing matrices.

#include <cstdint>
#include <vector>

#include "damsim/graph.hpp"
#include "damsim/losses.hpp"
#include "damsim/types.hpp"

namespace damsim::datagen {

/// Prior for the personal matrices: per agent, mean ~ U[mean_min, mean_max]
/// and variance ~ U[variance_min, variance_max], then i.i.d. Gaussian entries.
struct PersonalPrior {
  double mean_min = -5.0;
  double mean_max = 5.0;
  double variance_min = 0.0;
  double variance_max = 50.0;
};

struct GroundTruth {
  Matrix common;                // chi-squared(2) entries
  std::vector<Matrix> personal;  // one per agent
  std::vector<double> personal_means;
  std::vector<double> personal_variances;
  double rho = 0.75;
  double noise_std = 1.0;

  std::size_t n_agents() const { return personal.size(); }
  /// (1 - rho) M_n + rho M_com.
  Matrix effective(AgentId n) const;
};

GroundTruth gen_ground_truth(std::size_t n_agents, std::size_t key_dim, std::size_t value_dim, double rho,
                             double noise_std, std::uint64_t seed, const PersonalPrior& prior = {});

struct StreamOptions {
  /// Draw binary gates (needed by the gated losses).
  bool gated = false;
  /// Bernoulli keep-probability of each gate entry.
  double gate_keep_prob = 0.9;
};

/// Rounds 1..T of one agent; element t-1 holds round t.
using Stream = std::vector<losses::DataPoint>;

/// Keys ~ U[-1, 1]^d_k, values = M_eff k + noise. Depends only on
/// (gt, agent, T, seed, options); every prefix of a longer stream equals the
/// shorter stream.
Stream gen_stream(const GroundTruth& gt, AgentId agent, std::size_t horizon, std::uint64_t seed,
                  const StreamOptions& options = {});

std::vector<Stream> gen_streams(const GroundTruth& gt, std::size_t horizon, std::uint64_t seed,
                                const StreamOptions& options = {});

/// Row-stochastic matrix of memorization requirements.
class LogicalWeights {
 public:
  /// Validates entries in [0, 1] and unit row sums (1e-12).
  explicit LogicalWeights(Matrix w);

  static LogicalWeights identity(std::size_t n);
  static LogicalWeights uniform(std::size_t n);

  const Matrix& matrix() const { return w_; }
  std::size_t n_agents() const { return static_cast<std::size_t>(w_.rows()); }
  double operator()(AgentId n, AgentId m) const { return w_(n, m); }
  /// {m : w(n, m) > 0}, ascending.
  const std::vector<AgentId>& support(AgentId n) const { return support_.at(n); }
  /// True when every entry equals 1/N.
  bool is_uniform() const;

 private:
  Matrix w_;
  std::vector<std::vector<AgentId>> support_;
};

/// Row n ~ Dirichlet(y0, ..., y1 (at n), ..., y0). y0 = 0 yields the identity.
LogicalWeights gen_logical_weights(std::size_t n_agents, double y0, double y1, std::uint64_t seed);

/// Doubly stochastic, graph-supported consensus weights.
class MixingMatrix {
 public:
  /// Validates non-negativity, unit row and column sums (1e-12) and that
  /// off-diagonal mass sits on topology edges only.
  MixingMatrix(Matrix a, const graph::Topology& topo);

  const Matrix& matrix() const { return a_; }
  double operator()(AgentId n, AgentId m) const { return a_(n, m); }
  /// {m : a(n, m) > 0}, ascending (includes n when a(n, n) > 0).
  const std::vector<AgentId>& support(AgentId n) const { return support_.at(n); }

 private:
  Matrix a_;
  std::vector<std::vector<AgentId>> support_;
};

/// Metropolis-Hastings weights: a(n, m) = 1 / (1 + max(deg n, deg m)) on edges.
MixingMatrix gen_mixing_matrix(const graph::Topology& topo);

}  // namespace damsim::datagen
