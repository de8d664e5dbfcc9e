#include "damsim/datagen.hpp"

#include <cmath>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>

#include "damsim/rng.hpp"

namespace damsim::datagen {
namespace {

constexpr double kStochasticTol = 1e-12;

std::vector<std::vector<AgentId>> positive_support(const Matrix& m) {
  std::vector<std::vector<AgentId>> support(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) > 0.0) support[static_cast<std::size_t>(r)].push_back(static_cast<AgentId>(c));
    }
  }
  return support;
}

}  // namespace

Matrix GroundTruth::effective(AgentId n) const {
  return (1.0 - rho) * personal.at(n) + rho * common;
}

GroundTruth gen_ground_truth(std::size_t n_agents, std::size_t key_dim, std::size_t value_dim, double rho,
                             double noise_std, std::uint64_t seed, const PersonalPrior& prior) {
  if (n_agents == 0 || key_dim == 0 || value_dim == 0) {
    throw ValidationError("ground truth needs N, d_k, d_v >= 1");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError(fmt::format("rho must be in [0, 1], got {}", rho));
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be non-negative");
  if (!(prior.mean_min <= prior.mean_max) || !(0.0 <= prior.variance_min) ||
      !(prior.variance_min <= prior.variance_max)) {
    throw ValidationError("personal prior ranges are inconsistent");
  }

  const auto rows = static_cast<Eigen::Index>(value_dim);
  const auto cols = static_cast<Eigen::Index>(key_dim);
  GroundTruth gt;
  gt.rho = rho;
  gt.noise_std = noise_std;

  // chi-squared with 2 degrees of freedom by inverse CDF: -2 ln(1 - U).
  Rng common_rng = make_rng(seed, SeedPurpose::kGroundTruth, 0);
  boost::random::uniform_01<double> unit;
  gt.common.resize(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) gt.common(r, c) = -2.0 * std::log1p(-unit(common_rng));
  }

  for (AgentId n = 0; n < n_agents; ++n) {
    Rng rng = make_rng(seed, SeedPurpose::kGroundTruth, n + 1);
    const double mean = boost::random::uniform_real_distribution<double>(prior.mean_min, prior.mean_max)(rng);
    const double variance = prior.variance_min == prior.variance_max
                                ? prior.variance_min
                                : boost::random::uniform_real_distribution<double>(prior.variance_min,
                                                                                   prior.variance_max)(rng);
    Matrix m(rows, cols);
    if (variance == 0.0) {
      m.setConstant(mean);
    } else {
      boost::random::normal_distribution<double> gauss(mean, std::sqrt(variance));
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = gauss(rng);
      }
    }
    gt.personal.push_back(std::move(m));
    gt.personal_means.push_back(mean);
    gt.personal_variances.push_back(variance);
  }
  return gt;
}

Stream gen_stream(const GroundTruth& gt, AgentId agent, std::size_t horizon, std::uint64_t seed,
                  const StreamOptions& options) {
  if (horizon == 0) throw ValidationError("stream horizon must be at least 1");
  if (agent >= gt.n_agents()) throw ValidationError(fmt::format("agent {} out of range", agent));
  if (options.gated && !(options.gate_keep_prob >= 0.0 && options.gate_keep_prob <= 1.0)) {
    throw ValidationError("gate keep-probability must be in [0, 1]");
  }

  const Matrix effective = gt.effective(agent);
  const auto key_dim = gt.common.cols();
  const auto value_dim = gt.common.rows();

  Rng rng = make_rng(seed, SeedPurpose::kStream, agent);
  Rng gate_rng = make_rng(seed, SeedPurpose::kGates, agent);
  boost::random::uniform_real_distribution<double> key_dist(-1.0, 1.0);
  boost::random::normal_distribution<double> noise(0.0, 1.0);
  boost::random::bernoulli_distribution<double> keep(options.gated ? options.gate_keep_prob : 0.5);

  Stream stream;
  stream.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    losses::DataPoint d;
    d.key.resize(key_dim);
    for (Eigen::Index i = 0; i < key_dim; ++i) d.key(i) = key_dist(rng);
    d.value = effective * d.key;
    // Noise is drawn even when disabled so that the key sequence does not
    // depend on noise_std.
    for (Eigen::Index i = 0; i < value_dim; ++i) {
      const double z = noise(rng);
      if (gt.noise_std > 0.0) d.value(i) += gt.noise_std * z;
    }
    if (options.gated) {
      d.gate.resize(value_dim);
      for (Eigen::Index i = 0; i < value_dim; ++i) d.gate(i) = keep(gate_rng) ? 1.0 : 0.0;
    }
    stream.push_back(std::move(d));
  }
  return stream;
}

std::vector<Stream> gen_streams(const GroundTruth& gt, std::size_t horizon, std::uint64_t seed,
                                const StreamOptions& options) {
  std::vector<Stream> out;
  out.reserve(gt.n_agents());
  for (AgentId n = 0; n < gt.n_agents(); ++n) out.push_back(gen_stream(gt, n, horizon, seed, options));
  return out;
}

LogicalWeights::LogicalWeights(Matrix w) : w_(std::move(w)) {
  if (w_.rows() == 0 || w_.rows() != w_.cols()) {
    throw ValidationError(fmt::format("logical weights must be square and non-empty, got {}x{}", w_.rows(),
                                      w_.cols()));
  }
  for (Eigen::Index r = 0; r < w_.rows(); ++r) {
    for (Eigen::Index c = 0; c < w_.cols(); ++c) {
      if (!(w_(r, c) >= 0.0 && w_(r, c) <= 1.0)) {
        throw ValidationError(fmt::format("logical weight ({}, {}) = {} outside [0, 1]", r, c, w_(r, c)));
      }
    }
    if (std::abs(w_.row(r).sum() - 1.0) > kStochasticTol) {
      throw ValidationError(fmt::format("logical weight row {} sums to {}", r, w_.row(r).sum()));
    }
  }
  support_ = positive_support(w_);
}

LogicalWeights LogicalWeights::identity(std::size_t n) {
  return LogicalWeights(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

LogicalWeights LogicalWeights::uniform(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  return LogicalWeights(Matrix::Constant(size, size, 1.0 / static_cast<double>(n)));
}

bool LogicalWeights::is_uniform() const {
  const double u = 1.0 / static_cast<double>(w_.rows());
  return (w_.array() == u).all();
}

LogicalWeights gen_logical_weights(std::size_t n_agents, double y0, double y1, std::uint64_t seed) {
  if (n_agents == 0) throw ValidationError("logical weights need at least one agent");
  if (!(y0 >= 0.0)) throw ValidationError("y0 must be non-negative");
  if (!(y1 >= y0)) throw ValidationError("y1 must be >= y0");
  if (!(y1 > 0.0)) throw ValidationError("y1 must be positive");

  const auto size = static_cast<Eigen::Index>(n_agents);
  if (y0 == 0.0) return LogicalWeights::identity(n_agents);

  Matrix w(size, size);
  for (Eigen::Index n = 0; n < size; ++n) {
    Rng rng = make_rng(seed, SeedPurpose::kWeights, static_cast<std::uint64_t>(n));
    boost::random::gamma_distribution<double> off_diag(y0, 1.0);
    boost::random::gamma_distribution<double> diag(y1, 1.0);
    double total = 0.0;
    for (Eigen::Index m = 0; m < size; ++m) {
      w(n, m) = (m == n) ? diag(rng) : off_diag(rng);
      total += w(n, m);
    }
    w.row(n) /= total;
    // Exact unit sum: fold the rounding residue into the diagonal.
    w(n, n) += 1.0 - w.row(n).sum();
  }
  return LogicalWeights(std::move(w));
}

MixingMatrix::MixingMatrix(Matrix a, const graph::Topology& topo) : a_(std::move(a)) {
  const auto n = static_cast<Eigen::Index>(topo.n_agents());
  if (a_.rows() != n || a_.cols() != n) {
    throw ValidationError(fmt::format("mixing matrix is {}x{}, topology has {} agents", a_.rows(), a_.cols(), n));
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (a_(r, c) < 0.0) throw ValidationError(fmt::format("mixing entry ({}, {}) is negative", r, c));
      if (r != c && a_(r, c) > 0.0 &&
          !topo.has_edge(static_cast<AgentId>(r), static_cast<AgentId>(c))) {
        throw ValidationError(fmt::format("mixing entry ({}, {}) is positive but ({}, {}) is not an edge", r,
                                          c, r, c));
      }
    }
    if (std::abs(a_.row(r).sum() - 1.0) > kStochasticTol) {
      throw ValidationError(fmt::format("mixing row {} sums to {}", r, a_.row(r).sum()));
    }
    if (std::abs(a_.col(r).sum() - 1.0) > kStochasticTol) {
      throw ValidationError(fmt::format("mixing column {} sums to {}", r, a_.col(r).sum()));
    }
  }
  support_ = positive_support(a_);
}

MixingMatrix gen_mixing_matrix(const graph::Topology& topo) {
  const auto n = static_cast<Eigen::Index>(topo.n_agents());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : topo.edges()) {
    const double weight = 1.0 / (1.0 + static_cast<double>(std::max(topo.degree(e.u), topo.degree(e.v))));
    a(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v)) = weight;
    a(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u)) = weight;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    double off = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != r) off += a(r, c);
    }
    a(r, r) = 1.0 - off;
  }
  return MixingMatrix(std::move(a), topo);
}

}  // namespace damsim::datagen
