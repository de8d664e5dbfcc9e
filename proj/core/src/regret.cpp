#include "damsim/regret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace damsim::regret {
namespace {

using losses::LossVariant;

double gradient_mapping(const losses::DomainBall& domain, const Matrix& u, const Matrix& grad, double step) {
  return (u - losses::project(domain, u - step * grad)).norm() / step;
}

}  // namespace

CumulativeObjective CumulativeObjective::build(const protocols::Problem& problem, AgentId n, Round horizon) {
  problem.validate();
  if (horizon == 0 || horizon > problem.horizon()) {
    throw ValidationError(fmt::format("horizon {} outside the streamed range [1, {}]", horizon, problem.horizon()));
  }
  const auto dk = problem.key_dim();
  const auto dv = problem.value_dim();
  const auto variant = problem.kind.variant;

  CumulativeObjective obj;
  obj.quadratic_ = Matrix::Zero(dk, dk);
  obj.row_ridge_ = Vector::Zero(dv);
  obj.linear_ = Matrix::Zero(dv, dk);

  for (AgentId m : problem.weights->support(n)) {
    const double w = (*problem.weights)(n, m);
    for (Round t = 1; t <= horizon; ++t) {
      const auto& d = problem.data(m, t);
      const Vector k = losses::effective_key(problem.kind, d.key);
      obj.linear_ += w * d.value * k.transpose();
      switch (variant) {
        case LossVariant::kDeltaNet:
          obj.quadratic_ += w * k * k.transpose();
          obj.constant_ += 0.5 * w * d.value.squaredNorm();
          break;
        case LossVariant::kSoftmaxWithNorm:
          obj.row_ridge_.array() += w;
          break;
        case LossVariant::kGatedLinearAttention:
        case LossVariant::kGatedSoftmax:
          obj.row_ridge_ += w * (1.0 - d.gate.array()).matrix();
          break;
        case LossVariant::kLinearAttention:
        case LossVariant::kSoftmaxNoNorm:
          break;
      }
    }
  }
  return obj;
}

double CumulativeObjective::value(const Matrix& u) const {
  const double quad = (u * quadratic_).cwiseProduct(u).sum();
  const double ridge = row_ridge_.dot(u.rowwise().squaredNorm());
  return 0.5 * (quad + ridge) - u.cwiseProduct(linear_).sum() + constant_;
}

Matrix CumulativeObjective::gradient(const Matrix& u) const {
  return u * quadratic_ + row_ridge_.asDiagonal() * u - linear_;
}

double CumulativeObjective::curvature_estimate(int iterations) const {
  const double ridge = row_ridge_.size() > 0 ? row_ridge_.maxCoeff() : 0.0;
  Vector x = Vector::Ones(quadratic_.rows()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Vector y = quadratic_ * x;
    const double norm = y.norm();
    if (norm == 0.0) {
      lambda = 0.0;
      break;
    }
    lambda = norm;
    x = y / norm;
  }
  return lambda + ridge;
}

ComparatorResult hindsight_optimum(const protocols::Problem& problem, AgentId n, Round horizon,
                                   const SolverOptions& options) {
  const auto obj = CumulativeObjective::build(problem, n, horizon);
  const auto& domain = problem.domain;

  ComparatorResult result;
  result.memory = Matrix::Zero(problem.value_dim(), problem.key_dim());
  Matrix& u = result.memory;

  if (problem.kind.variant == LossVariant::kDeltaNet) {
    const double lambda = obj.curvature_estimate(50);
    const double step = lambda > 0.0 ? 1.0 / lambda : 1.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      const Matrix next = losses::project(domain, u - step * obj.gradient(u));
      result.achieved_tolerance = (u - next).norm() / step;
      result.iterations = it + 1;
      if (result.achieved_tolerance < options.tolerance) {
        result.converged = true;
        break;
      }
      u = next;
    }
    return result;
  }

  // Backtracking projected gradient for the remaining losses.
  double step = 1.0;
  double value = obj.value(u);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Matrix grad = obj.gradient(u);
    Matrix next;
    double next_value = 0.0;
    for (int tries = 0; tries < 200; ++tries) {
      next = losses::project(domain, u - step * grad);
      next_value = obj.value(next);
      const Matrix diff = next - u;
      const double model = value + grad.cwiseProduct(diff).sum() + diff.squaredNorm() / (2.0 * step);
      if (next_value <= model + 1e-12 * std::abs(value)) break;
      step *= 0.5;
    }
    result.achieved_tolerance = (u - next).norm() / step;
    result.iterations = it + 1;
    if (result.achieved_tolerance < options.tolerance) {
      result.converged = true;
      break;
    }
    u = next;
    value = next_value;
    step *= 2.0;
  }
  if (!result.converged) {
    result.achieved_tolerance = gradient_mapping(domain, u, obj.gradient(u), step);
  }
  return result;
}

RegretTrace compute_regret(const protocols::RunHistory& history, std::span<const Matrix> comparators,
                           const protocols::Problem& problem) {
  const std::size_t n_agents = history.n_agents;
  const Round horizon = history.horizon;
  if (comparators.size() != n_agents || problem.n_agents() != n_agents) {
    throw ValidationError(fmt::format("{} comparators and {} streams for a {}-agent history", comparators.size(),
                                      problem.n_agents(), n_agents));
  }
  if (history.iterates.size() != n_agents * horizon || problem.horizon() < horizon) {
    throw ValidationError(fmt::format("history length {} does not match horizon {} (streams cover {})",
                                      history.iterates.size() / std::max<std::size_t>(n_agents, 1), horizon,
                                      problem.horizon()));
  }

  RegretTrace trace;
  const auto rows = static_cast<Eigen::Index>(horizon);
  const auto cols = static_cast<Eigen::Index>(n_agents);
  trace.cumulative_loss.resize(rows, cols);
  trace.comparator_loss.resize(rows, cols);
  trace.regret.resize(rows);
  trace.comparators.assign(comparators.begin(), comparators.end());

  std::vector<double> cum(n_agents, 0.0);
  std::vector<double> comp(n_agents, 0.0);
  for (Round t = 1; t <= horizon; ++t) {
    double reg = 0.0;
    for (AgentId n = 0; n < n_agents; ++n) {
      cum[n] += protocols::weighted_loss(problem, n, history.iterate(n, t), t);
      comp[n] += protocols::weighted_loss(problem, n, comparators[n], t);
      reg += cum[n] - comp[n];
      trace.cumulative_loss(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(n)) = cum[n];
      trace.comparator_loss(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(n)) = comp[n];
    }
    trace.regret(static_cast<Eigen::Index>(t - 1)) = reg;
  }
  return trace;
}

double regret_at(const protocols::RunHistory& history, std::span<const Matrix> comparators,
                 const protocols::Problem& problem, Round t) {
  if (t == 0 || t > history.horizon) throw ValidationError(fmt::format("round {} outside the history", t));
  std::vector<double> cum(history.n_agents, 0.0);
  std::vector<double> comp(history.n_agents, 0.0);
  double reg = 0.0;
  for (Round s = 1; s <= t; ++s) {
    reg = 0.0;
    for (AgentId n = 0; n < history.n_agents; ++n) {
      cum[n] += protocols::weighted_loss(problem, n, history.iterate(n, s), s);
      comp[n] += protocols::weighted_loss(problem, n, comparators[n], s);
      reg += cum[n] - comp[n];
    }
  }
  return reg;
}

std::vector<double> stream_lipschitz(const protocols::Problem& problem) {
  std::vector<double> out;
  out.reserve(problem.n_agents());
  for (AgentId m = 0; m < problem.n_agents(); ++m) {
    double key_bound = 0.0;
    double value_bound = 0.0;
    for (const auto& d : problem.streams[m]) {
      key_bound = std::max(key_bound, losses::effective_key(problem.kind, d.key).norm());
      value_bound = std::max(value_bound, d.value.norm());
    }
    // A zero supremum is still bounded by the smallest positive double.
    constexpr double tiny = std::numeric_limits<double>::min();
    out.push_back(losses::grad_norm_bound(problem.kind, problem.domain, std::max(key_bound, tiny),
                                          std::max(value_bound, tiny)));
  }
  return out;
}

BoundConstants assemble_constants(const datagen::LogicalWeights& weights, std::span<const double> lipschitz,
                                  const graph::DelayTable& delays, double diameter, double c) {
  const std::size_t n_agents = weights.n_agents();
  if (lipschitz.size() != n_agents || delays.n_agents() != n_agents) {
    throw ValidationError("constants need one Lipschitz value and one delay row per agent");
  }
  BoundConstants out;
  out.diameter = diameter;
  out.c = c;
  out.uniform_weights = weights.is_uniform();
  out.l_max = lipschitz.empty() ? 0.0 : *std::max_element(lipschitz.begin(), lipschitz.end());

  const double b2 = diameter * diameter;
  for (AgentId n = 0; n < n_agents; ++n) {
    AgentConstants a;
    a.lipschitz = lipschitz[n];
    const auto& support = weights.support(n);
    a.support = support.size();
    a.tau_min = std::numeric_limits<int>::max();
    a.tau_max = 0;
    for (AgentId m : support) {
      const double w = weights(n, m);
      a.weighted_l += w * lipschitz[m];
      a.k = std::max(a.k, w * lipschitz[m]);
      a.sum_l += lipschitz[m];
      const int tau = delays.round_trip(n, m);
      if (tau < 0) throw ValidationError(fmt::format("no delay for ({}, {})", n, m));
      a.tau_min = std::min(a.tau_min, tau);
      a.tau_max = std::max(a.tau_max, tau);
      a.sum_tau += tau;
    }
    if (support.empty()) a.tau_min = 0;
    a.delta_tau = a.tau_max - a.tau_min;

    const double card = static_cast<double>(a.support);
    a.q = 0.5 * a.k * a.sum_l + card * a.k * a.k * static_cast<double>(a.sum_tau);
    a.p = card * card * a.k * a.k * static_cast<double>(a.tau_max) * static_cast<double>(a.tau_max);
    a.c_term = 0.5 * static_cast<double>(a.delta_tau) * (a.k * a.sum_l + card * b2);
    out.agents.push_back(a);
  }
  return out;
}

double spectral_alpha(const Matrix& mixing) {
  if (mixing.rows() < 2) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(mixing);
  return svd.singularValues()(1);
}

double bound_ogd(const BoundConstants& constants, Round horizon) {
  const double b2 = constants.diameter * constants.diameter;
  const double root_t = std::sqrt(static_cast<double>(horizon));
  double total = 0.0;
  for (const auto& a : constants.agents) total += (0.5 * b2 + a.weighted_l * a.weighted_l) * root_t;
  return total;
}

double bound_cdogd(const BoundConstants& constants, Round horizon) {
  if (!constants.alpha) throw ValidationError("C-DOGD bound needs the mixing contraction factor alpha");
  const double alpha = *constants.alpha;
  if (!(alpha < 1.0)) throw ValidationError(fmt::format("alpha = {} >= 1: mixing does not contract", alpha));
  const double n = static_cast<double>(constants.agents.size());
  return n * (constants.diameter + (5.0 - alpha) / (1.0 - alpha) * constants.l_max * constants.l_max) *
         std::sqrt(static_cast<double>(horizon));
}

double bound_damtogd(const BoundConstants& constants, Round horizon) {
  const double c = constants.c;
  const double b2 = constants.diameter * constants.diameter;
  const double t = static_cast<double>(horizon);
  double total = 0.0;
  for (const auto& a : constants.agents) {
    total += 2.0 * c * a.q * std::sqrt(t + a.delta_tau) + b2 / (2.0 * c) * std::sqrt(t) + a.p * c + a.c_term;
  }
  return total;
}

double telescoping_diagnostic(const protocols::RunHistory& history, AgentId n, const Matrix& comparator,
                              const protocols::ScheduleParams& schedule) {
  const int tau_min = n < schedule.tau_min.size() ? schedule.tau_min[n] : 0;
  double total = 0.0;
  for (Round t = static_cast<Round>(tau_min) + 1; t < history.horizon; ++t) {
    const double eta = protocols::learning_rate(schedule, n, t);
    total += ((history.iterate(n, t) - comparator).squaredNorm() -
              (history.iterate(n, t + 1) - comparator).squaredNorm()) /
             (2.0 * eta);
  }
  return total;
}

}  // namespace damsim::regret
