#pragma once

// Experiment orchestration: per-seed data generation, protocol runs, regret
// traces, parameter sweeps, bound reports and their on-disk artifacts.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "damsim/datagen.hpp"
#include "damsim/graph.hpp"
#include "damsim/harness/config.hpp"
#include "damsim/protocols.hpp"
#include "damsim/regret.hpp"

namespace damsim::harness {

/// The physical graph of a config (fixed by topology/topology_seed, shared by
/// all seeds).
graph::Topology make_topology(const RunConfig& config);

/// Everything generated for one seed. Every protocol of that seed reads the
/// same instance.
struct SeedData {
  std::uint64_t seed = 0;
  graph::Topology topology;
  datagen::GroundTruth truth;
  std::vector<datagen::Stream> streams;
  datagen::LogicalWeights weights;
  datagen::MixingMatrix mixing;
  std::vector<graph::RoutingTree> trees;
  graph::DelayTable delays;
  losses::LossKind kind;
  losses::DomainBall domain;

  protocols::Problem problem() const { return {streams, kind, domain, &weights}; }
};

SeedData prepare_seed(const RunConfig& config, const graph::Topology& topology, std::uint64_t seed);

/// SHA-256 over streams and logical weights of a problem.
std::string problem_digest(const protocols::Problem& problem);

struct ProtocolRun {
  protocols::Protocol protocol = protocols::Protocol::kOgd;
  regret::RegretTrace trace;
  std::string input_digest;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<regret::ComparatorResult> comparators;
  regret::BoundConstants constants;
  std::vector<ProtocolRun> runs;  // config.protocols order
};

/// Solves comparators, runs every configured protocol and computes regret.
SeedRun run_seed(const RunConfig& config, const SeedData& data, protocols::EngineOptions engine = {});

/// Bound for a protocol, or nullopt where it does not apply (C-DOGD with
/// non-uniform logical weights).
std::optional<double> protocol_bound(protocols::Protocol protocol, const regret::BoundConstants& constants,
                                     Round horizon);

struct ExperimentSummary {
  std::string manifest_path;
  std::vector<std::string> files;
  std::vector<std::pair<std::uint64_t, std::string>> failures;  // (seed, message)
};

/// Writes trace_<protocol>.csv, constants.csv, config.txt and manifest.txt to
/// out_dir. `jobs` = 0 uses the hardware concurrency.
ExperimentSummary run_experiment(const RunConfig& config, const std::string& out_dir, std::size_t jobs = 0);

enum class SweepAxis { kHorizon, kRho, kY0 };

/// Accepts "T", "horizon", "rho", "y0".
SweepAxis parse_sweep_axis(std::string_view name);
std::string_view to_string(SweepAxis axis);
RunConfig with_axis_value(const RunConfig& base, SweepAxis axis, double value);

struct SweepRow {
  double value = 0.0;
  protocols::Protocol protocol = protocols::Protocol::kOgd;
  std::uint64_t seed = 0;
  Round horizon = 0;
  double regret = 0.0;
};

/// Final regret for every (value, protocol, seed), in that order.
std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                            std::size_t jobs = 0);

/// Runs sweep() and writes sweep_<axis>.csv plus its manifest to out_dir.
ExperimentSummary run_sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                            const std::string& out_dir, std::size_t jobs = 0);

struct BoundRow {
  protocols::Protocol protocol = protocols::Protocol::kOgd;
  std::uint64_t seed = 0;
  double measured = 0.0;
  std::optional<double> bound;
  bool dominated = false;
};

/// Reads a run manifest and its constants, writes bounds.csv next to it and
/// registers the file in the manifest.
std::vector<BoundRow> report_bounds(const std::string& manifest_path);

}  // namespace damsim::harness
