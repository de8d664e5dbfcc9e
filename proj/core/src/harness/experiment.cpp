#include "damsim/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "damsim/harness/csv.hpp"
#include "damsim/harness/digest.hpp"
#include "damsim/rng.hpp"
#include "damsim/version.hpp"

namespace damsim::harness {
namespace {

namespace fs = std::filesystem;
using protocols::Protocol;

// Runs task(i) for i in [0, count) on up to `jobs` threads. Each task writes
// only its own slot, so results are independent of scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& th : workers) th.join();
}

std::string join_protocols(std::span<const Protocol> list) {
  std::string out;
  for (auto p : list) {
    if (!out.empty()) out += ',';
    out += protocols::to_string(p);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(v);
    } else {
      out += fmt::format("{}", v);
    }
  }
  return out;
}

constexpr std::string_view kConstantsHeader =
    "seed,agent,lipschitz,weighted_l,k,sum_l,support,tau_min,tau_max,delta_tau,sum_tau,q,p,c_term";

void write_constants_rows(std::string& out, std::uint64_t seed, const regret::BoundConstants& constants) {
  for (std::size_t n = 0; n < constants.agents.size(); ++n) {
    const auto& a = constants.agents[n];
    fmt::format_to(std::back_inserter(out), "{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{},{},{},{:.17g},{:.17g},{:.17g}\n",
                   seed, n, a.lipschitz, a.weighted_l, a.k, a.sum_l, a.support, a.tau_min, a.tau_max, a.delta_tau,
                   a.sum_tau, a.q, a.p, a.c_term);
  }
}

struct SeedOutput {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<std::string> trace_text;  // per protocol
  std::string constants_text;
  std::vector<std::pair<std::string, std::string>> manifest;
};

}  // namespace

graph::Topology make_topology(const RunConfig& config) {
  if (config.topology.rfind("file:", 0) == 0) {
    fs::path path = config.topology.substr(5);
    if (path.is_relative()) path = fs::path(config.base_dir) / path;
    const auto edges = graph::read_edge_list(path.string());
    return graph::Topology::from_edges(config.n_agents, edges);
  }
  return graph::build_topology(config.n_agents, graph::GeneratorSpec::parse(config.topology),
                               config.topology_seed);
}

SeedData prepare_seed(const RunConfig& config, const graph::Topology& topology, std::uint64_t seed) {
  config.validate();
  auto truth = datagen::gen_ground_truth(config.n_agents, config.key_dim, config.value_dim, config.rho,
                                         config.noise_std, seed, config.prior);
  auto streams = datagen::gen_streams(truth, config.horizon, seed,
                                      {config.loss.gated(), config.gate_keep_prob});
  auto weights = datagen::gen_logical_weights(config.n_agents, config.y0, config.y1, seed);
  auto mixing = datagen::gen_mixing_matrix(topology);
  auto trees = protocols::build_routing_trees(topology, weights);
  auto delays = graph::derive_delays(trees, &weights.matrix());
  return SeedData{seed,
                  topology,
                  std::move(truth),
                  std::move(streams),
                  std::move(weights),
                  std::move(mixing),
                  std::move(trees),
                  std::move(delays),
                  config.loss,
                  losses::DomainBall(config.radius)};
}

std::string problem_digest(const protocols::Problem& problem) {
  Digest d;
  d.update(static_cast<std::uint64_t>(problem.n_agents()));
  for (const auto& stream : problem.streams) {
    d.update(static_cast<std::uint64_t>(stream.size()));
    for (const auto& point : stream) {
      d.update(point.key);
      d.update(point.value);
      d.update(point.gate);
    }
  }
  d.update(problem.weights->matrix());
  return d.hex();
}

SeedRun run_seed(const RunConfig& config, const SeedData& data, protocols::EngineOptions engine) {
  const auto problem = data.problem();
  const Round horizon = config.horizon;

  SeedRun out;
  out.seed = data.seed;
  std::vector<Matrix> comparators;
  for (AgentId n = 0; n < config.n_agents; ++n) {
    out.comparators.push_back(regret::hindsight_optimum(problem, n, horizon));
    comparators.push_back(out.comparators.back().memory);
  }

  const auto lipschitz = regret::stream_lipschitz(problem);
  out.constants = regret::assemble_constants(data.weights, lipschitz, data.delays, data.domain.diameter(), config.c);
  out.constants.alpha = regret::spectral_alpha(data.mixing.matrix());

  const std::string digest = problem_digest(problem);
  for (Protocol p : config.protocols) {
    protocols::RunInputs inputs{problem, &data.mixing, data.trees, config.c, engine};
    const auto history = protocols::run_protocol(p, inputs);
    out.runs.push_back({p, regret::compute_regret(history, comparators, problem), digest});
  }
  return out;
}

std::optional<double> protocol_bound(Protocol protocol, const regret::BoundConstants& constants, Round horizon) {
  switch (protocol) {
    case Protocol::kOgd:
      return regret::bound_ogd(constants, horizon);
    case Protocol::kDamtogd:
      return regret::bound_damtogd(constants, horizon);
    case Protocol::kCdogd:
      if (!constants.uniform_weights) return std::nullopt;
      return regret::bound_cdogd(constants, horizon);
  }
  return std::nullopt;
}

ExperimentSummary run_experiment(const RunConfig& config, const std::string& out_dir, std::size_t jobs) {
  config.validate();
  fs::create_directories(out_dir);
  const auto topology = make_topology(config);
  const auto seeds = config.seed_list();
  const std::string run_id = config.run_id();

  std::vector<SeedOutput> outputs(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    SeedOutput& out = outputs[i];
    out.seed = seeds[i];
    try {
      const auto data = prepare_seed(config, topology, seeds[i]);
      const auto result = run_seed(config, data);
      const std::string s = std::to_string(seeds[i]);

      double max_tol = 0.0;
      bool converged = true;
      for (const auto& c : result.comparators) {
        max_tol = std::max(max_tol, c.achieved_tolerance);
        converged = converged && c.converged;
      }
      out.manifest.emplace_back("seed." + s + ".stream_digest", problem_digest(data.problem()));
      out.manifest.emplace_back("seed." + s + ".alpha", format_real(*result.constants.alpha));
      out.manifest.emplace_back("seed." + s + ".one_minus_alpha", format_real(1.0 - *result.constants.alpha));
      out.manifest.emplace_back("seed." + s + ".uniform_weights", result.constants.uniform_weights ? "1" : "0");
      out.manifest.emplace_back("seed." + s + ".comparators_converged", converged ? "1" : "0");
      out.manifest.emplace_back("seed." + s + ".comparator_max_tolerance", format_real(max_tol));

      for (const auto& run : result.runs) {
        const std::string proto(protocols::to_string(run.protocol));
        std::string text;
        const auto& tr = run.trace;
        for (Round t = 1; t <= config.horizon; ++t) {
          const auto row = static_cast<Eigen::Index>(t - 1);
          write_trace_row(text, {run_id, seeds[i], proto, t, -1, tr.cumulative_loss.row(row).sum(),
                                 tr.comparator_loss.row(row).sum(), tr.regret(row)});
          for (AgentId n = 0; n < config.n_agents; ++n) {
            const auto col = static_cast<Eigen::Index>(n);
            write_trace_row(text, {run_id, seeds[i], proto, t, static_cast<long long>(n), tr.cumulative_loss(row, col),
                                   tr.comparator_loss(row, col),
                                   tr.cumulative_loss(row, col) - tr.comparator_loss(row, col)});
          }
        }
        out.trace_text.push_back(std::move(text));
        out.manifest.emplace_back("result." + proto + "." + s + ".regret", format_real(tr.final_regret()));
        out.manifest.emplace_back("result." + proto + "." + s + ".input_digest", run.input_digest);
      }
      write_constants_rows(out.constants_text, seeds[i], result.constants);
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
      out.trace_text.clear();
      out.constants_text.clear();
      out.manifest.clear();
    }
  });

  // Single-threaded collation in seed order.
  ExperimentSummary summary;
  KeyValueDoc manifest;
  manifest.set("version", kVersion);
  manifest.set("run_id", run_id);
  manifest.set("config_hash", config.hash());
  manifest.set("config_file", "config.txt");
  manifest.set("seeds", join(seeds));
  manifest.set("protocols", join_protocols(config.protocols));
  manifest.set("horizon", std::to_string(config.horizon));
  manifest.set("n_agents", std::to_string(config.n_agents));
  manifest.set("diameter", format_real(2.0 * config.radius));
  manifest.set("c", format_real(config.c));
  manifest.set("topology_edges", std::to_string(topology.edges().size()));
  manifest.set("topology_retries", std::to_string(topology.generator_retries()));

  write_file((fs::path(out_dir) / "config.txt").string(), config.canonical());

  for (std::size_t p = 0; p < config.protocols.size(); ++p) {
    const std::string name = fmt::format("trace_{}.csv", protocols::to_string(config.protocols[p]));
    std::string text(kTraceHeader);
    text += '\n';
    for (const auto& out : outputs) {
      if (out.ok) text += out.trace_text[p];
    }
    write_file((fs::path(out_dir) / name).string(), text);
    manifest.set(fmt::format("file.trace.{}", protocols::to_string(config.protocols[p])), name);
    summary.files.push_back(name);
  }

  std::string constants(kConstantsHeader);
  constants += '\n';
  for (const auto& out : outputs) {
    if (out.ok) constants += out.constants_text;
  }
  write_file((fs::path(out_dir) / "constants.csv").string(), constants);
  manifest.set("file.constants", "constants.csv");
  summary.files.push_back("constants.csv");

  for (const auto& out : outputs) {
    const std::string s = std::to_string(out.seed);
    manifest.set("seed." + s + ".status", out.ok ? "ok" : "error: " + out.error);
    for (const auto& [k, v] : out.manifest) manifest.set(k, v);
    if (!out.ok) summary.failures.emplace_back(out.seed, out.error);
  }

  summary.manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  write_file(summary.manifest_path, manifest.render("damsim run manifest"));
  return summary;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "T" || name == "horizon") return SweepAxis::kHorizon;
  if (name == "rho") return SweepAxis::kRho;
  if (name == "y0") return SweepAxis::kY0;
  throw ValidationError(fmt::format("unknown sweep axis '{}' (expected T, rho or y0)", name));
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kHorizon: return "T";
    case SweepAxis::kRho: return "rho";
    case SweepAxis::kY0: return "y0";
  }
  return "?";
}

RunConfig with_axis_value(const RunConfig& base, SweepAxis axis, double value) {
  RunConfig cfg = base;
  switch (axis) {
    case SweepAxis::kHorizon:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw ValidationError(fmt::format("T sweep value {} is not a positive integer", value));
      }
      cfg.horizon = static_cast<Round>(value);
      break;
    case SweepAxis::kRho:
      cfg.rho = value;
      break;
    case SweepAxis::kY0:
      cfg.y0 = value;
      break;
  }
  cfg.validate();
  return cfg;
}

std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                            std::size_t jobs) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (double v : values) configs.push_back(with_axis_value(base, axis, v));

  const auto topology = make_topology(base);
  const auto seeds = base.seed_list();
  const std::size_t n_tasks = configs.size() * seeds.size();
  std::vector<std::vector<SweepRow>> per_task(n_tasks);
  std::vector<std::string> errors(n_tasks);

  parallel_for(n_tasks, jobs, [&](std::size_t i) {
    const std::size_t vi = i / seeds.size();
    const std::size_t si = i % seeds.size();
    try {
      const auto data = prepare_seed(configs[vi], topology, seeds[si]);
      const auto result = run_seed(configs[vi], data);
      for (const auto& run : result.runs) {
        per_task[i].push_back({values[vi], run.protocol, seeds[si], configs[vi].horizon, run.trace.final_regret()});
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < n_tasks; ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error(fmt::format("sweep point {}={} seed {} failed: {}", to_string(axis),
                                           values[i / seeds.size()], seeds[i % seeds.size()], errors[i]));
    }
  }

  // (value, protocol, seed) order.
  std::vector<SweepRow> rows;
  for (std::size_t vi = 0; vi < configs.size(); ++vi) {
    for (Protocol p : base.protocols) {
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        for (const auto& r : per_task[vi * seeds.size() + si]) {
          if (r.protocol == p) rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

ExperimentSummary run_sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                            const std::string& out_dir, std::size_t jobs) {
  const auto rows = sweep(base, axis, values, jobs);
  fs::create_directories(out_dir);
  const std::string run_id = base.run_id();
  const std::string axis_name(to_string(axis));

  std::string text = "run_id,axis,value,protocol,seed,horizon,regret\n";
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(text), "{},{},{:.17g},{},{},{},{:.17g}\n", run_id, axis_name, r.value,
                   protocols::to_string(r.protocol), r.seed, r.horizon, r.regret);
  }
  const std::string csv_name = fmt::format("sweep_{}.csv", axis_name);
  const std::string config_name = fmt::format("sweep_{}_config.txt", axis_name);
  write_file((fs::path(out_dir) / csv_name).string(), text);
  write_file((fs::path(out_dir) / config_name).string(), base.canonical());

  KeyValueDoc manifest;
  manifest.set("version", kVersion);
  manifest.set("run_id", run_id);
  manifest.set("config_hash", base.hash());
  manifest.set("config_file", config_name);
  manifest.set("axis", axis_name);
  manifest.set("values", join(std::vector<double>(values.begin(), values.end())));
  manifest.set("seeds", join(base.seed_list()));
  manifest.set("protocols", join_protocols(base.protocols));
  manifest.set("file.sweep", csv_name);

  ExperimentSummary summary;
  summary.files.push_back(csv_name);
  summary.manifest_path = (fs::path(out_dir) / fmt::format("sweep_{}_manifest.txt", axis_name)).string();
  write_file(summary.manifest_path, manifest.render("damsim sweep manifest"));
  return summary;
}

std::vector<BoundRow> report_bounds(const std::string& manifest_path) {
  auto manifest = KeyValueDoc::load(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();

  const Round horizon = std::stoull(manifest.get("horizon"));
  const double diameter = std::stod(manifest.get("diameter"));
  const double c = std::stod(manifest.get("c"));

  std::vector<Protocol> protocol_list;
  {
    std::string list = manifest.get("protocols");
    std::size_t start = 0;
    while (start <= list.size()) {
      const auto comma = list.find(',', start);
      const auto item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) protocol_list.push_back(protocols::parse_protocol(item));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }

  const auto table = read_csv_file((dir / manifest.get("file.constants")).string());
  const auto col = [&](std::string_view name) { return table.column(name); };
  const std::size_t c_seed = col("seed");

  std::vector<BoundRow> rows;
  std::string seeds = manifest.get("seeds");
  std::vector<std::uint64_t> seed_list;
  for (std::size_t start = 0; start < seeds.size();) {
    const auto comma = seeds.find(',', start);
    seed_list.push_back(std::stoull(seeds.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }

  for (std::uint64_t seed : seed_list) {
    const std::string s = std::to_string(seed);
    if (manifest.get("seed." + s + ".status") != "ok") continue;

    regret::BoundConstants constants;
    constants.diameter = diameter;
    constants.c = c;
    constants.alpha = std::stod(manifest.get("seed." + s + ".alpha"));
    constants.uniform_weights = manifest.get("seed." + s + ".uniform_weights") == "1";
    for (const auto& r : table.rows) {
      if (r[c_seed] != s) continue;
      regret::AgentConstants a;
      a.lipschitz = std::stod(r[col("lipschitz")]);
      a.weighted_l = std::stod(r[col("weighted_l")]);
      a.k = std::stod(r[col("k")]);
      a.sum_l = std::stod(r[col("sum_l")]);
      a.support = std::stoull(r[col("support")]);
      a.tau_min = std::stoi(r[col("tau_min")]);
      a.tau_max = std::stoi(r[col("tau_max")]);
      a.delta_tau = std::stoi(r[col("delta_tau")]);
      a.sum_tau = std::stoll(r[col("sum_tau")]);
      a.q = std::stod(r[col("q")]);
      a.p = std::stod(r[col("p")]);
      a.c_term = std::stod(r[col("c_term")]);
      constants.l_max = std::max(constants.l_max, a.lipschitz);
      constants.agents.push_back(a);
    }
    if (constants.agents.empty()) {
      throw ValidationError(fmt::format("constants.csv has no rows for seed {}", seed));
    }

    for (Protocol p : protocol_list) {
      BoundRow row;
      row.protocol = p;
      row.seed = seed;
      row.measured = std::stod(manifest.get(fmt::format("result.{}.{}.regret", protocols::to_string(p), s)));
      row.bound = protocol_bound(p, constants, horizon);
      row.dominated = row.bound && row.measured <= *row.bound;
      rows.push_back(row);
    }
  }

  std::string text = "protocol,seed,measured_regret,bound,applicable,dominated\n";
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(text), "{},{},{:.17g},{},{},{}\n", protocols::to_string(r.protocol), r.seed,
                   r.measured, r.bound ? format_real(*r.bound) : std::string("n/a"), r.bound ? 1 : 0,
                   r.bound ? (r.dominated ? "1" : "0") : "");
  }
  write_file((dir / "bounds.csv").string(), text);
  manifest.set("file.bounds", "bounds.csv");
  write_file(manifest_path, manifest.render("damsim run manifest"));
  return rows;
}

}  // namespace damsim::harness
