// damsim: run experiments, sweeps and bound reports from a config file.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "damsim/harness/config.hpp"
#include "damsim/harness/experiment.hpp"
#include "damsim/oracles/checks.hpp"
#include "damsim/version.hpp"

namespace {

using namespace damsim;

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream parts(text);
  std::string item;
  while (std::getline(parts, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      values.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("--values: '{}' is not a number", item));
    }
  }
  if (values.empty()) throw ValidationError("--values must list at least one value");
  return values;
}

int report(const harness::ExperimentSummary& summary) {
  std::cout << "manifest: " << summary.manifest_path << '\n';
  for (const auto& f : summary.files) std::cout << "  " << f << '\n';
  for (const auto& [seed, message] : summary.failures) {
    std::cerr << "seed " << seed << " failed: " << message << '\n';
  }
  return summary.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed online associative-memory simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::size_t jobs = 0;

  auto* run = app.add_subcommand("run", "Run every configured protocol over all seeds");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  std::string axis;
  std::string values_text;
  auto* sweep = app.add_subcommand("sweep", "Final regret over a parameter sweep");
  sweep->add_option("--config", config_path, "Base config file")->required();
  sweep->add_option("--axis", axis, "T, rho or y0")->required();
  sweep->add_option("--values", values_text, "Comma-separated axis values")->required();
  sweep->add_option("--out", out_dir, "Output directory")->capture_default_str();
  sweep->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  std::string manifest_path;
  auto* bounds = app.add_subcommand("bounds", "Write bounds.csv for a completed run");
  bounds->add_option("--manifest", manifest_path, "manifest.txt of a run")->required();

  std::uint64_t selftest_seed = 2024;
  auto* selftest = app.add_subcommand("selftest", "Run the oracle checks");
  selftest->add_option("--seed", selftest_seed, "Seed for the random instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      const auto config = harness::load_config(config_path);
      return report(harness::run_experiment(config, out_dir, jobs));
    }
    if (*sweep) {
      const auto config = harness::load_config(config_path);
      const auto values = parse_values(values_text);
      return report(harness::run_sweep(config, harness::parse_sweep_axis(axis), values, out_dir, jobs));
    }
    if (*bounds) {
      const auto rows = harness::report_bounds(manifest_path);
      for (const auto& r : rows) {
        std::cout << fmt::format("{} seed {}: regret {:.6g}, bound {}{}\n", protocols::to_string(r.protocol), r.seed,
                                 r.measured, r.bound ? fmt::format("{:.6g}", *r.bound) : "n/a",
                                 r.bound ? (r.dominated ? " (holds)" : " (VIOLATED)") : "");
      }
      return 0;
    }
    if (*selftest) {
      return oracles::run_selftest(std::cout, selftest_seed) ? 0 : 2;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
