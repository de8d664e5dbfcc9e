#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "damsim/harness/config.hpp"
#include "damsim/harness/csv.hpp"
#include "damsim/harness/digest.hpp"
#include "damsim/harness/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace damsim;
using namespace damsim::harness;
using protocols::Protocol;

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() /
            (std::string("damsim-test-") + info->test_suite_name() + "-" + info->name() + "-" +
             std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path root_;
};

RunConfig small_config() {
  RunConfig cfg;
  cfg.n_agents = 3;
  cfg.horizon = 10;
  cfg.seeds = 1;
  cfg.seed = 1;
  cfg.key_dim = 3;
  cfg.value_dim = 2;
  cfg.topology = "ring";
  return cfg;
}

TEST(Config, Defaults) {
  const auto cfg = parse("horizon = 100\n");
  EXPECT_EQ(cfg.horizon, 100u);
  EXPECT_EQ(cfg.key_dim, 8u);
  EXPECT_EQ(cfg.value_dim, 8u);
  EXPECT_DOUBLE_EQ(cfg.radius, 10.0);
  EXPECT_DOUBLE_EQ(cfg.c, 1.0);
  EXPECT_EQ(cfg.protocols.size(), 3u);
  EXPECT_EQ(cfg.seed_list(), (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
}

TEST(Config, NetworkSettingAccepted) {
  const auto cfg = parse(
      "# network setting\n"
      "n_agents = 20\nhorizon = 2500\nloss = deltanet\nrho = 0.75\ny0 = 2\ny1 = 10\n"
      "protocols = ogd, cdogd, damtogd\nseeds = 5\n");
  EXPECT_EQ(cfg.n_agents, 20u);
  EXPECT_EQ(cfg.loss.variant, losses::LossVariant::kDeltaNet);
  EXPECT_DOUBLE_EQ(cfg.y0, 2.0);
}

TEST(Config, Rejections) {
  EXPECT_NE(error_of("horizon = 10\ny0 = 10\ny1 = 5\n").find("y1 must be >= y0"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nbogus = 1\n").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nrho = 0.5\nrho = 0.6\n").find("already set on line 2"), std::string::npos);
  EXPECT_NE(error_of("rho = 0.5\n").find("missing required key 'horizon'"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nrho = 1.5\n").find("rho"), std::string::npos);
  EXPECT_NE(error_of("horizon = ten\n").find("horizon"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nradius\n").find("test:2"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nprotocols = ogd, ogd\n").find("duplicates"), std::string::npos);
  EXPECT_NE(error_of("horizon = 10\nloss = deltanet\nfeature_map = elementwise-exp\n"), "");
  EXPECT_NE(error_of("horizon = 10\ntopology = star\n"), "");
}

TEST(Config, EveryKeyRoundTripsThroughCanonical) {
  const auto cfg = parse("horizon = 40\nrho = 0.3\ntopology = random-geometric(0.4)\nseed = 9\n");
  const auto again = parse(cfg.canonical());
  EXPECT_EQ(cfg.canonical(), again.canonical());
  EXPECT_EQ(cfg.hash(), again.hash());
  EXPECT_EQ(cfg.run_id(), cfg.hash().substr(0, 12));
  for (const auto& key : config_keys()) EXPECT_NE(cfg.canonical().find(key + " = "), std::string::npos) << key;
  auto other = cfg;
  other.rho = 0.31;
  EXPECT_NE(other.hash(), cfg.hash());
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Csv, RealsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) EXPECT_EQ(std::stod(format_real(v)), v);
}

TEST_F(TempDir, SmallestRunLayout) {
  const auto summary = run_experiment(small_config(), root_.string(), 1);
  EXPECT_TRUE(summary.failures.empty());
  for (const char* proto : {"ogd", "cdogd", "damtogd"}) {
    const auto table = read_csv_file((root_ / fmt::format("trace_{}.csv", proto)).string());
    std::ostringstream header;
    for (std::size_t i = 0; i < table.header.size(); ++i) header << (i ? "," : "") << table.header[i];
    EXPECT_EQ(header.str(), kTraceHeader);
    std::size_t aggregate = 0;
    std::size_t agent = 0;
    for (const auto& row : table.rows) {
      EXPECT_EQ(row[table.column("protocol")], proto);
      (row[table.column("agent")] == "-1" ? aggregate : agent) += 1;
    }
    EXPECT_EQ(aggregate, 10u);
    EXPECT_EQ(agent, 30u);
  }
  const auto manifest = KeyValueDoc::load(summary.manifest_path);
  for (const char* key : {"version", "run_id", "config_hash", "config_file", "seeds", "protocols", "horizon",
                          "n_agents", "diameter", "c", "topology_edges", "file.constants", "file.trace.ogd",
                          "seed.1.status", "seed.1.stream_digest", "seed.1.alpha", "result.damtogd.1.regret"}) {
    EXPECT_TRUE(manifest.contains(key)) << key;
  }
  EXPECT_EQ(manifest.get("seed.1.status"), "ok");
  // Every protocol of a seed sees the same inputs.
  EXPECT_EQ(manifest.get("result.ogd.1.input_digest"), manifest.get("result.cdogd.1.input_digest"));
  EXPECT_EQ(manifest.get("result.ogd.1.input_digest"), manifest.get("result.damtogd.1.input_digest"));
  EXPECT_EQ(manifest.get("result.ogd.1.input_digest"), manifest.get("seed.1.stream_digest"));
  EXPECT_EQ(parse(slurp(root_ / "config.txt")).hash(), manifest.get("config_hash"));
}

TEST_F(TempDir, RerunsAreByteIdentical) {
  auto cfg = small_config();
  cfg.seeds = 3;
  cfg.n_agents = 5;
  cfg.topology = "erdos-renyi(0.6)";
  run_experiment(cfg, (root_ / "a").string(), 1);
  run_experiment(cfg, (root_ / "b").string(), 2);
  for (const auto& entry : fs::directory_iterator(root_ / "a")) {
    const auto name = entry.path().filename();
    EXPECT_EQ(slurp(entry.path()), slurp(root_ / "b" / name)) << name;
  }
}

TEST_F(TempDir, SeedDataIsShared) {
  auto cfg = small_config();
  const auto topo = make_topology(cfg);
  const auto a = prepare_seed(cfg, topo, 4);
  const auto b = prepare_seed(cfg, topo, 4);
  EXPECT_EQ(problem_digest(a.problem()), problem_digest(b.problem()));
  const auto c = prepare_seed(cfg, topo, 5);
  EXPECT_NE(problem_digest(a.problem()), problem_digest(c.problem()));
}

TEST(Sweep, Cardinality) {
  auto cfg = small_config();
  cfg.seeds = 2;
  const std::vector<double> values = {0.1, 0.3, 0.5, 0.7, 0.9};
  const auto rows = sweep(cfg, SweepAxis::kRho, values, 1);
  ASSERT_EQ(rows.size(), 5u * 3u * 2u);
  std::set<std::tuple<double, Protocol, std::uint64_t>> seen;
  for (const auto& r : rows) seen.insert({r.value, r.protocol, r.seed});
  EXPECT_EQ(seen.size(), rows.size());
  EXPECT_DOUBLE_EQ(rows.front().value, 0.1);
  EXPECT_DOUBLE_EQ(rows.back().value, 0.9);
}

TEST(Sweep, AxisValues) {
  const auto cfg = small_config();
  EXPECT_EQ(with_axis_value(cfg, SweepAxis::kHorizon, 25).horizon, 25u);
  EXPECT_DOUBLE_EQ(with_axis_value(cfg, SweepAxis::kRho, 0.2).rho, 0.2);
  EXPECT_DOUBLE_EQ(with_axis_value(cfg, SweepAxis::kY0, 6).y0, 6.0);
  EXPECT_THROW(with_axis_value(cfg, SweepAxis::kY0, 20), ValidationError);
  EXPECT_EQ(parse_sweep_axis("T"), SweepAxis::kHorizon);
  EXPECT_EQ(parse_sweep_axis("y0"), SweepAxis::kY0);
  EXPECT_THROW(parse_sweep_axis("c"), ValidationError);
}

TEST_F(TempDir, SweepArtifacts) {
  auto cfg = small_config();
  const std::vector<double> values = {5, 10};
  run_sweep(cfg, SweepAxis::kHorizon, values, root_.string(), 1);
  const auto table = read_csv_file((root_ / "sweep_T.csv").string());
  EXPECT_EQ(table.rows.size(), 6u);
  EXPECT_TRUE(fs::exists(root_ / "sweep_T_manifest.txt"));
}

TEST_F(TempDir, BoundsReport) {
  auto cfg = small_config();
  cfg.seeds = 2;
  cfg.horizon = 50;
  const auto summary = run_experiment(cfg, root_.string(), 1);
  const auto rows = report_bounds(summary.manifest_path);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    if (r.protocol == Protocol::kCdogd) {
      EXPECT_FALSE(r.bound.has_value());
    } else {
      ASSERT_TRUE(r.bound.has_value());
      EXPECT_TRUE(r.dominated);
    }
  }
  const auto text = slurp(root_ / "bounds.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "protocol,seed,measured_regret,bound,applicable,dominated");
  EXPECT_NE(text.find("cdogd,1,"), std::string::npos);
  EXPECT_NE(text.find(",n/a,0,"), std::string::npos);
  EXPECT_EQ(KeyValueDoc::load(summary.manifest_path).get("file.bounds"), "bounds.csv");
}

TEST_F(TempDir, NoDelaySpreadWithoutCrossWeights) {
  auto cfg = small_config();
  cfg.y0 = 0.0;
  cfg.horizon = 20;
  run_experiment(cfg, root_.string(), 1);
  const auto table = read_csv_file((root_ / "constants.csv").string());
  ASSERT_EQ(table.rows.size(), 3u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row[table.column("delta_tau")], "0");
    EXPECT_EQ(std::stod(row[table.column("c_term")]), 0.0);
  }
}

TEST_F(TempDir, BoundsNeedConstants) {
  const auto summary = run_experiment(small_config(), root_.string(), 1);
  fs::remove(root_ / "constants.csv");
  EXPECT_THROW(report_bounds(summary.manifest_path), ValidationError);
  EXPECT_THROW(report_bounds((root_ / "missing.txt").string()), ValidationError);
}

TEST_F(TempDir, EdgeListTopology) {
  std::ofstream(root_ / "graph.txt") << "# square with a chord\n0 1\n1 2\n2 3\n3 0\n0 2\n";
  auto cfg = small_config();
  cfg.n_agents = 4;
  cfg.topology = "file:graph.txt";
  cfg.base_dir = root_.string();
  const auto topo = make_topology(cfg);
  EXPECT_EQ(topo.edges().size(), 5u);
  const auto summary = run_experiment(cfg, (root_ / "out").string(), 1);
  EXPECT_TRUE(summary.failures.empty());
  EXPECT_EQ(KeyValueDoc::load(summary.manifest_path).get("topology_edges"), "5");

  cfg.n_agents = 6;
  EXPECT_THROW(make_topology(cfg), ValidationError);
}

}  // namespace
