#include "damsim/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "damsim/graph.hpp"
#include "damsim/harness/digest.hpp"

namespace damsim::harness {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view key, std::string_view text) {
  const std::string s(trim(text));
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(fmt::format("{}: '{}' is not a finite number", key, s));
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
  }
  return v;
}

std::string real(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "c",          "feature_map", "gate_keep_prob",        "horizon",
      "key_dim",    "loss",        "n_agents",              "noise_std",
      "personal_mean_max",         "personal_mean_min",     "personal_variance_max",
      "personal_variance_min",     "protocols",             "radius",
      "rho",        "seed",        "seeds",                 "topology",
      "topology_seed",             "value_dim",             "y0",
      "y1",
  };
  return keys;
}

void set_config_key(RunConfig& config, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "protocols") {
    config.protocols.clear();
    std::string list(value);
    std::istringstream parts(list);
    std::string item;
    while (std::getline(parts, item, ',')) {
      const auto name = trim(item);
      if (name.empty()) continue;
      config.protocols.push_back(protocols::parse_protocol(name));
    }
  } else if (key == "n_agents") {
    config.n_agents = parse_unsigned(key, value);
  } else if (key == "horizon") {
    config.horizon = parse_unsigned(key, value);
  } else if (key == "key_dim") {
    config.key_dim = parse_unsigned(key, value);
  } else if (key == "value_dim") {
    config.value_dim = parse_unsigned(key, value);
  } else if (key == "loss") {
    const bool default_map = config.loss == losses::LossKind::with_default_map(config.loss.variant);
    const auto variant = losses::parse_loss_variant(value);
    config.loss.variant = variant;
    if (default_map) config.loss = losses::LossKind::with_default_map(variant);
  } else if (key == "feature_map") {
    config.loss.feature_map = losses::parse_feature_map(value);
  } else if (key == "radius") {
    config.radius = parse_real(key, value);
  } else if (key == "rho") {
    config.rho = parse_real(key, value);
  } else if (key == "y0") {
    config.y0 = parse_real(key, value);
  } else if (key == "y1") {
    config.y1 = parse_real(key, value);
  } else if (key == "noise_std") {
    config.noise_std = parse_real(key, value);
  } else if (key == "gate_keep_prob") {
    config.gate_keep_prob = parse_real(key, value);
  } else if (key == "personal_mean_min") {
    config.prior.mean_min = parse_real(key, value);
  } else if (key == "personal_mean_max") {
    config.prior.mean_max = parse_real(key, value);
  } else if (key == "personal_variance_min") {
    config.prior.variance_min = parse_real(key, value);
  } else if (key == "personal_variance_max") {
    config.prior.variance_max = parse_real(key, value);
  } else if (key == "topology") {
    config.topology = std::string(value);
  } else if (key == "topology_seed") {
    config.topology_seed = parse_unsigned(key, value);
  } else if (key == "c") {
    config.c = parse_real(key, value);
  } else if (key == "seed") {
    config.seed = parse_unsigned(key, value);
  } else if (key == "seeds") {
    config.seeds = parse_unsigned(key, value);
  } else {
    throw ValidationError(fmt::format("unknown key '{}'", key));
  }
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seeds; ++i) out.push_back(seed + i);
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, std::string_view key, std::string_view constraint) {
    if (!ok) throw ValidationError(fmt::format("{} must be {}", key, constraint));
  };
  require(!protocols.empty(), "protocols", "a non-empty list");
  {
    auto sorted = protocols;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "protocols", "free of duplicates");
  }
  require(n_agents >= 1, "n_agents", ">= 1");
  require(horizon >= 1, "horizon", ">= 1 (required key)");
  require(key_dim >= 1, "key_dim", ">= 1");
  require(value_dim >= 1, "value_dim", ">= 1");
  loss.validate();
  require(radius > 0.0, "radius", "> 0");
  require(rho >= 0.0 && rho <= 1.0, "rho", "in [0, 1]");
  require(y0 >= 0.0, "y0", ">= 0");
  require(y1 >= y0, "y1", ">= y0");
  require(y1 > 0.0, "y1", "> 0");
  require(noise_std >= 0.0, "noise_std", ">= 0");
  require(gate_keep_prob >= 0.0 && gate_keep_prob <= 1.0, "gate_keep_prob", "in [0, 1]");
  require(prior.mean_min <= prior.mean_max, "personal_mean_max", ">= personal_mean_min");
  require(prior.variance_min >= 0.0, "personal_variance_min", ">= 0");
  require(prior.variance_min <= prior.variance_max, "personal_variance_max", ">= personal_variance_min");
  require(c > 0.0, "c", "> 0");
  require(seeds >= 1, "seeds", ">= 1");
  if (topology.rfind("file:", 0) != 0) (void)graph::GeneratorSpec::parse(topology);
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  std::string proto_list;
  for (auto p : protocols) {
    if (!proto_list.empty()) proto_list += ',';
    proto_list += protocols::to_string(p);
  }
  kv["protocols"] = proto_list;
  kv["n_agents"] = std::to_string(n_agents);
  kv["horizon"] = std::to_string(horizon);
  kv["key_dim"] = std::to_string(key_dim);
  kv["value_dim"] = std::to_string(value_dim);
  kv["loss"] = std::string(losses::to_string(loss.variant));
  kv["feature_map"] = std::string(losses::to_string(loss.feature_map));
  kv["radius"] = real(radius);
  kv["rho"] = real(rho);
  kv["y0"] = real(y0);
  kv["y1"] = real(y1);
  kv["noise_std"] = real(noise_std);
  kv["gate_keep_prob"] = real(gate_keep_prob);
  kv["personal_mean_min"] = real(prior.mean_min);
  kv["personal_mean_max"] = real(prior.mean_max);
  kv["personal_variance_min"] = real(prior.variance_min);
  kv["personal_variance_max"] = real(prior.variance_max);
  kv["topology"] = topology;
  kv["topology_seed"] = std::to_string(topology_seed);
  kv["c"] = real(c);
  kv["seed"] = std::to_string(seed);
  kv["seeds"] = std::to_string(seeds);

  std::string out;
  for (const auto& [k, v] : kv) out += fmt::format("{} = {}\n", k, v);
  return out;
}

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

std::string RunConfig::run_id() const { return hash().substr(0, 12); }

RunConfig parse_config(std::istream& in, std::string_view source) {
  RunConfig config;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(fmt::format("{}:{}: expected 'key = value'", source, lineno));
    }
    const std::string key(trim(body.substr(0, eq)));
    const auto value = trim(body.substr(eq + 1));
    if (auto [it, inserted] = seen.emplace(key, lineno); !inserted) {
      throw ValidationError(fmt::format("{}:{}: key '{}' already set on line {}", source, lineno, key, it->second));
    }
    try {
      set_config_key(config, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
  if (!seen.contains("horizon")) throw ValidationError(fmt::format("{}: missing required key 'horizon'", source));
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config '{}'", path));
  RunConfig config = parse_config(in, path);
  const auto parent = std::filesystem::path(path).parent_path();
  config.base_dir = parent.empty() ? "." : parent.string();
  return config;
}

}  // namespace damsim::harness
