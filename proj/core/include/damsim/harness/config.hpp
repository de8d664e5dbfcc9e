#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "damsim/datagen.hpp"
#include "damsim/losses.hpp"
#include "damsim/protocols.hpp"

namespace damsim::harness {

/// One experiment: data model, learners, horizon and seeds.
///
/// The on-disk form is a flat `key = value` text file; `#` starts a comment.
/// Only `horizon` is required. See README.md for the key table.
struct RunConfig {
  std::vector<protocols::Protocol> protocols{protocols::Protocol::kOgd, protocols::Protocol::kCdogd,
                                             protocols::Protocol::kDamtogd};
  std::size_t n_agents = 20;
  Round horizon = 0;
  std::size_t key_dim = 8;
  std::size_t value_dim = 8;
  losses::LossKind loss = losses::LossKind::with_default_map(losses::LossVariant::kDeltaNet);
  double radius = 10.0;
  double rho = 0.75;
  double y0 = 2.0;
  double y1 = 10.0;
  double noise_std = 1.0;
  double gate_keep_prob = 0.9;
  datagen::PersonalPrior prior;
  /// "ring", "erdos-renyi(p)", "random-geometric(r)" or "file:<edge list>".
  std::string topology = "erdos-renyi(0.2)";
  std::uint64_t topology_seed = 7;
  double c = 1.0;
  std::uint64_t seed = 1;
  std::size_t seeds = 5;

  /// Directory used to resolve a relative "file:" topology.
  std::string base_dir = ".";

  std::vector<std::uint64_t> seed_list() const;

  /// Throws ValidationError naming the key and the violated constraint.
  void validate() const;

  /// Sorted `key = value` lines covering every key (defaults included).
  std::string canonical() const;
  /// SHA-256 of canonical(), hex.
  std::string hash() const;
  /// First 12 hex digits of hash().
  std::string run_id() const;
};

/// Sets one key from its text form. Unknown keys are rejected.
void set_config_key(RunConfig& config, std::string_view key, std::string_view value);

RunConfig parse_config(std::istream& in, std::string_view source = "<config>");
RunConfig load_config(const std::string& path);

/// All keys accepted by set_config_key.
const std::vector<std::string>& config_keys();

}  // namespace damsim::harness
