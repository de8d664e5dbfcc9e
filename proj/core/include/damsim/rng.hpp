#pragma once

#include <cstdint>
#include <random>

namespace damsim {

/// Purpose tags mixed into sub-seeds so that independent draws never share
/// an engine stream.
enum class SeedPurpose : std::uint64_t {
  kGroundTruth = 0x67744d31,
  kStream = 0x73747231,
  kGates = 0x67617431,
  kWeights = 0x77676831,
  kTopology = 0x746f7031,
  kProbe = 0x70726f62,
};

/// Derives an independent 64-bit seed from (master, purpose, index) with a
/// SplitMix64 finalizer chain. Pure; identical on every platform.
std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose, std::uint64_t index = 0);

/// All stochastic components draw from this engine; its output sequence is
/// fixed by the standard.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, SeedPurpose purpose, std::uint64_t index = 0) {
  return Rng{derive_seed(master, purpose, index)};
}

}  // namespace damsim
