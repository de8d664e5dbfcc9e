#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "damsim/types.hpp"

namespace damsim::harness {

/// Incremental SHA-256 over raw bytes. Doubles are hashed by their IEEE bit
/// pattern, so two digests agree only for bitwise-identical data.
class Digest {
 public:
  Digest();
  ~Digest();
  Digest(Digest&&) noexcept;
  Digest& operator=(Digest&&) noexcept;

  void update(std::span<const unsigned char> bytes);
  void update(std::string_view text);
  void update(double value);
  void update(std::uint64_t value);
  void update(const Eigen::MatrixXd& m);
  void update(const Eigen::VectorXd& v);

  /// Finalizes; the object must not be updated afterwards.
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view text);

}  // namespace damsim::harness
