#include "damsim/harness/digest.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace damsim::harness {

struct Digest::Impl {
  EVP_MD_CTX* ctx = nullptr;

  Impl() : ctx(EVP_MD_CTX_new()) {
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  ~Impl() { EVP_MD_CTX_free(ctx); }
  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
};

Digest::Digest() : impl_(std::make_unique<Impl>()) {}
Digest::~Digest() = default;
Digest::Digest(Digest&&) noexcept = default;
Digest& Digest::operator=(Digest&&) noexcept = default;

void Digest::update(std::span<const unsigned char> bytes) {
  EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
}

void Digest::update(std::string_view text) {
  update(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

void Digest::update(std::uint64_t value) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  update(std::span<const unsigned char>(buf, 8));
}

void Digest::update(double value) { update(std::bit_cast<std::uint64_t>(value)); }

void Digest::update(const Eigen::MatrixXd& m) {
  update(static_cast<std::uint64_t>(m.rows()));
  update(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) update(m(r, c));
  }
}

void Digest::update(const Eigen::VectorXd& v) {
  update(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) update(v(i));
}

std::string Digest::hex() {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, out, &len);
  std::string text;
  text.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) text += fmt::format("{:02x}", out[i]);
  return text;
}

std::string sha256_hex(std::string_view text) {
  Digest d;
  d.update(text);
  return d.hex();
}

}  // namespace damsim::harness
