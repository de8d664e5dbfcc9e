#include "damsim/losses.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace damsim::losses {
namespace {

void check_shapes(const LossKind& kind, const Matrix& x, const DataPoint& d) {
  if (d.key.size() != x.cols()) {
    throw ValidationError(
        fmt::format("key length {} does not match memory columns d_k = {}", d.key.size(), x.cols()));
  }
  if (d.value.size() != x.rows()) {
    throw ValidationError(
        fmt::format("value length {} does not match memory rows d_v = {}", d.value.size(), x.rows()));
  }
  if (kind.gated() && d.gate.size() != x.rows()) {
    throw ValidationError(
        fmt::format("gate length {} does not match memory rows d_v = {}", d.gate.size(), x.rows()));
  }
}

// Per-row weight of the ridge term: 1 - psi_i for gated variants, 1 for the
// normalized softmax, none otherwise.
bool has_regularizer(LossVariant v) {
  return v == LossVariant::kGatedLinearAttention || v == LossVariant::kSoftmaxWithNorm ||
         v == LossVariant::kGatedSoftmax;
}

}  // namespace

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kLinearAttention: return "linear-attention";
    case LossVariant::kGatedLinearAttention: return "gated-linear-attention";
    case LossVariant::kDeltaNet: return "deltanet";
    case LossVariant::kSoftmaxNoNorm: return "softmax-no-norm";
    case LossVariant::kSoftmaxWithNorm: return "softmax-with-norm";
    case LossVariant::kGatedSoftmax: return "gated-softmax";
  }
  return "?";
}

std::string_view to_string(FeatureMap f) {
  switch (f) {
    case FeatureMap::kIdentity: return "identity";
    case FeatureMap::kElementwiseExp: return "elementwise-exp";
    case FeatureMap::kNormalizedExp: return "normalized-exp";
  }
  return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (auto v : {LossVariant::kLinearAttention, LossVariant::kGatedLinearAttention, LossVariant::kDeltaNet,
                 LossVariant::kSoftmaxNoNorm, LossVariant::kSoftmaxWithNorm, LossVariant::kGatedSoftmax}) {
    if (to_string(v) == name) return v;
  }
  throw ValidationError(fmt::format("unknown loss '{}'", name));
}

FeatureMap parse_feature_map(std::string_view name) {
  for (auto f : {FeatureMap::kIdentity, FeatureMap::kElementwiseExp, FeatureMap::kNormalizedExp}) {
    if (to_string(f) == name) return f;
  }
  throw ValidationError(fmt::format("unknown feature map '{}'", name));
}

bool is_softmax_family(LossVariant v) {
  return v == LossVariant::kSoftmaxNoNorm || v == LossVariant::kSoftmaxWithNorm ||
         v == LossVariant::kGatedSoftmax;
}

bool is_gated(LossVariant v) {
  return v == LossVariant::kGatedLinearAttention || v == LossVariant::kGatedSoftmax;
}

LossKind LossKind::with_default_map(LossVariant v) {
  return {v, is_softmax_family(v) ? FeatureMap::kNormalizedExp : FeatureMap::kIdentity};
}

void LossKind::validate() const {
  if (!is_softmax_family(variant) && feature_map != FeatureMap::kIdentity) {
    throw ValidationError(fmt::format("feature map '{}' applies only to softmax-family losses, not '{}'",
                                      to_string(feature_map), to_string(variant)));
  }
}

DomainBall::DomainBall(double radius) : radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ValidationError(fmt::format("domain radius must be positive and finite, got {}", radius));
  }
}

Vector feature_map(FeatureMap kind, const Vector& key) {
  switch (kind) {
    case FeatureMap::kIdentity:
      return key;
    case FeatureMap::kElementwiseExp:
      return key.array().exp().matrix();
    case FeatureMap::kNormalizedExp: {
      if (key.size() == 0) return key;
      const Vector shifted = (key.array() - key.maxCoeff()).exp().matrix();
      return shifted / shifted.sum();
    }
  }
  return key;
}

Vector effective_key(const LossKind& kind, const Vector& key) {
  return is_softmax_family(kind.variant) ? feature_map(kind.feature_map, key) : key;
}

double loss_value(const LossKind& kind, const Matrix& x, const DataPoint& d) {
  check_shapes(kind, x, d);
  const Vector k = effective_key(kind, d.key);
  const Vector readout = x * k;

  switch (kind.variant) {
    case LossVariant::kDeltaNet:
      return 0.5 * (readout - d.value).squaredNorm();
    case LossVariant::kLinearAttention:
    case LossVariant::kSoftmaxNoNorm:
      return -readout.dot(d.value);
    case LossVariant::kSoftmaxWithNorm:
      return -readout.dot(d.value) + 0.5 * x.squaredNorm();
    case LossVariant::kGatedLinearAttention:
    case LossVariant::kGatedSoftmax: {
      const Vector forget = (1.0 - d.gate.array()).matrix();
      return -readout.dot(d.value) + 0.5 * forget.dot(x.rowwise().squaredNorm());
    }
  }
  return 0.0;
}

Matrix loss_gradient(const LossKind& kind, const Matrix& x, const DataPoint& d) {
  check_shapes(kind, x, d);
  const Vector k = effective_key(kind, d.key);

  if (kind.variant == LossVariant::kDeltaNet) {
    return (x * k - d.value) * k.transpose();
  }
  Matrix grad = -d.value * k.transpose();
  if (kind.variant == LossVariant::kSoftmaxWithNorm) {
    grad += x;
  } else if (kind.gated()) {
    grad += (1.0 - d.gate.array()).matrix().asDiagonal() * x;
  }
  return grad;
}

double grad_norm_bound(const LossKind& kind, const DomainBall& domain, double key_bound,
                       double value_bound) {
  if (!(key_bound > 0.0) || !(value_bound > 0.0)) {
    throw ValidationError(
        fmt::format("key and value bounds must be positive (got {}, {})", key_bound, value_bound));
  }
  const double r = domain.radius();
  if (kind.variant == LossVariant::kDeltaNet) return (r * key_bound + value_bound) * key_bound;
  // ||v phi(k)^T||_F = ||v|| ||phi(k)||; ||diag(1 - psi) X||_F <= ||X||_F <= R.
  return value_bound * key_bound + (has_regularizer(kind.variant) ? r : 0.0);
}

Matrix project(const DomainBall& domain, const Matrix& x) {
  if (!x.allFinite()) throw ValidationError("cannot project a matrix with non-finite entries");
  const double norm = x.norm();
  const double r = domain.radius();
  if (norm <= r) return x;

  Matrix out = x * (r / norm);
  // Rounding can leave the scaled norm an ulp above R; shrink until inside.
  double shrink = 1.0;
  while (out.norm() > r) {
    shrink = std::nextafter(shrink, 0.0);
    out = x * ((r / norm) * shrink);
  }
  return out;
}

}  // namespace damsim::losses
