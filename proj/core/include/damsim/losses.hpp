#pragma once

// Memory-retrieval objectives for a linear associative memory X (d_v x d_k):
// losses, analytic gradients, key feature maps, gradient-norm bounds and the
// projection onto the feasible Frobenius ball.

#include <string>
#include <string_view>

#include "damsim/types.hpp"

namespace damsim::losses {

enum class LossVariant {
  kLinearAttention,       // -<X k, v>
  kGatedLinearAttention,  // -<X k, v> + 1/2 ||diag(sqrt(1 - psi)) X||_F^2
  kDeltaNet,              // 1/2 ||X k - v||^2
  kSoftmaxNoNorm,         // -<X phi(k), v>
  kSoftmaxWithNorm,       // -<X phi(k), v> + 1/2 ||X||_F^2
  kGatedSoftmax,          // -<X phi(k), v> + 1/2 ||diag(sqrt(1 - psi)) X||_F^2
};

enum class FeatureMap { kIdentity, kElementwiseExp, kNormalizedExp };

std::string_view to_string(LossVariant v);
std::string_view to_string(FeatureMap f);
LossVariant parse_loss_variant(std::string_view name);
FeatureMap parse_feature_map(std::string_view name);

bool is_softmax_family(LossVariant v);
bool is_gated(LossVariant v);

struct LossKind {
  LossVariant variant = LossVariant::kDeltaNet;
  FeatureMap feature_map = FeatureMap::kIdentity;

  /// Default feature map: identity for the linear family, normalized-exp for
  /// the softmax family.
  static LossKind with_default_map(LossVariant v);

  bool gated() const { return is_gated(variant); }
  /// Throws ValidationError if a non-identity map is attached to a
  /// linear-family variant.
  void validate() const;

  friend bool operator==(const LossKind&, const LossKind&) = default;
};

/// One streamed association. `gate` is empty unless the loss is gated.
struct DataPoint {
  Vector key;
  Vector value;
  Vector gate;
};

/// Feasible set: Frobenius ball of radius R centred at zero (diameter 2R).
class DomainBall {
 public:
  explicit DomainBall(double radius);

  double radius() const { return radius_; }
  double diameter() const { return 2.0 * radius_; }
  bool contains(const Matrix& x, double slack = 0.0) const { return x.norm() <= radius_ + slack; }

 private:
  double radius_;
};

Vector feature_map(FeatureMap kind, const Vector& key);

/// The key as seen by the memory readout: phi(k) for the softmax family,
/// k otherwise.
Vector effective_key(const LossKind& kind, const Vector& key);

double loss_value(const LossKind& kind, const Matrix& x, const DataPoint& d);
Matrix loss_gradient(const LossKind& kind, const Matrix& x, const DataPoint& d);

/// Upper bound L on ||grad f(X)||_F over the ball, given key_bound >= ||phi(k)||
/// and value_bound >= ||v|| over the stream.
double grad_norm_bound(const LossKind& kind, const DomainBall& domain, double key_bound,
                       double value_bound);

/// Euclidean projection onto the ball. The result satisfies ||P(X)||_F <= R in
/// floating point, and P(P(X)) == P(X) bitwise.
Matrix project(const DomainBall& domain, const Matrix& x);

}  // namespace damsim::losses
