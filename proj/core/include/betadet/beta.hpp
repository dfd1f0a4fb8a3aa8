#pragma once

#include "betadet/rng.hpp"

namespace betadet {

/// Targets are clamped into [kTargetEpsilon, 1 - kTargetEpsilon] before any
/// density or likelihood evaluation.
inline constexpr double kTargetEpsilon = 1e-6;

/// Shape pair of a Beta distribution over maturity. Both shapes are finite and
/// at least kShapeFloor, the floor guaranteed by the softplus head.
class BetaParams {
 public:
  static constexpr double kShapeFloor = 0.5;

  /// Throws DomainError unless both shapes are finite and ≥ kShapeFloor.
  BetaParams(double alpha, double beta);

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double concentration() const noexcept { return alpha_ + beta_; }

  /// (β, α): the distribution of 1 - y.
  BetaParams swapped() const noexcept { return BetaParams(beta_, alpha_, Unchecked{}); }

  friend bool operator==(const BetaParams&, const BetaParams&) = default;

 private:
  struct Unchecked {};
  BetaParams(double a, double b, Unchecked) noexcept : alpha_(a), beta_(b) {}

  double alpha_;
  double beta_;
};

/// Throws DomainError if y is outside [0, 1] or not finite; otherwise clamps
/// into [kTargetEpsilon, 1 - kTargetEpsilon].
double clamp_target(double y);

/// ln B(α, β).
double log_beta_fn(const BetaParams& p);

/// ln p(y | α, β) at the clamped target.
double log_pdf(const BetaParams& p, double y);

double mean(const BetaParams& p) noexcept;
double variance(const BetaParams& p) noexcept;

/// I_y(α, β); 0 below the support and 1 above it.
double cdf(const BetaParams& p, double y);

/// Inverse of cdf for 0 < q < 1 by safeguarded Newton-bisection on [0, 1].
double quantile(const BetaParams& p, double q);

/// Inverse-CDF draw: quantile(p, rng.uniform()).
double sample(const BetaParams& p, Rng& rng);

struct NllGradient {
  double d_alpha;
  double d_beta;
};

/// Partial derivatives of -log_pdf(p, y) with respect to α and β.
NllGradient nll_grad(const BetaParams& p, double y);

}  // namespace betadet
