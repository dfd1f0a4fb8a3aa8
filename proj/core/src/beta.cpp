#include "betadet/beta.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "betadet/errors.hpp"
#include "betadet/special.hpp"

namespace betadet {

BetaParams::BetaParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < kShapeFloor || beta < kShapeFloor) {
    throw DomainError("BetaParams: shapes must be finite and >= 0.5, got (" +
                      std::to_string(alpha) + ", " + std::to_string(beta) + ")");
  }
}

double clamp_target(double y) {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw DomainError("maturity target must lie in [0, 1], got " + std::to_string(y));
  }
  return std::clamp(y, kTargetEpsilon, 1.0 - kTargetEpsilon);
}

double log_beta_fn(const BetaParams& p) {
  return special::lgamma(p.alpha()) + special::lgamma(p.beta()) -
         special::lgamma(p.alpha() + p.beta());
}

namespace {

double unclamped_log_pdf(const BetaParams& p, double y, double log_b) {
  return (p.alpha() - 1.0) * std::log(y) + (p.beta() - 1.0) * std::log1p(-y) - log_b;
}

}  // namespace

double log_pdf(const BetaParams& p, double y) {
  return unclamped_log_pdf(p, clamp_target(y), log_beta_fn(p));
}

double mean(const BetaParams& p) noexcept { return p.alpha() / (p.alpha() + p.beta()); }

double variance(const BetaParams& p) noexcept {
  const double s = p.alpha() + p.beta();
  return p.alpha() * p.beta() / (s * s * (s + 1.0));
}

double cdf(const BetaParams& p, double y) {
  if (std::isnan(y)) throw DomainError("cdf: y is NaN");
  return special::incomplete_beta(p.alpha(), p.beta(), y);
}

double quantile(const BetaParams& p, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw DomainError("quantile: level must lie in (0, 1), got " + std::to_string(q));
  }
  const double log_b = log_beta_fn(p);
  double lo = 0.0;
  double hi = 1.0;
  double y = mean(p);
  for (int iter = 0; iter < 4000; ++iter) {
    const double f = cdf(p, y) - q;
    if (f == 0.0) return y;
    if (f < 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    const double density = std::exp(unclamped_log_pdf(p, y, log_b));
    double next = y - f / density;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::fabs(next - y) <= 4e-16 * std::fabs(y) || next == lo || next == hi) {
      y = next;
      break;
    }
    y = next;
  }
  // Newton stops within a few ulps; walk to the neighbouring double with the
  // smallest residual, which matters where the density is steep.
  double best = std::fabs(cdf(p, y) - q);
  for (const double dir : {0.0, 1.0}) {
    for (int k = 0; k < 16; ++k) {
      const double cand = std::nextafter(y, dir);
      if (cand <= 0.0 || cand >= 1.0) break;
      const double r = std::fabs(cdf(p, cand) - q);
      if (!(r < best)) break;
      best = r;
      y = cand;
    }
  }
  return y;
}

double sample(const BetaParams& p, Rng& rng) { return quantile(p, rng.uniform()); }

NllGradient nll_grad(const BetaParams& p, double y) {
  const double t = clamp_target(y);
  const double psi_sum = special::digamma(p.alpha() + p.beta());
  return {-std::log(t) + special::digamma(p.alpha()) - psi_sum,
          -std::log1p(-t) + special::digamma(p.beta()) - psi_sum};
}

}  // namespace betadet
