#pragma once

namespace betadet::special {

/// ln Γ(x) for x > 0 via the Lanczos approximation with g = 7 and the
/// nine-term coefficient set listed in docs/numerics.md. Arguments below 0.5
/// are shifted with ln Γ(x) = ln Γ(x + 1) - ln x.
double lgamma(double x);

/// ψ(x) = d/dx ln Γ(x) for x > 0. Shifts x upward with ψ(x) = ψ(x + 1) - 1/x
/// until x ≥ 6, then evaluates the asymptotic series through x^-12.
double digamma(double x);

/// Regularized incomplete beta I_x(a, b) by the continued fraction with
/// modified Lentz evaluation.
double incomplete_beta(double a, double b, double x);

}  // namespace betadet::special
