#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "betadet/beta.hpp"
#include "betadet/errors.hpp"
#include "betadet/rng.hpp"
#include "betadet/special.hpp"
#include "oracles.hpp"

namespace {

using betadet::BetaParams;
namespace sp = betadet::special;

constexpr double kEuler = 0.57721566490153286061;

TEST(Lgamma, Examples) {
  EXPECT_NEAR(sp::lgamma(1.0), 0.0, 1e-15);
  EXPECT_NEAR(sp::lgamma(2.0), 0.0, 1e-15);
  EXPECT_NEAR(sp::lgamma(4.0), std::log(6.0), 1e-13);
}

TEST(Lgamma, MatchesHighPrecisionOverRange) {
  // Log-spaced grid over [0.5, 1e6]. Near the roots at 1 and 2 the relative
  // error is measured against max(|v|, 1).
  for (int i = 0; i <= 400; ++i) {
    const double x = 0.5 * std::pow(2e6, i / 400.0);
    const double want = oracle::lgamma(x);
    EXPECT_LE(oracle::relative_error(sp::lgamma(x), want, 1.0), 1e-12) << "x = " << x;
  }
}

TEST(Lgamma, RejectsNonPositive) {
  EXPECT_THROW(sp::lgamma(0.0), betadet::DomainError);
  EXPECT_THROW(sp::lgamma(-1.5), betadet::DomainError);
  EXPECT_THROW(sp::lgamma(std::nan("")), betadet::DomainError);
  EXPECT_THROW(sp::lgamma(INFINITY), betadet::DomainError);
}

TEST(Digamma, Examples) {
  EXPECT_NEAR(sp::digamma(1.0), -kEuler, 1e-10);
  EXPECT_NEAR(sp::digamma(2.0), 1.0 - kEuler, 1e-10);
  EXPECT_NEAR(sp::digamma(0.5), -kEuler - 2.0 * std::numbers::ln2, 1e-10);
  EXPECT_NEAR(sp::digamma(1.0), oracle::digamma(1.0), 1e-12);
}

TEST(Digamma, MatchesHighPrecisionOverRange) {
  for (int i = 0; i <= 400; ++i) {
    const double x = 0.5 * std::pow(2e6, i / 400.0);
    EXPECT_NEAR(sp::digamma(x), oracle::digamma(x), 1e-10) << "x = " << x;
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(sp::digamma(0.0), betadet::DomainError);
  EXPECT_THROW(sp::digamma(-2.0), betadet::DomainError);
}

TEST(BetaParams, RejectsBelowFloorAndNonFinite) {
  EXPECT_THROW(BetaParams(0.49, 1.0), betadet::DomainError);
  EXPECT_THROW(BetaParams(1.0, 0.0), betadet::DomainError);
  EXPECT_THROW(BetaParams(std::nan(""), 1.0), betadet::DomainError);
  EXPECT_THROW(BetaParams(1.0, INFINITY), betadet::DomainError);
  EXPECT_NO_THROW(BetaParams(0.5, 0.5));
}

TEST(LogBetaFn, Examples) {
  EXPECT_NEAR(betadet::log_beta_fn({1, 1}), 0.0, 1e-14);
  EXPECT_NEAR(betadet::log_beta_fn({2, 2}), std::log(1.0 / 6.0), 1e-12);
  EXPECT_NEAR(betadet::log_beta_fn({2, 1}), std::log(0.5), 1e-12);
}

TEST(LogPdf, Examples) {
  EXPECT_NEAR(betadet::log_pdf({1, 1}, 0.3), 0.0, 1e-14);
  EXPECT_NEAR(betadet::log_pdf({2, 2}, 0.5), std::log(1.5), 1e-12);
  EXPECT_NEAR(betadet::log_pdf({2, 1}, 0.5), 0.0, 1e-12);
}

TEST(LogPdf, ClampsEndpointsAndRejectsOutside) {
  EXPECT_TRUE(std::isfinite(betadet::log_pdf({0.5, 0.5}, 0.0)));
  EXPECT_TRUE(std::isfinite(betadet::log_pdf({5, 0.5}, 1.0)));
  EXPECT_DOUBLE_EQ(betadet::log_pdf({3, 2}, 0.0), betadet::log_pdf({3, 2}, betadet::kTargetEpsilon));
  EXPECT_THROW(betadet::log_pdf({2, 2}, -0.01), betadet::DomainError);
  EXPECT_THROW(betadet::log_pdf({2, 2}, 1.01), betadet::DomainError);
  EXPECT_THROW(betadet::log_pdf({2, 2}, std::nan("")), betadet::DomainError);
}

TEST(Moments, Examples) {
  EXPECT_DOUBLE_EQ(betadet::mean({2, 2}), 0.5);
  EXPECT_NEAR(betadet::mean({5, 1}), 5.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(betadet::mean({0.5, 0.5}), 0.5);
  EXPECT_NEAR(betadet::variance({2, 2}), 0.05, 1e-15);
  EXPECT_NEAR(betadet::variance({1, 1}), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(betadet::variance({100, 100}), 0.00124378109, 1e-11);
}

TEST(Cdf, Examples) {
  EXPECT_NEAR(betadet::cdf({1, 1}, 0.37), 0.37, 1e-12);
  EXPECT_NEAR(betadet::cdf({2, 2}, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(betadet::cdf({2, 1}, 0.5), 0.25, 1e-12);
  EXPECT_EQ(betadet::cdf({2, 3}, 0.0), 0.0);
  EXPECT_EQ(betadet::cdf({2, 3}, 1.0), 1.0);
}

TEST(Quantile, Examples) {
  EXPECT_NEAR(betadet::quantile({1, 1}, 0.9), 0.9, 1e-9);
  EXPECT_NEAR(betadet::quantile({2, 2}, 0.5), 0.5, 1e-9);
  EXPECT_NEAR(betadet::quantile({2, 1}, 0.25), 0.5, 1e-9);
}

TEST(Quantile, SolvesCdfToTolerance) {
  for (double a : {0.5, 0.6, 1.0, 2.0, 5.0, 20.0, 100.0}) {
    for (double b : {0.5, 0.6, 1.0, 2.0, 5.0, 20.0, 100.0}) {
      for (double q : {1e-6, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1 - 1e-6}) {
        const double y = betadet::quantile({a, b}, q);
        EXPECT_LE(std::fabs(betadet::cdf({a, b}, y) - q), 1e-9) << a << " " << b << " " << q;
      }
    }
  }
}

TEST(Sample, UniformEqualsRawDraw) {
  betadet::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(betadet::sample({1, 1}, a), b.uniform(), 1e-12);
}

TEST(Sample, MonteCarloMeans) {
  betadet::Rng rng(2024);
  double s22 = 0.0, s51 = 0.0;
  for (int i = 0; i < 10000; ++i) s22 += betadet::sample({2, 2}, rng);
  for (int i = 0; i < 10000; ++i) s51 += betadet::sample({5, 1}, rng);
  EXPECT_NEAR(s22 / 1e4, 0.5, 0.01);
  EXPECT_NEAR(s51 / 1e4, 5.0 / 6.0, 0.01);
}

TEST(Sample, SameSeedSameStream) {
  betadet::Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(betadet::sample({3, 7}, a), betadet::sample({3, 7}, b));
}

TEST(NllGrad, Examples) {
  const auto g = betadet::nll_grad({1, 1}, 0.5);
  EXPECT_NEAR(g.d_alpha, std::numbers::ln2 - 1.0, 1e-10);
  EXPECT_NEAR(g.d_beta, std::numbers::ln2 - 1.0, 1e-10);
  const auto s = betadet::nll_grad({3.7, 3.7}, 0.5);
  EXPECT_DOUBLE_EQ(s.d_alpha, s.d_beta);
}

// Invariants

TEST(BetaInvariants, NormalizesUnderSimpson) {
  const double eps = betadet::kTargetEpsilon;
  for (double a : {1.0, 2.0, 5.0, 20.0}) {
    for (double b : {1.0, 2.0, 5.0, 20.0}) {
      const BetaParams p(a, b);
      const double z = oracle::simpson([&](double y) { return std::exp(betadet::log_pdf(p, y)); }, eps, 1 - eps, 20001);
      // Mass outside [eps, 1 - eps] is up to pdf(0) * eps = 2e-5 for Beta(1, 20).
      const double tails = oracle::beta_cdf(a, b, eps) + (1.0 - oracle::beta_cdf(a, b, 1 - eps));
      EXPECT_NEAR(z + tails, 1.0, 1e-5) << a << " " << b;
      EXPECT_NEAR(z + tails, 1.0, 1e-9) << a << " " << b;
    }
  }
}

// A shape of 0.6 puts an integrable y^-0.4 singularity at an endpoint: the
// exact mass outside [eps, 1 - eps] is ~4e-4 and Simpson cannot resolve the
// spike, so those shapes are integrated with tanh-sinh and the tails are added
// from the oracle CDF.
TEST(BetaInvariants, NormalizesWithSingularEndpoints) {
  const double eps = betadet::kTargetEpsilon;
  boost::math::quadrature::tanh_sinh<double> quad;
  for (double a : {0.6, 1.0, 2.0, 5.0, 20.0}) {
    for (double b : {0.6, 1.0, 2.0, 5.0, 20.0}) {
      if (a != 0.6 && b != 0.6) continue;
      const BetaParams p(a, b);
      const double inner = quad.integrate([&](double y) { return std::exp(betadet::log_pdf(p, y)); }, eps, 1 - eps);
      const double tails = oracle::beta_cdf(a, b, eps) + (1.0 - oracle::beta_cdf(a, b, 1 - eps));
      EXPECT_NEAR(inner + tails, 1.0, 1e-9) << a << " " << b;
      EXPECT_GT(tails, 1e-5) << "literal Simpson bound would be unattainable only if the tails were this heavy";
    }
  }
}

TEST(BetaInvariants, SwapSymmetry) {
  betadet::Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const BetaParams p(rng.uniform(0.5, 50), rng.uniform(0.5, 50));
    const double y = rng.uniform(0.001, 0.999);
    EXPECT_NEAR(betadet::log_pdf(p, y), betadet::log_pdf(p.swapped(), 1 - y), 1e-12);
  }
}

TEST(BetaInvariants, CdfQuantileRoundTrip) {
  std::size_t checked = 0, total = 0;
  for (double a : {0.5, 0.6, 1.0, 2.0, 5.0, 20.0}) {
    for (double b : {0.5, 0.6, 1.0, 2.0, 5.0, 20.0}) {
      for (int k = 1; k <= 99; ++k) {
        const double y = k / 100.0;
        const double q = betadet::cdf({a, b}, y);
        ++total;
        // Rounding q to a double already moves the inverse by ulp(q) / pdf(y);
        // points where that alone exceeds 1e-8 are outside what any quantile
        // can recover (e.g. Beta(0.5, 20) at y = 0.75, where 1 - q ~ 1e-13).
        const double ulp = std::nextafter(q, 2.0) - q;
        if (ulp / std::exp(betadet::log_pdf({a, b}, y)) > 1e-8 || q <= 0.0 || q >= 1.0) continue;
        ++checked;
        EXPECT_NEAR(betadet::quantile({a, b}, q), y, 1e-7) << a << " " << b << " " << y;
      }
    }
  }
  EXPECT_GT(checked, total * 95 / 100);
}

TEST(BetaInvariants, MeanTimesConcentrationIsAlpha) {
  betadet::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const BetaParams p(rng.uniform(0.5, 100), rng.uniform(0.5, 100));
    EXPECT_NEAR(betadet::mean(p) * p.concentration(), p.alpha(), 1e-14 * std::max(1.0, p.alpha()));
  }
}

TEST(BetaInvariants, NllGradMatchesFiniteDifferences) {
  betadet::Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(0.6, 50), b = rng.uniform(0.6, 50), y = rng.uniform(0.01, 0.99);
    const auto g = betadet::nll_grad({a, b}, y);
    // log_pdf carries ~1e-13 absolute error at these shapes, so a two-point
    // quotient with a tiny step cannot resolve 1e-6; the stencil can.
    const double na = -oracle::five_point_difference([&](double t) { return betadet::log_pdf({t, b}, y); }, a, 1e-3);
    const double nb = -oracle::five_point_difference([&](double t) { return betadet::log_pdf({a, t}, y); }, b, 1e-3);
    EXPECT_LE(oracle::relative_error(g.d_alpha, na, 1e-3), 1e-6) << a << " " << b << " " << y;
    EXPECT_LE(oracle::relative_error(g.d_beta, nb, 1e-3), 1e-6) << a << " " << b << " " << y;
  }
}

TEST(BetaInvariants, CdfMonotone) {
  for (double a : {0.5, 1.0, 3.0, 40.0}) {
    for (double b : {0.5, 2.0, 9.0, 100.0}) {
      double prev = 0.0;
      for (int k = 0; k <= 2000; ++k) {
        const double c = betadet::cdf({a, b}, k / 2000.0);
        EXPECT_GE(c, prev) << a << " " << b << " " << k;
        prev = c;
      }
    }
  }
}

}  // namespace
