#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// None of these call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "betadet/assignment.hpp"

namespace oracle {

using Wide = boost::multiprecision::cpp_bin_float_50;

inline double lgamma(double x) { return static_cast<double>(boost::math::lgamma(Wide(x))); }
inline double digamma(double x) { return static_cast<double>(boost::math::digamma(Wide(x))); }

inline double beta_log_pdf(double a, double b, double y) {
  const Wide wa(a), wb(b), wy(y);
  const Wide lb = boost::math::lgamma(wa) + boost::math::lgamma(wb) - boost::math::lgamma(wa + wb);
  return static_cast<double>((wa - 1) * log(wy) + (wb - 1) * log1p(-wy) - lb);
}

inline double beta_cdf(double a, double b, double y) {
  return static_cast<double>(boost::math::ibeta(Wide(a), Wide(b), Wide(y)));
}

inline double beta_mean(double a, double b) { return static_cast<double>(Wide(a) / (Wide(a) + Wide(b))); }

inline double beta_variance(double a, double b) {
  const Wide s = Wide(a) + Wide(b);
  return static_cast<double>(Wide(a) * Wide(b) / (s * s * (s + 1)));
}

/// Exhaustive minimum over injections of columns into rows.
inline double brute_force_min(const betadet::CostMatrix& c) {
  std::vector<std::size_t> rows(c.rows());
  std::iota(rows.begin(), rows.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Every permutation of rows; the first cols entries give the assignment.
  // Rows beyond cols are unused, so sort them to skip duplicate prefixes.
  do {
    double total = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) total += c(rows[j], j);
    best = std::min(best, total);
    std::reverse(rows.begin() + static_cast<std::ptrdiff_t>(c.cols()), rows.end());
  } while (std::next_permutation(rows.begin(), rows.end()));
  return best;
}

/// All optimal assignments (column -> row) within tol of the minimum.
inline std::vector<std::vector<std::size_t>> brute_force_argmins(const betadet::CostMatrix& c, double tol) {
  const double best = brute_force_min(c);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> rows(c.rows());
  std::iota(rows.begin(), rows.end(), 0);
  do {
    double total = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) total += c(rows[j], j);
    if (total <= best + tol) out.emplace_back(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(c.cols()));
    std::reverse(rows.begin() + static_cast<std::ptrdiff_t>(c.cols()), rows.end());
  } while (std::next_permutation(rows.begin(), rows.end()));
  return out;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Five-point stencil; truncation error O(h^4), so a larger h keeps round-off low.
inline double five_point_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x - 2 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2 * h)) / (12.0 * h);
}

/// Composite Simpson rule on [a, b] with an odd node count.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t nodes) {
  const std::size_t n = nodes - 1;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

inline double relative_error(double a, double b, double floor = 0.0) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace oracle
