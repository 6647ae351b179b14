#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flexknn/errors.hpp"

namespace flexknn {

// Pearson correlation. Throws DegenerateVariance when either argument is
// (numerically) constant; callers that want "constant means uninformative"
// catch it and substitute zero. The returned value is clamped to [-1, 1] to
// absorb last-ulp rounding.
inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("correlation arguments differ in length");
  if (x.size() < 2) throw TooFew("correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double eps_x = 1e-18 * std::max(1.0, mx * mx) * n;
  const double eps_y = 1e-18 * std::max(1.0, my * my) * n;
  if (sxx <= eps_x || syy <= eps_y) throw DegenerateVariance("constant argument in correlation");
  const double r = sxy / std::sqrt(sxx * syy);
  return r < -1.0 ? -1.0 : (r > 1.0 ? 1.0 : r);
}

namespace detail {

// Continued fraction for the regularized incomplete beta, evaluated with the
// modified Lentz scheme.
inline double incbeta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 3e-16) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::incbeta_cf(a, b, x) / a;
  return 1.0 - front * detail::incbeta_cf(b, a, 1.0 - x) / b;
}

// Two-sided Student t critical value: the t >= 0 with P(|T_df| > t) = alpha.
// The tail is expressed through the incomplete beta and inverted by bisection,
// which is slow-ish and utterly reliable.
inline double student_t_critical(int df, double alpha) {
  if (df < 1) throw InvalidParameter("t quantile needs df >= 1");
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
  const double nu = static_cast<double>(df);
  auto two_sided_tail = [&](double t) { return regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t)); };
  double hi = 1.0;
  while (two_sided_tail(hi) > alpha) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  double lo = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (two_sided_tail(mid) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct ConfidenceInterval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double halfwidth = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1 in the denominator)
  double alpha = 0.05;
  int n = 0;
};

// Student-t confidence interval for the mean: mean +- t_{alpha/2}(n-1) s/sqrt(n).
inline ConfidenceInterval mean_ci(std::span<const double> values, double alpha) {
  if (values.size() < 2) throw TooFew("confidence interval needs at least two values");
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
  ConfidenceInterval ci;
  ci.n = static_cast<int>(values.size());
  ci.alpha = alpha;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= ci.n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  ci.mean = mean;
  ci.stddev = std::sqrt(ss / (ci.n - 1));
  ci.halfwidth = ci.stddev == 0.0 ? 0.0 : student_t_critical(ci.n - 1, alpha) * ci.stddev / std::sqrt(ci.n);
  ci.lo = mean - ci.halfwidth;
  ci.hi = mean + ci.halfwidth;
  return ci;
}

}  // namespace flexknn
