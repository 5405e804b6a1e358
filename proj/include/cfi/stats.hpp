#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "cfi/core.hpp"

namespace cfi {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw DataError("mean: empty input");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// unbiased (n-1) variance; 0 for n == 1
inline double sample_variance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) throw DataError("sample_variance: empty input");
  if (n == 1) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(n - 1);
}

inline double sample_sd(const std::vector<double>& x) { return std::sqrt(sample_variance(x)); }

namespace detail {

// Lentz's continued fraction for the incomplete beta integral.
inline double beta_cont_fraction(double a, double b, double x) {
  constexpr double fpmin = 1e-300;
  constexpr double eps = 1e-14;
  constexpr int max_iter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete_beta: a, b must be positive");
  if (std::isnan(x) || x < 0.0 || x > 1.0) throw NumericError("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cont_fraction(a, b, x) / a;
  return 1.0 - bt * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student's t with nu > 0 degrees of freedom.
inline double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw NumericError("student_t_cdf: nu must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double x = nu / (nu + t * t);
  const double half_tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

// Inverse CDF by bisection; p in (0, 1).
inline double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw NumericError("student_t_quantile: p outside (0, 1)");
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, nu) > p) lo *= 2.0;
  while (student_t_cdf(hi, nu) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, nu) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::fabs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

struct TTestResult {
  double mean = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;
  double ci_lower = 0.0;  // one-sided 1-alpha lower confidence bound
  std::size_t n = 0;
};

// One-sided paired t-test of H0: E[d] <= 0 against H1: E[d] > 0.
// A degenerate sample (sd == 0) is settled by the sign of the mean:
// p = 1 when mean <= 0, p = 0 when mean > 0.
inline TTestResult paired_t_test_one_sided(const std::vector<double>& delta, double alpha = 0.05) {
  const std::size_t n = delta.size();
  if (n < 2) throw DataError("paired_t_test_one_sided: need at least 2 observations");
  TTestResult res;
  res.n = n;
  res.mean = mean(delta);
  const double sd = sample_sd(delta);
  res.se = sd / std::sqrt(static_cast<double>(n));
  const double nu = static_cast<double>(n - 1);
  if (sd == 0.0) {
    res.t = res.mean > 0.0 ? std::numeric_limits<double>::infinity()
                           : (res.mean < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    res.p_one_sided = res.mean > 0.0 ? 0.0 : 1.0;
    res.ci_lower = res.mean;
    return res;
  }
  res.t = res.mean / res.se;
  res.p_one_sided = 1.0 - student_t_cdf(res.t, nu);
  res.ci_lower = res.mean - student_t_quantile(1.0 - alpha, nu) * res.se;
  return res;
}

// Step-down Holm adjustment. Preserves input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (std::isnan(p) || p < 0.0 || p > 1.0) throw DataError("holm_adjust: p outside [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m, 0.0);
  double running_max = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double scaled = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running_max = std::max(running_max, scaled);
    adjusted[order[k]] = running_max;
  }
  return adjusted;
}

}  // namespace cfi
