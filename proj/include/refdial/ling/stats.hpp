#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "refdial/common.hpp"

namespace refdial::ling {

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
  const int kMaxIter = 200;
  const double kEps = 3e-14;
  const double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                       b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided p-value of the two-sample Student t statistic with df degrees of
// freedom: I_{df/(df+t^2)}(df/2, 1/2).
inline double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return detail::incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct StatResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::optional<double> cohen_d;  // null when the pooled variance is 0
  double t = 0.0;
  double p = 1.0;
  std::string stars;  // *** p<0.001, ** p<0.005, * p<0.01
};

inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.005) return "**";
  if (p < 0.01) return "*";
  return "";
}

// Equal-variance two-sample t-test with Cohen's d on the pooled standard
// deviation; the sign convention is (mean_a - mean_b) / pooled_sd.
inline StatResult compare_groups(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() >= 2 && b.size() >= 2, "compare_groups: need at least 2 samples per group");
  auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  auto ssq = [&](const std::vector<double>& xs, double m) {
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s;
  };
  StatResult r;
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  double df = na + nb - 2.0;
  double pooled_var = (ssq(a, r.mean_a) + ssq(b, r.mean_b)) / df;
  double diff = r.mean_a - r.mean_b;
  if (pooled_var <= 0.0) {
    r.cohen_d = std::nullopt;
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
  } else {
    double pooled_sd = std::sqrt(pooled_var);
    r.cohen_d = diff / pooled_sd;
    double se = pooled_sd * std::sqrt(1.0 / na + 1.0 / nb);
    r.t = diff / se;
    r.p = student_t_two_sided_p(r.t, df);
  }
  r.stars = significance_stars(r.p);
  return r;
}

}  // namespace refdial::ling
