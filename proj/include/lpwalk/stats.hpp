#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "lpwalk/error.hpp"

namespace lpwalk {

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) noexcept { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Skew Brownian motion started at 0: density (1 + gamma sgn y) phi_t(y).
struct SkewBMRef {
  double gamma = 0.0;
  double t = 1.0;

  void validate() const {
    if (!(std::abs(gamma) <= 1.0)) throw DomainError("skew parameter gamma must lie in [-1, 1]");
    if (!(t > 0.0)) throw DomainError("skew reference time must be positive");
  }
};

inline double skew_bm_cdf(const SkewBMRef& ref, double y) {
  ref.validate();
  const double phi = normal_cdf(y / std::sqrt(ref.t));
  if (y <= 0.0) return (1.0 - ref.gamma) * phi;
  return (1.0 - ref.gamma) / 2.0 + (1.0 + ref.gamma) * (phi - 0.5);
}

inline double skew_bm_density(const SkewBMRef& ref, double y) {
  ref.validate();
  const double s = y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
  return (1.0 + ref.gamma * s) * normal_pdf(y / std::sqrt(ref.t)) / std::sqrt(ref.t);
}

// sup_x |F_n(x) - F(x)| over the sample's jump points.
inline double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("KS statistic needs a nonempty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(j) / n - f, f - static_cast<double>(i) / n});
    i = j;
  }
  return d;
}

inline double two_sample_ks(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("two-sample KS needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j >= y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

// P{K > lambda} for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) noexcept {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

// lambda with P{K > lambda} = alpha (about 1.3581 at 5%).
inline double kolmogorov_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("significance level must lie in (0, 1)");
  double lo = 0.2, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_survival(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Rejection thresholds for the sup distance at level alpha (asymptotic).
inline double ks_threshold(std::size_t n, double alpha = 0.05) {
  return kolmogorov_quantile(alpha) / std::sqrt(static_cast<double>(n));
}

inline double two_sample_ks_threshold(std::size_t n, std::size_t m, double alpha = 0.05) {
  const double effective = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  return kolmogorov_quantile(alpha) / std::sqrt(effective);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double half_width() const noexcept { return 0.5 * (upper - lower); }
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

// Standard normal quantile, Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - 0.02425) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

// Wilson score interval for k successes in n trials at two-sided confidence level.
inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double confidence) {
  if (n == 0) throw DomainError("Wilson interval needs at least one trial");
  if (k > n) throw DomainError("successes exceed trials");
  const double z = normal_quantile(0.5 + confidence / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Sample quantile, linear interpolation between order statistics (type 7).
inline double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample covariance.
inline double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("covariance needs two paired samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

inline double variance(std::span<const double> x) { return covariance(x, x); }

// Pearson correlation of the sorted sample against exponential quantiles
// -log(1 - (i - 1/2)/n). Scale-free, so the mean need not be known.
inline double exponential_qq_correlation(std::span<const double> sample) {
  if (sample.size() < 3) throw DomainError("QQ correlation needs at least three points");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  std::vector<double> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = -std::log1p(-(static_cast<double>(i) + 0.5) / n);
  const double sxy = covariance(x, q), sxx = variance(x), syy = variance(q);
  if (sxx == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lpwalk
