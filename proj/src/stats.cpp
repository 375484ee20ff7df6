#include "cbsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("sample_variance: need n >= 2");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double sample_stddev(std::span<const double> v) {
  return std::sqrt(sample_variance(v));
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty input");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation to the normal quantile (relative error
// ~1.15e-9 before refinement).
double quantile_guess(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double u = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double u = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double u = p - 0.5;
  const double r = u * u;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must lie in (0,1)");
  }
  double x = quantile_guess(p);
  // One Newton step on Phi(x) - p = 0.
  const double e = normal_cdf(x) - p;
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (pdf > 0.0) x -= e / pdf;
  return x;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_critical_value(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("ks_critical_value: alpha outside (0,1)");
  }
  if (n == 0) throw std::invalid_argument("ks_critical_value: n == 0");
  // Invert the limiting distribution by bisection: find c with SF(c) = alpha.
  double lo = 1e-3, hi = 4.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kolmogorov_sf(mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double c = 0.5 * (lo + hi);
  const double sqn = std::sqrt(static_cast<double>(n));
  return c / (sqn + 0.12 + 0.11 / sqn);  // Stephens' finite-sample correction
}

KsResult ks_normality(std::span<const double> values, double alpha) {
  KsResult out;
  if (values.size() < 8) {
    out.reason = "fewer than 8 values";
    return out;
  }
  const double m = mean(values);
  const double sd = sample_stddev(values);
  if (!(sd > 0.0)) {
    out.reason = "zero-variance sample";
    return out;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf((sorted[i] - m) / sd);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  out.statistic = d;
  out.critical = ks_critical_value(alpha, sorted.size());
  out.pass = d <= out.critical;
  return out;
}

std::vector<double> acf(std::span<const double> series, int max_lag) {
  if (max_lag < 0) throw std::invalid_argument("acf: negative max_lag");
  if (static_cast<std::size_t>(max_lag) >= series.size()) {
    throw std::invalid_argument("acf: series shorter than max_lag");
  }
  const double m = mean(series);
  const std::size_t n = series.size();
  double denom = 0.0;
  for (double x : series) denom += (x - m) * (x - m);
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 0.0);
  out[0] = 1.0;
  if (denom <= 0.0) return out;  // constant series: define acf(k>0) = 0
  for (int k = 1; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) {
      s += (series[t] - m) * (series[t - static_cast<std::size_t>(k)] - m);
    }
    out[static_cast<std::size_t>(k)] = s / denom;
  }
  return out;
}

}  // namespace cbsim
