#pragma once

#include <span>
#include <string>
#include <vector>

namespace cbsim {

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);
double sample_stddev(std::span<const double> v);
double median(std::vector<double> v);

/// Linear-interpolation quartile (the spreadsheet/NumPy default method).
/// q in [0,1]; the input is copied and sorted internally.
double quantile(std::vector<double> v, double q);

double normal_cdf(double x);

/// Standard normal quantile Phi^{-1}(p). Rational initial guess (Acklam's
/// coefficients) refined with one Newton step on the CDF; absolute error
/// below 1e-9 on (0,1). Throws std::domain_error outside (0,1).
double normal_quantile(double p);

/// Kolmogorov distribution survival value: P(D > x) for the limiting law.
double kolmogorov_sf(double x);

/// Critical value of the one-sample KS statistic at significance alpha,
/// asymptotic c(alpha)/sqrt(n) with the usual finite-sample correction.
double ks_critical_value(double alpha, std::size_t n);

struct KsResult {
  bool pass = false;
  double statistic = 0.0;
  double critical = 0.0;
  std::string reason;  // set when the test could not run (degenerate input)
};

/// One-sample KS test of normality with mean/variance estimated from the
/// sample (Lilliefors-style; the estimation bias is accepted, making the
/// test conservative at the nominal alpha). Requires at least 8 values.
KsResult ks_normality(std::span<const double> values, double alpha);

/// Sample autocorrelation for lags 0..max_lag; acf[0] == 1.
std::vector<double> acf(std::span<const double> series, int max_lag);

}  // namespace cbsim
