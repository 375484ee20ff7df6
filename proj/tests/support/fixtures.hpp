#pragma once

// Shared scenario builders for unit and acceptance tests.

#include "cbsim/core.hpp"
#include "cbsim/enduser.hpp"
#include "cbsim/randomness.hpp"
#include "cbsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace cbsim_test {

/// Tariff book with flat import/export charges and a caller-supplied
/// wholesale price series.
inline cbsim::TariffBook make_tariffs(std::vector<double> rt, double imp = 0.05,
                                      double exp = 0.01) {
  cbsim::TariffBook t;
  t.import_charge.assign(rt.size(), imp);
  t.export_charge.assign(rt.size(), exp);
  t.rt_price = std::move(rt);
  return t;
}

inline std::vector<double> flat_series(long n, double v) {
  return std::vector<double>(static_cast<std::size_t>(n), v);
}

/// Daily double-peak wholesale price pattern with an optional negative
/// midday dip, tiled over `n` intervals of a `T`-interval day.
inline std::vector<double> daily_price_pattern(long n, int T, double base = 0.08,
                                               double peak = 0.35, double midday = 0.02) {
  std::vector<double> p(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i % T) / static_cast<double>(T);
    double v = base;
    if (frac >= 0.70 && frac < 0.85) {
      v = peak;  // evening peak
    } else if (frac >= 0.30 && frac < 0.55) {
      v = midday;  // solar hours
    } else if (frac >= 0.55 && frac < 0.70) {
      v = 0.5 * (base + peak);
    }
    p[static_cast<std::size_t>(i)] = v;
  }
  return p;
}

/// Consumer with constant expectation and elasticity; bounds at the usual
/// half/one-and-a-half multiples.
inline cbsim::UserProfile make_user(const std::string& id, long n, double x_hat = 1.0,
                                    double beta = -0.5, double kappa = 0.0,
                                    double tau = 0.2) {
  cbsim::UserProfile u;
  u.id = id;
  u.expected = flat_series(n, x_hat);
  u.lower = flat_series(n, 0.5 * x_hat);
  u.upper = flat_series(n, 1.5 * x_hat);
  u.elasticity = flat_series(n, beta);
  u.pv = flat_series(n, 0.0);
  u.kappa = kappa;
  u.tau = tau;
  return u;
}

/// Prosumer variant: bell-shaped PV generation centered midday.
inline cbsim::UserProfile make_prosumer(const std::string& id, long n, int T,
                                        double x_hat = 1.0, double pv_peak = 2.0,
                                        double beta = -0.5, double kappa = 0.0) {
  cbsim::UserProfile u = make_user(id, n, x_hat, beta, kappa);
  u.is_prosumer = true;
  for (long i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i % T) / static_cast<double>(T);
    const double z = (frac - 0.45) / 0.14;
    u.pv[static_cast<std::size_t>(i)] = pv_peak * std::exp(-0.5 * z * z);
  }
  return u;
}

/// Flat randomness model for GP-driven tests.
inline cbsim::RandomnessModel make_randomness(int T, double sigma, double l = 2.1) {
  cbsim::RandomnessModel m;
  m.interval_sigma.assign(static_cast<std::size_t>(T), sigma);
  m.interval_mu.assign(static_cast<std::size_t>(T), 0.0);
  m.noise_sigma.assign(static_cast<std::size_t>(T), 0.1 * sigma);
  m.normality_pass.assign(static_cast<std::size_t>(T), 1);
  m.length_scale = l;
  m.signal_sigma = 1.0;
  return m;
}

/// Day-shaped randomness: quiet overnight, active mornings and evenings.
inline cbsim::RandomnessModel make_shaped_randomness(int T, double base, double swing,
                                                     double l = 2.1) {
  cbsim::RandomnessModel m = make_randomness(T, base, l);
  for (int t = 0; t < T; ++t) {
    const double frac = static_cast<double>(t) / T;
    const double bump = std::exp(-0.5 * std::pow((frac - 0.33) / 0.10, 2)) +
                        std::exp(-0.5 * std::pow((frac - 0.78) / 0.10, 2));
    m.interval_sigma[static_cast<std::size_t>(t)] = base + swing * bump;
    m.noise_sigma[static_cast<std::size_t>(t)] =
        0.1 * m.interval_sigma[static_cast<std::size_t>(t)];
  }
  return m;
}

}  // namespace cbsim_test
