#include "doctest.h"

#include "cbsim/decompose.hpp"
#include "cbsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace cbsim;

namespace {

double rms(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

constexpr int kDaily = 48;
constexpr int kWeekly = 7 * 48;

}  // namespace

TEST_CASE("loess of a line is the line") {
  std::vector<double> y(50);
  for (int i = 0; i < 50; ++i) y[static_cast<std::size_t>(i)] = 2.0 + 0.5 * i;
  auto s = loess_smooth(y, 11, 1);
  CHECK(max_abs_diff(s, y) <= 1e-9);
}

TEST_CASE("constant series decomposes to pure trend") {
  std::vector<double> y(static_cast<std::size_t>(2 * kWeekly), 3.7);
  auto d = mstl_decompose(y, kDaily, kWeekly);
  CHECK(rms(d.daily_seasonal) <= 1e-10);
  CHECK(rms(d.weekly_seasonal) <= 1e-10);
  CHECK(rms(d.residual) <= 1e-10);
  for (double v : d.trend) CHECK(v == doctest::Approx(3.7).epsilon(1e-9));
}

TEST_CASE("reconstruction identity is exact") {
  Rng rng(31);
  std::vector<double> y(static_cast<std::size_t>(3 * kWeekly));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i);
    y[i] = 1.0 + 0.3 * std::sin(2 * std::numbers::pi * t / kDaily) + 0.001 * t +
           0.2 * rng.gaussian();
  }
  auto d = mstl_decompose(y, kDaily, kWeekly);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double back = d.daily_seasonal[i] + d.weekly_seasonal[i] + d.trend[i] + d.residual[i];
    CHECK(std::abs(back - y[i]) <= 1e-9);
  }
}

TEST_CASE("pure daily sinusoid is captured by the daily seasonal") {
  const int n = 2 * kWeekly;
  std::vector<double> y(static_cast<std::size_t>(n));
  const double amp = 1.0;
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] =
        5.0 + amp * std::sin(2 * std::numbers::pi * i / kDaily);
  }
  auto d = mstl_decompose(y, kDaily, kWeekly);
  CHECK(rms(d.residual) <= 0.01 * amp);
  std::vector<double> err(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    err[i] = d.daily_seasonal[i] - amp * std::sin(2 * std::numbers::pi * static_cast<double>(i) / kDaily);
  }
  CHECK(rms(err) <= 0.02 * amp);
}

TEST_CASE("multi-seasonal signal with ramp: components recovered") {
  const int n = 3 * kWeekly;
  const double a_daily = 1.0, a_weekly = 0.6;
  std::vector<double> y(static_cast<std::size_t>(n));
  std::vector<double> sd(y.size()), sw(y.size()), tr(y.size());
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    sd[static_cast<std::size_t>(i)] = a_daily * std::sin(2 * std::numbers::pi * t / kDaily);
    sw[static_cast<std::size_t>(i)] = a_weekly * std::sin(2 * std::numbers::pi * t / kWeekly);
    tr[static_cast<std::size_t>(i)] = 2.0 + 0.5 * t / n;
    y[static_cast<std::size_t>(i)] = sd[static_cast<std::size_t>(i)] +
                                     sw[static_cast<std::size_t>(i)] +
                                     tr[static_cast<std::size_t>(i)];
  }
  auto d = mstl_decompose(y, kDaily, kWeekly);
  std::vector<double> ed(y.size()), ew(y.size()), et(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    ed[i] = d.daily_seasonal[i] - sd[i];
    ew[i] = d.weekly_seasonal[i] - sw[i];
    et[i] = d.trend[i] - tr[i];
  }
  CHECK(rms(ed) <= 0.02 * a_daily);
  CHECK(rms(ew) <= 0.02 * a_weekly);
  CHECK(rms(et) <= 0.02 * 2.0);
}

TEST_CASE("seasonal components are centered over their periods") {
  Rng rng(8);
  const int n = 3 * kWeekly;
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = 4.0 + std::cos(2 * std::numbers::pi * i / kDaily) +
                                     0.05 * rng.gaussian();
  }
  auto d = mstl_decompose(y, kDaily, kWeekly);
  for (int start = 0; start + kDaily <= n; start += kDaily) {
    double s = 0;
    for (int i = start; i < start + kDaily; ++i) s += d.daily_seasonal[static_cast<std::size_t>(i)];
    CHECK(std::abs(s / kDaily) <= 0.02);
  }
}

TEST_CASE("short series is rejected with an explicit error") {
  std::vector<double> y(static_cast<std::size_t>(kWeekly), 1.0);
  CHECK_THROWS_AS(mstl_decompose(y, kDaily, kWeekly), std::invalid_argument);
}
