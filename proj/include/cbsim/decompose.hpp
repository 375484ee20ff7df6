#pragma once

#include <span>
#include <vector>

namespace cbsim {

/// Locally weighted regression (tricube weights, configurable degree) of a
/// uniformly spaced series, evaluated at position x0. The window holds the
/// `window` nearest points; positions outside the data range extrapolate
/// from the nearest window.
double loess_at(std::span<const double> y, double x0, int window, int degree = 1);

/// Smooth the whole series at its own positions.
std::vector<double> loess_smooth(std::span<const double> y, int window, int degree = 1);

struct StlOptions {
  int seasonal_window = 11;  // loess window over each cycle-subseries
  int trend_window = 0;      // 0: next odd >= 1.5 * period
  int inner_iterations = 2;
};

struct StlResult {
  std::vector<double> seasonal;
  std::vector<double> trend;
  std::vector<double> remainder;
};

/// Seasonal-trend decomposition by loess for a single period: cycle-subseries
/// smoothing, moving-average low-pass for centering, loess trend.
StlResult stl_decompose(std::span<const double> y, int period, const StlOptions& opts = {});

struct DecompositionResult {
  std::vector<double> daily_seasonal;
  std::vector<double> weekly_seasonal;
  std::vector<double> trend;
  std::vector<double> residual;
};

/// Two-seasonality decomposition realized as iterated STL, shortest period
/// first, refined over `passes` sweeps. Components re-add to the input
/// exactly because the residual is formed by subtraction.
DecompositionResult mstl_decompose(std::span<const double> series, int daily_period,
                                   int weekly_period, int passes = 2,
                                   const StlOptions& opts = {});

}  // namespace cbsim
