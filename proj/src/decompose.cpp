#include "cbsim/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cbsim {

namespace {

double tricube(double u) {
  const double a = 1.0 - u * u * u;
  return a <= 0.0 ? 0.0 : a * a * a;
}

int next_odd(int v) { return v % 2 == 0 ? v + 1 : v; }

std::vector<double> moving_average(std::span<const double> y, int len) {
  const int n = static_cast<int>(y.size());
  if (len > n) throw std::invalid_argument("moving_average: window longer than data");
  std::vector<double> out(static_cast<std::size_t>(n - len + 1));
  double acc = 0.0;
  for (int i = 0; i < len; ++i) acc += y[static_cast<std::size_t>(i)];
  out[0] = acc / len;
  for (int i = len; i < n; ++i) {
    acc += y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i - len)];
    out[static_cast<std::size_t>(i - len + 1)] = acc / len;
  }
  return out;
}

}  // namespace

double loess_at(std::span<const double> y, double x0, int window, int degree) {
  const int n = static_cast<int>(y.size());
  if (n == 0) throw std::invalid_argument("loess_at: empty series");
  if (window < 2) throw std::invalid_argument("loess_at: window < 2");
  if (degree < 0 || degree > 1) throw std::invalid_argument("loess_at: degree must be 0 or 1");
  const int w = std::min(window, n);

  // nearest-w contiguous window around x0
  int left = static_cast<int>(std::floor(x0)) - (w - 1) / 2;
  left = std::clamp(left, 0, n - w);
  while (left > 0 && x0 - (left - 1) < (left + w - 1) - x0) --left;
  while (left + w < n && (left + w) - x0 < x0 - left) ++left;

  double h = std::max(x0 - left, static_cast<double>(left + w - 1) - x0);
  if (window > n) h += static_cast<double>(window - n) / 2.0;
  if (h <= 0.0) h = 1.0;

  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (int i = left; i < left + w; ++i) {
    const double d = std::abs(i - x0) / h;
    const double wt = tricube(std::min(d, 1.0));
    if (wt <= 0.0) continue;
    const double xi = static_cast<double>(i);
    sw += wt;
    swx += wt * xi;
    swy += wt * y[static_cast<std::size_t>(i)];
    swxx += wt * xi * xi;
    swxy += wt * xi * y[static_cast<std::size_t>(i)];
  }
  if (sw <= 0.0) {
    return y[static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(x0)), 0, n - 1))];
  }
  const double mean_y = swy / sw;
  if (degree == 0) return mean_y;
  const double mean_x = swx / sw;
  const double var_x = swxx / sw - mean_x * mean_x;
  if (var_x <= 1e-12) return mean_y;
  const double slope = (swxy / sw - mean_x * mean_y) / var_x;
  return mean_y + slope * (x0 - mean_x);
}

std::vector<double> loess_smooth(std::span<const double> y, int window, int degree) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = loess_at(y, static_cast<double>(i), window, degree);
  }
  return out;
}

StlResult stl_decompose(std::span<const double> y, int period, const StlOptions& opts) {
  const int n = static_cast<int>(y.size());
  if (period < 2) throw std::invalid_argument("stl_decompose: period < 2");
  if (n < 2 * period) {
    throw std::invalid_argument("stl_decompose: series length " + std::to_string(n) +
                                " shorter than two periods of " + std::to_string(period));
  }
  const int ns = next_odd(std::max(3, opts.seasonal_window));
  const int nt = opts.trend_window > 0
                     ? next_odd(opts.trend_window)
                     : next_odd(static_cast<int>(std::ceil(1.5 * period)));
  const int nl = next_odd(period);

  std::vector<double> trend(static_cast<std::size_t>(n), 0.0);
  std::vector<double> seasonal(static_cast<std::size_t>(n), 0.0);
  std::vector<double> detrended(static_cast<std::size_t>(n));
  std::vector<double> cycle(static_cast<std::size_t>(n + 2 * period));
  std::vector<double> sub;

  for (int iter = 0; iter < std::max(1, opts.inner_iterations); ++iter) {
    for (int i = 0; i < n; ++i) {
      detrended[static_cast<std::size_t>(i)] =
          y[static_cast<std::size_t>(i)] - trend[static_cast<std::size_t>(i)];
    }
    // cycle-subseries smoothing, extended one period on each side
    for (int phase = 0; phase < period; ++phase) {
      sub.clear();
      for (int i = phase; i < n; i += period) {
        sub.push_back(detrended[static_cast<std::size_t>(i)]);
      }
      const int len = static_cast<int>(sub.size());
      for (int k = -1; k <= len; ++k) {
        const double v = loess_at(sub, static_cast<double>(k), ns, 1);
        const int pos = phase + (k + 1) * period;
        if (pos >= 0 && pos < n + 2 * period) cycle[static_cast<std::size_t>(pos)] = v;
      }
    }
    // low-pass filter for seasonal centering
    auto low = moving_average(moving_average(moving_average(cycle, period), period), 3);
    auto low_smooth = loess_smooth(low, nl, 1);
    for (int i = 0; i < n; ++i) {
      seasonal[static_cast<std::size_t>(i)] =
          cycle[static_cast<std::size_t>(i + period)] - low_smooth[static_cast<std::size_t>(i)];
    }
    std::vector<double> deseason(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      deseason[static_cast<std::size_t>(i)] =
          y[static_cast<std::size_t>(i)] - seasonal[static_cast<std::size_t>(i)];
    }
    trend = loess_smooth(deseason, nt, 1);
  }

  StlResult out;
  out.seasonal = std::move(seasonal);
  out.trend = std::move(trend);
  out.remainder.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.remainder[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] -
                                                 out.seasonal[static_cast<std::size_t>(i)] -
                                                 out.trend[static_cast<std::size_t>(i)];
  }
  return out;
}

DecompositionResult mstl_decompose(std::span<const double> series, int daily_period,
                                   int weekly_period, int passes, const StlOptions& opts) {
  const int n = static_cast<int>(series.size());
  if (weekly_period <= daily_period) {
    throw std::invalid_argument("mstl_decompose: weekly period must exceed daily period");
  }
  if (n < 2 * weekly_period) {
    throw std::invalid_argument("mstl_decompose: series length " + std::to_string(n) +
                                " shorter than two weekly periods (" +
                                std::to_string(2 * weekly_period) + ")");
  }

  const int periods[2] = {daily_period, weekly_period};
  std::vector<std::vector<double>> seasonal(
      2, std::vector<double>(static_cast<std::size_t>(n), 0.0));
  std::vector<double> trend(static_cast<std::size_t>(n), 0.0);
  std::vector<double> partial(static_cast<std::size_t>(n));

  for (int pass = 0; pass < std::max(1, passes); ++pass) {
    for (int k = 0; k < 2; ++k) {
      const auto& other = seasonal[static_cast<std::size_t>(1 - k)];
      for (int i = 0; i < n; ++i) {
        partial[static_cast<std::size_t>(i)] =
            series[static_cast<std::size_t>(i)] - other[static_cast<std::size_t>(i)];
      }
      StlResult fit = stl_decompose(partial, periods[k], opts);
      seasonal[static_cast<std::size_t>(k)] = std::move(fit.seasonal);
      trend = std::move(fit.trend);
    }
  }

  DecompositionResult out;
  out.daily_seasonal = std::move(seasonal[0]);
  out.weekly_seasonal = std::move(seasonal[1]);
  out.trend = std::move(trend);
  out.residual.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.residual[static_cast<std::size_t>(i)] =
        series[static_cast<std::size_t>(i)] - out.daily_seasonal[static_cast<std::size_t>(i)] -
        out.weekly_seasonal[static_cast<std::size_t>(i)] - out.trend[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace cbsim
