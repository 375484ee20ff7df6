#include "cbsim/randomness.hpp"

#include "cbsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim {

void RandomnessModel::validate() const {
  if (interval_sigma.empty()) throw std::invalid_argument("RandomnessModel: empty sigma");
  if (interval_mu.size() != interval_sigma.size() ||
      noise_sigma.size() != interval_sigma.size()) {
    throw std::invalid_argument("RandomnessModel: field lengths differ");
  }
  for (double s : interval_sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("RandomnessModel: sigma must be positive");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 0.5)) {
    throw std::invalid_argument("RandomnessModel: outlier fraction outside [0, 0.5)");
  }
  if (!(length_scale > 0.0)) throw std::invalid_argument("RandomnessModel: length scale <= 0");
  if (!(signal_sigma > 0.0)) throw std::invalid_argument("RandomnessModel: signal sigma <= 0");
}

IqrResult iqr_filter(const std::vector<double>& values, double k) {
  IqrResult out;
  if (values.size() < 4) {
    out.kept = values;
    return out;  // passthrough, caller may warn
  }
  const double q1 = quantile(values, 0.25);
  const double q3 = quantile(values, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - k * iqr;
  const double hi = q3 + k * iqr;
  out.filtered = true;
  for (double v : values) {
    if (v < lo || v > hi) {
      ++out.removed;
    } else {
      out.kept.push_back(v);
    }
  }
  return out;
}

RandomnessModel fit_interval_stats(const std::vector<std::vector<double>>& groups,
                                   const FitOptions& opts) {
  const int t_count = static_cast<int>(groups.size());
  if (t_count == 0) throw std::invalid_argument("fit_interval_stats: no groups");

  RandomnessModel model;
  model.interval_sigma.assign(static_cast<std::size_t>(t_count), 0.0);
  model.interval_mu.assign(static_cast<std::size_t>(t_count), 0.0);
  model.noise_sigma.assign(static_cast<std::size_t>(t_count), 0.0);
  model.normality_pass.assign(static_cast<std::size_t>(t_count), 0);
  model.signal_sigma = opts.signal_sigma;

  std::vector<bool> valid(static_cast<std::size_t>(t_count), false);
  for (int t = 0; t < t_count; ++t) {
    const auto& g = groups[static_cast<std::size_t>(t)];
    if (g.size() >= 2) {
      const double sd = sample_stddev(g);
      if (sd > 0.0) {
        model.interval_mu[static_cast<std::size_t>(t)] = mean(g);
        model.interval_sigma[static_cast<std::size_t>(t)] = sd;
        valid[static_cast<std::size_t>(t)] = true;
      }
    }
  }
  // impute degenerate groups from the nearest valid neighbour (cyclic)
  for (int t = 0; t < t_count; ++t) {
    if (valid[static_cast<std::size_t>(t)]) continue;
    for (int off = 1; off < t_count; ++off) {
      const int a = (t + off) % t_count;
      const int b = (t - off % t_count + t_count) % t_count;
      if (valid[static_cast<std::size_t>(a)]) {
        model.interval_sigma[static_cast<std::size_t>(t)] =
            model.interval_sigma[static_cast<std::size_t>(a)];
        break;
      }
      if (valid[static_cast<std::size_t>(b)]) {
        model.interval_sigma[static_cast<std::size_t>(t)] =
            model.interval_sigma[static_cast<std::size_t>(b)];
        break;
      }
    }
    if (!(model.interval_sigma[static_cast<std::size_t>(t)] > 0.0)) {
      throw std::invalid_argument("fit_interval_stats: no group has usable variance");
    }
  }
  for (int t = 0; t < t_count; ++t) {
    model.noise_sigma[static_cast<std::size_t>(t)] =
        opts.noise_fraction * model.interval_sigma[static_cast<std::size_t>(t)];
  }
  return model;
}

double select_length_scale(const std::vector<double>& acf_values, double threshold) {
  int last = 0;
  for (std::size_t k = 1; k < acf_values.size(); ++k) {
    if (acf_values[k] > threshold) {
      last = static_cast<int>(k);
    } else {
      break;  // consecutive run from lag 1 only
    }
  }
  if (last == 0) return 1.0;
  return std::max(1.0, static_cast<double>(last) / std::sqrt(2.0));
}

namespace {

/// Group a residual series by interval of day, IQR-filter each group and
/// return the per-group sample variances' mean (shared by the estimator and
/// its white-noise calibration so both see identical truncation).
double pooled_filtered_variance(const std::vector<double>& resid, int T, double iqr_k) {
  const int days = static_cast<int>(resid.size()) / T;
  double acc = 0.0;
  int used = 0;
  std::vector<double> g;
  for (int t = 0; t < T; ++t) {
    g.clear();
    for (int d = 0; d < days; ++d) g.push_back(resid[static_cast<std::size_t>(d * T + t)]);
    IqrResult f = iqr_filter(g, iqr_k);
    if (f.kept.size() >= 2) {
      const double sd = sample_stddev(f.kept);
      if (sd > 0) {
        acc += sd * sd;
        ++used;
      }
    }
  }
  return used > 0 ? acc / used : 1.0;
}

}  // namespace

double noise_retention_factor(int n, const HorizonConfig& cfg, const FitOptions& opts) {
  const int T = cfg.intervals_per_horizon;
  double acc = 0.0;
  const int reps = std::max(1, opts.calibration_replicates);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(0x5eedULL + 7919ULL * static_cast<std::uint64_t>(rep) +
            static_cast<std::uint64_t>(n));
    std::vector<double> noise(static_cast<std::size_t>(n));
    for (auto& v : noise) v = rng.gaussian();
    DecompositionResult d = mstl_decompose(noise, T, 7 * T, 2, opts.stl);
    acc += pooled_filtered_variance(d.residual, T, opts.iqr_k);
  }
  return acc / reps;
}

PipelineResult fit_randomness(const std::vector<double>& history, const HorizonConfig& cfg,
                              const FitOptions& opts) {
  cfg.validate();
  const int T = cfg.intervals_per_horizon;
  const int weekly = 7 * T;
  PipelineResult out;
  out.decomposition = mstl_decompose(history, T, weekly, 2, opts.stl);

  const auto& resid = out.decomposition.residual;
  const int days = static_cast<int>(resid.size()) / T;

  // group residuals by interval of day, filter, test
  std::vector<std::vector<double>> groups(static_cast<std::size_t>(T));
  for (int d = 0; d < days; ++d) {
    for (int t = 0; t < T; ++t) {
      groups[static_cast<std::size_t>(t)].push_back(
          resid[static_cast<std::size_t>(d * T + t)]);
    }
  }

  long total = 0, removed = 0;
  std::vector<std::vector<double>> filtered(static_cast<std::size_t>(T));
  out.interval_stats.resize(static_cast<std::size_t>(T));
  int passed = 0;
  for (int t = 0; t < T; ++t) {
    auto& g = groups[static_cast<std::size_t>(t)];
    total += static_cast<long>(g.size());
    IqrResult f = iqr_filter(g, opts.iqr_k);
    if (!f.filtered) {
      out.warnings.push_back("interval " + std::to_string(t + 1) +
                             ": fewer than 4 residuals, IQR filter skipped");
    }
    removed += f.removed;
    auto& st = out.interval_stats[static_cast<std::size_t>(t)];
    st.ks = ks_normality(f.kept, opts.ks_alpha);
    if (st.ks.pass) ++passed;
    for (double v : f.kept) out.filtered_residuals.push_back(v);
    filtered[static_cast<std::size_t>(t)] = std::move(f.kept);
  }

  out.model = fit_interval_stats(filtered, opts);
  out.model.outlier_fraction = total > 0 ? static_cast<double>(removed) /
                                               static_cast<double>(total)
                                         : 0.0;
  if (opts.absorption_correction) {
    const double retention =
        noise_retention_factor(static_cast<int>(history.size()), cfg, opts);
    const double inflate = 1.0 / std::sqrt(std::max(retention, 1e-6));
    for (auto& s : out.model.interval_sigma) s *= inflate;
    for (auto& s : out.model.noise_sigma) s *= inflate;
  }
  for (int t = 0; t < T; ++t) {
    auto& st = out.interval_stats[static_cast<std::size_t>(t)];
    st.mu = out.model.interval_mu[static_cast<std::size_t>(t)];
    st.sigma = out.model.interval_sigma[static_cast<std::size_t>(t)];
    st.centered = std::abs(st.mu) <= 0.05 * st.sigma;
    if (!st.centered) {
      out.warnings.push_back("interval " + std::to_string(t + 1) +
                             ": residual mean exceeds 5% of sigma");
    }
    out.model.normality_pass[static_cast<std::size_t>(t)] = st.ks.pass ? 1 : 0;
  }
  out.normality_rate = static_cast<double>(passed) / static_cast<double>(T);

  // length scale from the autocorrelation of the filtered residual sequence
  const int max_lag = std::min<int>(opts.acf_max_lag,
                                    static_cast<int>(resid.size()) - 1);
  out.acf_values = acf(resid, max_lag);
  const double thr = opts.acf_threshold > 0.0
                         ? opts.acf_threshold
                         : 2.0 / std::sqrt(static_cast<double>(resid.size()));
  out.model.length_scale = opts.length_scale_override > 0.0
                               ? opts.length_scale_override
                               : select_length_scale(out.acf_values, thr);
  out.model.signal_sigma = opts.signal_sigma;
  out.model.validate();
  return out;
}

}  // namespace cbsim
