#pragma once

#include "cbsim/core.hpp"
#include "cbsim/decompose.hpp"
#include "cbsim/stats.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cbsim {

/// Per-user residual statistics defining the non-stationary GP: one sigma
/// per interval of day, noise scale fixed at 0.1 * sigma, and the squared
/// exponential hyperparameters.
struct RandomnessModel {
  std::vector<double> interval_sigma;       // length T, > 0
  std::vector<double> interval_mu;          // expected ~ 0
  std::vector<double> noise_sigma;          // 0.1 * interval_sigma
  std::vector<std::uint8_t> normality_pass; // per interval-of-day
  double outlier_fraction = 0.0;
  double length_scale = 2.1;                // l_SE, in intervals
  double signal_sigma = 1.0;                // sigma_SE

  int intervals_per_day() const { return static_cast<int>(interval_sigma.size()); }
  double sigma_at(long h) const {
    return interval_sigma[static_cast<std::size_t>((h - 1) % intervals_per_day())];
  }
  double mu_at(long h) const {
    return interval_mu[static_cast<std::size_t>((h - 1) % intervals_per_day())];
  }
  double noise_at(long h) const {
    return noise_sigma[static_cast<std::size_t>((h - 1) % intervals_per_day())];
  }
  void validate() const;
};

struct IqrResult {
  std::vector<double> kept;
  int removed = 0;
  bool filtered = false;  // false: passthrough (fewer than 4 values)
};

/// Removes points outside [Q1 - k*IQR, Q3 + k*IQR]. Inputs with fewer than
/// four values pass through untouched.
IqrResult iqr_filter(const std::vector<double>& values, double k = 1.5);

struct IntervalStats {
  double mu = 0.0;
  double sigma = 0.0;
  bool imputed = false;   // sigma copied from neighbours (degenerate group)
  bool centered = true;   // |mu| <= 0.05 * sigma
  KsResult ks;
};

struct FitOptions {
  double iqr_k = 1.5;
  double ks_alpha = 0.05;
  double noise_fraction = 0.1;      // sigma_eps = fraction * sigma
  double acf_threshold = 0.0;       // 0: use 2/sqrt(n)
  double length_scale_override = 0; // 0: derive from the ACF
  double signal_sigma = 1.0;
  int acf_max_lag = 16;
  // The loess smoothers absorb part of the noise variance (the residual-df
  // effect); sigma estimates are rescaled by the pipeline's white-noise
  // retention, measured on seeded replicates of the same configuration.
  bool absorption_correction = true;
  int calibration_replicates = 2;
  StlOptions stl;
};

/// White-noise variance retention of the grouped-residual estimator for a
/// given series length and day structure; < 1 because the smoothers track
/// part of the noise.
double noise_retention_factor(int n, const HorizonConfig& cfg, const FitOptions& opts);

/// Fit per-interval-of-day statistics from residuals grouped by interval.
/// Degenerate groups get sigma imputed from the nearest valid neighbours.
RandomnessModel fit_interval_stats(const std::vector<std::vector<double>>& groups,
                                   const FitOptions& opts = {});

/// Largest lag of a consecutive significant run from lag 1, scaled by
/// 1/sqrt(2) so the SE kernel decays to ~exp(-1) at that lag; floor 1.
double select_length_scale(const std::vector<double>& acf_values, double threshold);

struct PipelineResult {
  DecompositionResult decomposition;
  RandomnessModel model;
  std::vector<double> filtered_residuals;  // concatenated survivors
  std::vector<double> acf_values;
  std::vector<IntervalStats> interval_stats;
  double normality_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Full per-user randomness extraction: MSTL on the history, per-interval
/// IQR filtering, KS normality check, interval statistics, ACF-based
/// length-scale selection.
PipelineResult fit_randomness(const std::vector<double>& history, const HorizonConfig& cfg,
                              const FitOptions& opts = {});

}  // namespace cbsim
