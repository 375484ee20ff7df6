#pragma once

#include "cbsim/randomness.hpp"
#include "cbsim/rng.hpp"
#include "cbsim/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

namespace cbsim::gp {

/// Kernel input pairs (h, sigma_h): horizon indices with their per-index
/// randomness scale.
struct KernelInputs {
  std::vector<long> indices;
  std::vector<double> sigmas;
  void validate() const;
};

KernelInputs kernel_inputs(const RandomnessModel& model, std::span<const long> window);

/// Squared exponential kernel sigma_se^2 * exp(-(hi-hj)^2 / (2 l_se^2)).
double se_kernel(double h_i, double h_j, double sigma_se, double l_se);

/// Non-stationary covariance K = Lambda' K_SE Lambda with Lambda = diag(sigma):
/// K_ij = sigma_i sigma_j k_SE(h_i, h_j). Symmetric PSD by construction.
Eigen::MatrixXd nonstationary_cov(const KernelInputs& in, double sigma_se, double l_se);

/// Gaussian quantile used by the chance-constraint reformulation.
inline double gaussian_quantile(double p) { return normal_quantile(p); }

struct PosteriorBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  void validate() const;
};

/// Latent posterior after conditioning on noisy observations:
///   mean = K_qo (K_oo + diag(noise^2))^{-1} y
///   cov  = K_qq - K_qo (K_oo + diag(noise^2))^{-1} K_oq
/// computed through a Cholesky factorization with a jitter ladder.
PosteriorBelief condition(const RandomnessModel& model, std::span<const long> observed_idx,
                          std::span<const double> observed_val,
                          std::span<const long> query_idx);

/// Marginal (mean_t, stddev_t) of one query position; diagonal entries in
/// [-1e-8, 0) clamp to zero, anything lower is an error.
std::pair<double, double> marginal(const PosteriorBelief& belief, int t);

/// One draw from N(0, K + diag(noise^2)) over the window.
Eigen::VectorXd sample_randomness(const RandomnessModel& model, std::span<const long> window,
                                  std::uint64_t seed);

/// Cholesky with jitter ladder 1e-10..1e-6 (relative to mean diagonal).
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd m);

/// Per-user sequential state for the receding-horizon loop: accumulates one
/// observation per horizon, conditions on a trailing window (full-history
/// conditioning is cubic in the lifetime and the SE kernel's influence dies
/// within a few length scales), and draws binding realizations that are by
/// construction a joint sample of the truncated process.
class RandomnessTracker {
 public:
  RandomnessTracker(RandomnessModel model, int trailing_days);

  /// Latent posterior marginal at index h given everything observed so far.
  std::pair<double, double> binding_marginal(long h) const;

  /// Draw x_rnd at h (latent posterior draw plus independent noise) and
  /// append it to the observation set.
  double draw_binding(long h, Rng& rng);

  /// Record an externally realized value (used when replaying ledgers).
  void observe(long h, double value);

  /// Posterior over [h_start, h_start+count) given current observations,
  /// with independent noise variance added to the diagonal (the belief is
  /// about realized randomness, which includes the noise term).
  PosteriorBelief lookahead(long h_start, int count) const;

  const RandomnessModel& model() const { return model_; }
  std::size_t observation_count() const { return total_observed_; }

 private:
  void trim(long current);

  RandomnessModel model_;
  int trailing_ = 0;  // in indices
  std::deque<long> obs_idx_;
  std::deque<double> obs_val_;
  std::size_t total_observed_ = 0;
};

}  // namespace cbsim::gp
