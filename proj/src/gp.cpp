#include "cbsim/gp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cbsim::gp {

void KernelInputs::validate() const {
  if (indices.size() != sigmas.size()) {
    throw std::invalid_argument("KernelInputs: index/sigma length mismatch");
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) throw std::invalid_argument("KernelInputs: sigma must be positive");
  }
}

KernelInputs kernel_inputs(const RandomnessModel& model, std::span<const long> window) {
  KernelInputs in;
  in.indices.assign(window.begin(), window.end());
  in.sigmas.reserve(window.size());
  for (long h : window) in.sigmas.push_back(model.sigma_at(h));
  return in;
}

double se_kernel(double h_i, double h_j, double sigma_se, double l_se) {
  if (!(l_se > 0.0)) throw std::invalid_argument("se_kernel: l_se must be positive");
  const double d = h_i - h_j;
  return sigma_se * sigma_se * std::exp(-d * d / (2.0 * l_se * l_se));
}

Eigen::MatrixXd nonstationary_cov(const KernelInputs& in, double sigma_se, double l_se) {
  in.validate();
  const int n = static_cast<int>(in.indices.size());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = in.sigmas[static_cast<std::size_t>(i)] *
                       in.sigmas[static_cast<std::size_t>(j)] *
                       se_kernel(static_cast<double>(in.indices[static_cast<std::size_t>(i)]),
                                 static_cast<double>(in.indices[static_cast<std::size_t>(j)]),
                                 sigma_se, l_se);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

void PosteriorBelief::validate() const {
  if (cov.rows() != cov.cols() || mean.size() != cov.rows()) {
    throw std::invalid_argument("PosteriorBelief: dimension mismatch");
  }
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd m) {
  const double scale = std::max(m.diagonal().mean(), 1e-30);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  for (double jitter = 1e-10; llt.info() != Eigen::Success && jitter <= 1e-6 + 1e-18;
       jitter *= 100.0) {
    Eigen::MatrixXd bumped = m;
    bumped.diagonal().array() += jitter * scale;
    llt.compute(bumped);
  }
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("gp: covariance factorization failed after jitter ladder");
  }
  return llt;
}

PosteriorBelief condition(const RandomnessModel& model, std::span<const long> observed_idx,
                          std::span<const double> observed_val,
                          std::span<const long> query_idx) {
  if (observed_idx.size() != observed_val.size()) {
    throw std::invalid_argument("condition: observation index/value mismatch");
  }
  const int no = static_cast<int>(observed_idx.size());
  const int nq = static_cast<int>(query_idx.size());
  const KernelInputs qin = kernel_inputs(model, query_idx);
  PosteriorBelief out;
  if (no == 0) {
    out.mean = Eigen::VectorXd::Zero(nq);
    out.cov = nonstationary_cov(qin, model.signal_sigma, model.length_scale);
    return out;
  }
  const KernelInputs oin = kernel_inputs(model, observed_idx);
  Eigen::MatrixXd k_oo = nonstationary_cov(oin, model.signal_sigma, model.length_scale);
  for (int i = 0; i < no; ++i) {
    const double eps = model.noise_at(observed_idx[static_cast<std::size_t>(i)]);
    k_oo(i, i) += eps * eps;
  }
  Eigen::MatrixXd k_qo(nq, no);
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < no; ++j) {
      k_qo(i, j) = qin.sigmas[static_cast<std::size_t>(i)] *
                   oin.sigmas[static_cast<std::size_t>(j)] *
                   se_kernel(static_cast<double>(query_idx[static_cast<std::size_t>(i)]),
                             static_cast<double>(observed_idx[static_cast<std::size_t>(j)]),
                             model.signal_sigma, model.length_scale);
    }
  }
  auto llt = cholesky_with_jitter(std::move(k_oo));
  Eigen::VectorXd y(no);
  for (int i = 0; i < no; ++i) y[i] = observed_val[static_cast<std::size_t>(i)];
  out.mean = k_qo * llt.solve(y);
  out.cov = nonstationary_cov(qin, model.signal_sigma, model.length_scale) -
            k_qo * llt.solve(k_qo.transpose());
  return out;
}

std::pair<double, double> marginal(const PosteriorBelief& belief, int t) {
  if (t < 0 || t >= belief.mean.size()) {
    throw std::out_of_range("marginal: index " + std::to_string(t) + " outside belief");
  }
  double var = belief.cov(t, t);
  if (var < -1e-8) {
    throw std::runtime_error("marginal: negative posterior variance " + std::to_string(var));
  }
  if (var < 0.0) var = 0.0;
  return {belief.mean[t], std::sqrt(var)};
}

Eigen::VectorXd sample_randomness(const RandomnessModel& model, std::span<const long> window,
                                  std::uint64_t seed) {
  const KernelInputs in = kernel_inputs(model, window);
  Eigen::MatrixXd k = nonstationary_cov(in, model.signal_sigma, model.length_scale);
  const int n = static_cast<int>(window.size());
  for (int i = 0; i < n; ++i) {
    const double eps = model.noise_at(window[static_cast<std::size_t>(i)]);
    k(i, i) += eps * eps;
  }
  auto llt = cholesky_with_jitter(std::move(k));
  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.gaussian();
  return llt.matrixL() * z;
}

RandomnessTracker::RandomnessTracker(RandomnessModel model, int trailing_days)
    : model_(std::move(model)) {
  model_.validate();
  if (trailing_days < 1) throw std::invalid_argument("RandomnessTracker: trailing_days < 1");
  trailing_ = trailing_days * model_.intervals_per_day();
}

void RandomnessTracker::trim(long current) {
  while (!obs_idx_.empty() && obs_idx_.front() < current - trailing_) {
    obs_idx_.pop_front();
    obs_val_.pop_front();
  }
}

std::pair<double, double> RandomnessTracker::binding_marginal(long h) const {
  const std::vector<long> obs(obs_idx_.begin(), obs_idx_.end());
  const std::vector<double> val(obs_val_.begin(), obs_val_.end());
  const long q[1] = {h};
  PosteriorBelief b = condition(model_, obs, val, q);
  return marginal(b, 0);
}

double RandomnessTracker::draw_binding(long h, Rng& rng) {
  const auto [mu, sd] = binding_marginal(h);
  const double latent = mu + sd * rng.gaussian();
  const double value = latent + model_.noise_at(h) * rng.gaussian();
  observe(h, value);
  return value;
}

void RandomnessTracker::observe(long h, double value) {
  if (!obs_idx_.empty() && h <= obs_idx_.back()) {
    throw std::invalid_argument("RandomnessTracker: observations must advance in time");
  }
  obs_idx_.push_back(h);
  obs_val_.push_back(value);
  ++total_observed_;
  trim(h);
}

PosteriorBelief RandomnessTracker::lookahead(long h_start, int count) const {
  std::vector<long> query(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) query[static_cast<std::size_t>(i)] = h_start + i;
  const std::vector<long> obs(obs_idx_.begin(), obs_idx_.end());
  const std::vector<double> val(obs_val_.begin(), obs_val_.end());
  PosteriorBelief b = condition(model_, obs, val, query);
  // the belief describes realized randomness: add the independent noise
  for (int i = 0; i < count; ++i) {
    const double eps = model_.noise_at(query[static_cast<std::size_t>(i)]);
    b.cov(i, i) += eps * eps;
  }
  return b;
}

}  // namespace cbsim::gp
