#include "cbsim/enduser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim {

void UserProfile::validate(long min_length) const {
  const auto check = [&](const std::vector<double>& s, const char* name) {
    if (static_cast<long>(s.size()) < min_length) {
      throw std::invalid_argument("UserProfile " + id + ": " + name + " shorter than " +
                                  std::to_string(min_length));
    }
  };
  check(expected, "expected");
  check(lower, "lower");
  check(upper, "upper");
  check(elasticity, "elasticity");
  check(pv, "pv");
  for (long i = 0; i < min_length; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(expected[k] > 0.0)) {
      throw std::invalid_argument("UserProfile " + id + ": expected consumption must be > 0");
    }
    if (!(lower[k] <= expected[k] && expected[k] <= upper[k])) {
      throw std::invalid_argument("UserProfile " + id + ": bounds must bracket expectation");
    }
    if (!(elasticity[k] < 0.0)) {
      throw std::invalid_argument("UserProfile " + id + ": elasticity must be negative");
    }
    if (!is_prosumer && pv[k] != 0.0) {
      throw std::invalid_argument("UserProfile " + id + ": consumer with non-zero PV");
    }
  }
  if (!(kappa >= 0.0)) throw std::invalid_argument("UserProfile: kappa < 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("UserProfile: tau outside [0,1]");
  if (credit_init < 0.0) throw std::invalid_argument("UserProfile: negative initial credits");
}

double discomfort(double x, double x_hat, double beta, double lambda_ref) {
  if (!(x_hat > 0.0)) throw std::invalid_argument("discomfort: x_hat must be > 0");
  if (!(beta < 0.0)) throw std::invalid_argument("discomfort: beta must be < 0");
  const double dev = x - x_hat;
  return -lambda_ref * (1.0 + dev / (2.0 * beta * x_hat)) * dev;
}

double discount_factor(int t_offset, double kappa, double tau) {
  if (t_offset < 0) throw std::invalid_argument("discount_factor: negative offset");
  if (kappa < 0) throw std::invalid_argument("discount_factor: negative kappa");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("discount_factor: tau outside [0,1]");
  const double tk = static_cast<double>(t_offset) * kappa;
  return (1.0 + tau * tk) / (1.0 + tk);
}

double update_carryover(double prev_carryover, double x_hat_binding, double x_binding) {
  return prev_carryover + (x_hat_binding - x_binding);
}

namespace {

// variable blocks: x, x+, x-, x_grid, spill, delta, credits, phi
struct Layout {
  int T;
  int x(int t) const { return t; }
  int xp(int t) const { return T + t; }
  int xn(int t) const { return 2 * T + t; }
  int xg(int t) const { return 3 * T + t; }
  int gs(int t) const { return 4 * T + t; }
  int del(int t) const { return 5 * T + t; }
  int cr(int t) const { return 6 * T + t; }
  int phi(int t) const { return 7 * T + t; }
  int n() const { return 8 * T; }
};

}  // namespace

UserProblem build_user_problem(const UserProfile& user, const TariffBook& tariffs, long h,
                               double carryover, const HorizonConfig& cfg,
                               double kappa_override) {
  cfg.validate();
  const int T = cfg.intervals_per_horizon;
  const int T_rb = cfg.rebound_intervals;
  user.validate(h + T - 1);
  if (!std::isfinite(carryover)) throw std::invalid_argument("build_user_problem: carryover not finite");

  const double lambda_ref = price_reference(h, tariffs, cfg);
  if (!(lambda_ref > 0.0)) {
    throw std::invalid_argument(
        "build_user_problem: price reference must be positive over the window "
        "(all-negative effective prices make the discomfort non-convex)");
  }
  const double kappa = kappa_override >= 0.0 ? kappa_override : user.kappa;

  UserProblem out;
  out.horizon = h;
  out.intervals = T;
  out.lambda_ref = lambda_ref;
  out.credit_init = user.credit_init;

  const Layout L{T};
  const int n = L.n();

  // clamp the carryover into the rebound-feasible range
  double lo_gap = 0.0, hi_gap = 0.0;
  for (int t = 0; t < T_rb; ++t) {
    const auto k = static_cast<std::size_t>(h - 1 + t);
    lo_gap += user.lower[k] - user.expected[k];
    hi_gap += user.upper[k] - user.expected[k];
  }
  out.carryover_used = std::clamp(carryover, lo_gap, hi_gap);
  out.carryover_clamped = out.carryover_used != carryover;

  double big_m = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(h - 1 + t);
    big_m = std::max({big_m, user.upper[k], user.pv[k]});
  }
  big_m = 2.0 * std::max(big_m, 1e-3);
  // Per-interval big-M pair: positive net demand cannot exceed the
  // consumption cap, negative net demand cannot exceed PV minus the
  // consumption floor. Intervals that cannot export need no binary at all.
  const auto m_pos = [&](int t) {
    return std::max(user.upper[static_cast<std::size_t>(h - 1 + t)], 1e-3);
  };
  const auto m_neg = [&](int t) {
    const auto k = static_cast<std::size_t>(h - 1 + t);
    return std::max(0.0, user.pv[k] - user.lower[k]);
  };

  qp::QuadraticProgram& p = out.program;
  p.big_m = big_m;
  p.c_vector = Eigen::VectorXd::Zero(n);
  p.lower = Eigen::VectorXd::Constant(n, 0.0);
  p.upper = Eigen::VectorXd::Constant(n, qp::kInf);

  std::vector<Eigen::Triplet<double>> q_trips, eq_trips, in_trips;
  std::vector<double> eq_rhs, in_rhs;
  out.discounts.resize(static_cast<std::size_t>(T));

  double constant = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(h - 1 + t);
    const double x_hat = user.expected[k];
    const double beta = user.elasticity[k];
    const double disc = discount_factor(t, kappa, user.tau);
    out.discounts[static_cast<std::size_t>(t)] = disc;

    // B(x) = -lambda_ref*(x - x_hat) + c2*(x - x_hat)^2, c2 > 0 for beta < 0
    const double c2 = -lambda_ref / (2.0 * beta * x_hat);
    q_trips.emplace_back(L.x(t), L.x(t), 2.0 * disc * c2);
    p.c_vector[L.x(t)] += disc * (-lambda_ref - 2.0 * c2 * x_hat);
    constant += disc * (lambda_ref * x_hat + c2 * x_hat * x_hat);

    p.c_vector[L.xg(t)] += tariffs.rt_price[k];
    p.c_vector[L.xp(t)] += tariffs.import_charge[k];
    p.c_vector[L.xn(t)] += tariffs.export_charge[k];

    // bounds
    p.lower[L.x(t)] = user.lower[k];
    p.upper[L.x(t)] = user.upper[k];
    p.upper[L.gs(t)] = user.pv[k];
    p.upper[L.phi(t)] = 1.0;

    // net-demand balance: x - G + gs = xp - xn
    const int row_bal = static_cast<int>(eq_rhs.size());
    eq_trips.emplace_back(row_bal, L.x(t), 1.0);
    eq_trips.emplace_back(row_bal, L.gs(t), 1.0);
    eq_trips.emplace_back(row_bal, L.xp(t), -1.0);
    eq_trips.emplace_back(row_bal, L.xn(t), 1.0);
    eq_rhs.push_back(user.pv[k]);

    // credit offset: xp - delta = x_grid
    const int row_grid = static_cast<int>(eq_rhs.size());
    eq_trips.emplace_back(row_grid, L.xp(t), 1.0);
    eq_trips.emplace_back(row_grid, L.del(t), -1.0);
    eq_trips.emplace_back(row_grid, L.xg(t), -1.0);
    eq_rhs.push_back(0.0);

    // cumulative credits: cr_t = cr_{t-1} + xn_t - delta_t
    const int row_cr = static_cast<int>(eq_rhs.size());
    eq_trips.emplace_back(row_cr, L.cr(t), 1.0);
    eq_trips.emplace_back(row_cr, L.xn(t), -1.0);
    eq_trips.emplace_back(row_cr, L.del(t), 1.0);
    if (t > 0) eq_trips.emplace_back(row_cr, L.cr(t - 1), -1.0);
    eq_rhs.push_back(t == 0 ? user.credit_init : 0.0);

    // complementarity big-M: xp <= M+(1-phi), xn <= M- phi. An interval
    // that cannot export (PV below the consumption floor) pins xn = 0 and
    // needs no binary.
    if (m_neg(t) > 1e-12) {
      const int row_p = static_cast<int>(in_rhs.size());
      in_trips.emplace_back(row_p, L.xp(t), 1.0);
      in_trips.emplace_back(row_p, L.phi(t), m_pos(t));
      in_rhs.push_back(m_pos(t));
      const int row_n = static_cast<int>(in_rhs.size());
      in_trips.emplace_back(row_n, L.xn(t), 1.0);
      in_trips.emplace_back(row_n, L.phi(t), -m_neg(t));
      in_rhs.push_back(0.0);
      p.binary_indices.push_back(L.phi(t));
    } else {
      p.upper[L.xn(t)] = 0.0;
      p.upper[L.phi(t)] = 0.0;
    }

    // spend only credits that exist: delta_t <= cr_{t-1} + xn_t
    const int row_avail = static_cast<int>(in_rhs.size());
    in_trips.emplace_back(row_avail, L.del(t), 1.0);
    in_trips.emplace_back(row_avail, L.xn(t), -1.0);
    if (t > 0) in_trips.emplace_back(row_avail, L.cr(t - 1), -1.0);
    in_rhs.push_back(t == 0 ? user.credit_init : 0.0);
  }
  out.objective_constant = constant;

  // rebound: sum over the window equals expectation plus carryover
  {
    const int row = static_cast<int>(eq_rhs.size());
    double rhs = out.carryover_used;
    for (int t = 0; t < T_rb; ++t) {
      eq_trips.emplace_back(row, L.x(t), 1.0);
      rhs += user.expected[static_cast<std::size_t>(h - 1 + t)];
    }
    eq_rhs.push_back(rhs);
  }

  p.q_matrix.resize(n, n);
  p.q_matrix.setFromTriplets(q_trips.begin(), q_trips.end());
  p.eq_matrix.resize(static_cast<int>(eq_rhs.size()), n);
  p.eq_matrix.setFromTriplets(eq_trips.begin(), eq_trips.end());
  p.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<long>(eq_rhs.size()));
  p.ineq_matrix.resize(static_cast<int>(in_rhs.size()), n);
  p.ineq_matrix.setFromTriplets(in_trips.begin(), in_trips.end());
  p.ineq_rhs = Eigen::Map<Eigen::VectorXd>(in_rhs.data(), static_cast<long>(in_rhs.size()));
  return out;
}

UserHorizonPlan solve_user_horizon(const UserProblem& problem, const qp::SolverOptions& opts) {
  const int T = problem.intervals;
  const Layout L{T};
  qp::SolveResult res = qp::solve_with_binaries(problem.program, opts);
  if (res.status != qp::SolveStatus::optimal) {
    throw std::runtime_error(std::string("solve_user_horizon: solver returned ") +
                             qp::to_string(res.status) + " at horizon " +
                             std::to_string(problem.horizon));
  }
  UserHorizonPlan plan;
  plan.x.resize(T);
  plan.x_pos.resize(T);
  plan.x_neg.resize(T);
  plan.x_grid.resize(T);
  plan.g_spill.resize(T);
  plan.delta.resize(T);
  plan.credits.resize(T);
  plan.phi.resize(T);
  for (int t = 0; t < T; ++t) {
    plan.x[t] = res.x[L.x(t)];
    plan.x_pos[t] = res.x[L.xp(t)];
    plan.x_neg[t] = res.x[L.xn(t)];
    plan.x_grid[t] = res.x[L.xg(t)];
    plan.g_spill[t] = res.x[L.gs(t)];
    plan.delta[t] = res.x[L.del(t)];
    plan.credits[t] = res.x[L.cr(t)];
    plan.phi[t] = res.x[L.phi(t)];
    // polish away solver-tolerance dust on the complementary pair
    if (plan.x_pos[t] < 1e-9) plan.x_pos[t] = 0.0;
    if (plan.x_neg[t] < 1e-9) plan.x_neg[t] = 0.0;
  }
  plan.objective = problem.program.objective_value(res.x) + problem.objective_constant;
  plan.kkt_residual = res.kkt_residual;
  plan.iterations = res.iterations;
  plan.nodes = res.nodes_explored;
  return plan;
}

double user_utility(const UserProblem& problem, const UserProfile& user,
                    const TariffBook& tariffs, const UserHorizonPlan& plan) {
  const int T = problem.intervals;
  double u = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(problem.horizon - 1 + t);
    u += tariffs.rt_price[k] * plan.x_grid[t] + tariffs.import_charge[k] * plan.x_pos[t] +
         tariffs.export_charge[k] * plan.x_neg[t] +
         problem.discounts[static_cast<std::size_t>(t)] *
             discomfort(plan.x[t], user.expected[k], user.elasticity[k], problem.lambda_ref);
  }
  return u;
}

}  // namespace cbsim
