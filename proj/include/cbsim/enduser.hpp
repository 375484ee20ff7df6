#pragma once

#include "cbsim/core.hpp"
#include "cbsim/qp.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cbsim {

/// One end user: expected/bounded consumption, price elasticity, hyperbolic
/// discounting parameters, PV trace and solar-credit state. All series are
/// absolute-horizon indexed (1-based h reads element h-1) and must cover
/// every lookahead window of the simulation.
struct UserProfile {
  std::string id;
  std::vector<double> expected;     // x_hat > 0
  std::vector<double> historical;   // raw history for the randomness fit
  std::vector<double> lower;        // consumption bounds
  std::vector<double> upper;
  std::vector<double> elasticity;   // beta < 0
  double kappa = 0.0;               // discounting degree
  double tau = 0.2;                 // discounting asymptote
  std::vector<double> pv;           // G, all zero for consumers
  double credit_init = 0.0;
  bool is_prosumer = false;

  void validate(long min_length) const;
};

/// Loss-averse (dis)comfort of consuming x against expectation x_hat:
/// -lambda_ref * [1 + (x - x_hat) / (2 beta x_hat)] * (x - x_hat).
/// Positive below expectation, negative for moderate increases.
double discomfort(double x, double x_hat, double beta, double lambda_ref);

/// Hyperbolic multiplier (1 + tau t kappa) / (1 + t kappa) on the discomfort
/// of an interval t steps ahead; 1 at t = 0, asymptote tau.
double discount_factor(int t_offset, double kappa, double tau);

/// Carryover of signed deviations from previous binding intervals.
double update_carryover(double prev_carryover, double x_hat_binding, double x_binding);

/// Built per-horizon problem: the quadratic program plus the evaluation
/// context needed to read the solution back and compute the true utility.
struct UserProblem {
  qp::QuadraticProgram program;
  long horizon = 0;
  int intervals = 0;
  double lambda_ref = 0.0;
  double objective_constant = 0.0;  // utility = qp objective + constant
  double carryover_used = 0.0;      // after the feasibility clamp
  bool carryover_clamped = false;
  double credit_init = 0.0;
  std::vector<double> discounts;    // per lookahead offset
};

struct UserHorizonPlan {
  Eigen::VectorXd x, x_pos, x_neg, x_grid, g_spill, delta, credits, phi;
  double objective = 0.0;           // Eq-style utility at the plan
  qp::SolveStatus status = qp::SolveStatus::iteration_limit;
  double kkt_residual = 0.0;
  int iterations = 0;
  int nodes = 0;
};

/// Assemble the per-user lookahead problem for horizon h: discounted
/// utility objective, rebound equality over the first T_RB intervals with
/// the carryover folded in (clamped into the box-feasible range when an
/// extreme carryover would make the rebound equality unsatisfiable),
/// net-demand split with big-M complementarity, PV spill, credit offset
/// and cumulative credits with non-negative stored credits.
/// kappa_override >= 0 replaces the profile's kappa (operator-view solves).
UserProblem build_user_problem(const UserProfile& user, const TariffBook& tariffs, long h,
                               double carryover, const HorizonConfig& cfg,
                               double kappa_override = -1.0);

UserHorizonPlan solve_user_horizon(const UserProblem& problem,
                                   const qp::SolverOptions& opts = {});

/// Direct evaluation of the discounted utility for a consumption/net split,
/// used as the objective cross-check.
double user_utility(const UserProblem& problem, const UserProfile& user,
                    const TariffBook& tariffs, const UserHorizonPlan& plan);

}  // namespace cbsim
