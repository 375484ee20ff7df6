#pragma once

#include "cbsim/core.hpp"
#include "cbsim/enduser.hpp"
#include "cbsim/qp.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cbsim {

/// Tolerance probabilities of the chance constraints. Each must lie in
/// (0.5, 1): the reformulation's quantile buffers are conservative only for
/// non-negative quantiles.
struct ChanceConfig {
  double eta1 = 0.999;  // community net-demand coverage
  double eta2 = 0.975;  // grid-import coverage
  double eta3 = 0.999;  // cap on positive net demand
  void validate() const;
};

/// Community-level aggregation of reported user plans over one lookahead.
struct UserAggregate {
  Eigen::VectorXd net;  // sum of x+ - x-
  Eigen::VectorXd pos;  // sum of x+
  Eigen::VectorXd neg;  // sum of x-
};

UserAggregate aggregate_plans(const std::vector<UserHorizonPlan>& plans);

/// Aggregated randomness belief per lookahead interval: mu = sum of user
/// means, sigma = sqrt of summed user variances.
struct AggregateBelief {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
};

struct CbsProblem {
  qp::QuadraticProgram program;
  long horizon = 0;
  int intervals = 0;
  double dt = 0.5;
  double zeta_user = 0.0;
  double objective_constant = 0.0;
  bool chance_constrained = false;
};

struct CbsHorizonPlan {
  Eigen::VectorXd energy, p_ch, p_dis, p_net, up, un, u_grid;
  double zeta_local = 0.0;
  double zeta_user = 0.0;
  double objective = 0.0;  // net operation cost of the horizon
  qp::SolveStatus status = qp::SolveStatus::iteration_limit;
  int iterations = 0;
  int nodes = 0;
  int eta_relaxations = 0;  // chance mode: ladder steps taken
  bool repair_applied = false;
};

/// Deterministic scheduling problem: wholesale cost of community imports,
/// grid charges on grid-sourced charging, throughput opex, and the peak
/// incentive on the horizon peak relative to the precomputed user peak.
CbsProblem build_deterministic(const UserAggregate& users, const BatterySpec& battery,
                               const TariffBook& tariffs, long h, const HorizonConfig& cfg,
                               double e_init);

/// Chance-constrained variant: the balance equality and grid-import bound
/// become quantile-buffered inequalities and the complementarity pair is
/// replaced by the cap on positive net demand.
CbsProblem build_chance_constrained(const UserAggregate& users, const AggregateBelief& belief,
                                    const ChanceConfig& chance, const BatterySpec& battery,
                                    const TariffBook& tariffs, long h, const HorizonConfig& cfg,
                                    double e_init);

CbsHorizonPlan solve_cbs_horizon(const CbsProblem& problem, const BatterySpec& battery,
                                 const qp::SolverOptions& opts = {});

/// Chance-constrained solve with the infeasibility fallback: each step
/// lowers every eta by 0.02 (floor 0.5), at most three times.
CbsHorizonPlan solve_chance_with_ladder(const UserAggregate& users,
                                        const AggregateBelief& belief, ChanceConfig chance,
                                        const BatterySpec& battery, const TariffBook& tariffs,
                                        long h, const HorizonConfig& cfg, double e_init,
                                        const qp::SolverOptions& opts = {});

}  // namespace cbsim
