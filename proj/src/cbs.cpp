#include "cbsim/cbs.hpp"

#include "cbsim/gp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim {

void ChanceConfig::validate() const {
  for (double e : {eta1, eta2, eta3}) {
    if (!(e > 0.5 && e < 1.0)) {
      throw std::invalid_argument("ChanceConfig: eta must lie in (0.5, 1)");
    }
  }
}

UserAggregate aggregate_plans(const std::vector<UserHorizonPlan>& plans) {
  if (plans.empty()) throw std::invalid_argument("aggregate_plans: no plans");
  const long T = plans.front().x.size();
  UserAggregate agg;
  agg.pos = Eigen::VectorXd::Zero(T);
  agg.neg = Eigen::VectorXd::Zero(T);
  for (const auto& p : plans) {
    if (p.x_pos.size() != T) throw std::invalid_argument("aggregate_plans: length mismatch");
    agg.pos += p.x_pos;
    agg.neg += p.x_neg;
  }
  agg.net = agg.pos - agg.neg;
  return agg;
}

namespace {

// variable blocks: E, p_ch, p_dis, P, up, un, u_grid, zeta, [psi in det mode]
struct Layout {
  int T;
  int e(int t) const { return t; }
  int pch(int t) const { return T + t; }
  int pdis(int t) const { return 2 * T + t; }
  int p(int t) const { return 3 * T + t; }
  int up(int t) const { return 4 * T + t; }
  int un(int t) const { return 5 * T + t; }
  int ug(int t) const { return 6 * T + t; }
  int zeta() const { return 7 * T; }
  int psi(int t) const { return 7 * T + 1 + t; }
  int n(bool with_psi) const { return with_psi ? 8 * T + 1 : 7 * T + 1; }
};

CbsProblem build_impl(const UserAggregate& users, const AggregateBelief* belief,
                      const ChanceConfig* chance, const BatterySpec& battery,
                      const TariffBook& tariffs, long h, const HorizonConfig& cfg,
                      double e_init) {
  cfg.validate();
  battery.validate();
  const bool cc = belief != nullptr;
  const int T = cfg.intervals_per_horizon;
  if (users.net.size() != T) throw std::invalid_argument("cbs: horizon window mismatch");
  tariffs.validate(h + T - 1);
  if (cc) {
    chance->validate();
    if (belief->mu.size() != T || belief->sigma.size() != T) {
      throw std::invalid_argument("cbs: belief window mismatch");
    }
  }
  const double dt = cfg.interval_hours;
  const double p_lim = battery.power_limit_kw();

  CbsProblem out;
  out.horizon = h;
  out.intervals = T;
  out.dt = dt;
  out.chance_constrained = cc;
  out.zeta_user = users.net.maxCoeff();

  const Layout L{T};
  const int n = L.n(!cc);
  qp::QuadraticProgram& p = out.program;
  p.q_matrix.resize(n, n);  // objective is linear
  p.c_vector = Eigen::VectorXd::Zero(n);
  p.lower = Eigen::VectorXd::Constant(n, 0.0);
  p.upper = Eigen::VectorXd::Constant(n, qp::kInf);

  double big_m = std::max(p_lim * dt, users.net.cwiseAbs().maxCoeff());
  big_m = 2.0 * std::max(big_m, 1e-3);
  p.big_m = big_m;

  const double q1 = cc ? gp::gaussian_quantile(chance->eta1) : 0.0;
  const double q2 = cc ? gp::gaussian_quantile(chance->eta2) : 0.0;
  const double q3 = cc ? gp::gaussian_quantile(chance->eta3) : 0.0;

  std::vector<Eigen::Triplet<double>> eq, in;
  std::vector<double> eq_rhs, in_rhs;

  for (int t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(h - 1 + t);
    p.c_vector[L.up(t)] += tariffs.rt_price[k];
    p.c_vector[L.ug(t)] += tariffs.grid_charge;
    p.c_vector[L.pch(t)] += tariffs.opex * dt;

    p.lower[L.e(t)] = battery.soc_min * battery.capacity_kwh;
    p.upper[L.e(t)] = battery.soc_max * battery.capacity_kwh;
    p.upper[L.pch(t)] = p_lim;
    p.upper[L.pdis(t)] = p_lim;
    p.lower[L.p(t)] = -p_lim;
    p.upper[L.p(t)] = p_lim;
    if (cc) p.upper[L.un(t)] = 0.0;  // removed by the reformulation

    // state-of-charge recursion E_t = E_{t-1} + (p_ch - p_dis / eff) dt
    const int soc = static_cast<int>(eq_rhs.size());
    eq.emplace_back(soc, L.e(t), 1.0);
    if (t > 0) eq.emplace_back(soc, L.e(t - 1), -1.0);
    eq.emplace_back(soc, L.pch(t), -dt);
    eq.emplace_back(soc, L.pdis(t), dt / battery.efficiency);
    eq_rhs.push_back(t == 0 ? e_init : 0.0);

    // dispatch power split
    const int split = static_cast<int>(eq_rhs.size());
    eq.emplace_back(split, L.p(t), 1.0);
    eq.emplace_back(split, L.pch(t), -1.0);
    eq.emplace_back(split, L.pdis(t), 1.0);
    eq_rhs.push_back(0.0);

    // peak epigraph zeta >= up_t
    const int peak = static_cast<int>(in_rhs.size());
    in.emplace_back(peak, L.up(t), 1.0);
    in.emplace_back(peak, L.zeta(), -1.0);
    in_rhs.push_back(0.0);

    if (!cc) {
      // community balance: up - un - P dt = user net
      const int bal = static_cast<int>(eq_rhs.size());
      eq.emplace_back(bal, L.up(t), 1.0);
      eq.emplace_back(bal, L.un(t), -1.0);
      eq.emplace_back(bal, L.p(t), -dt);
      eq_rhs.push_back(users.net[t]);

      // Complementarity of up/un. Simultaneous imports and exports are only
      // attractive at negative wholesale prices; elsewhere the optimum is
      // complementary on its own and no binary is spent. Tight per-interval
      // bounds: up <= max(0, net) + P dt, un <= max(0, -net) + P dt.
      if (tariffs.rt_price[k] < -1e-12) {
        const double m_up = std::max(0.0, users.net[t]) + p_lim * dt + 1e-6;
        const double m_un = std::max(0.0, -users.net[t]) + p_lim * dt + 1e-6;
        const int cp = static_cast<int>(in_rhs.size());
        in.emplace_back(cp, L.up(t), 1.0);
        in.emplace_back(cp, L.psi(t), m_up);
        in_rhs.push_back(m_up);
        const int cn = static_cast<int>(in_rhs.size());
        in.emplace_back(cn, L.un(t), 1.0);
        in.emplace_back(cn, L.psi(t), -m_un);
        in_rhs.push_back(0.0);
        p.upper[L.psi(t)] = 1.0;
        p.binary_indices.push_back(L.psi(t));
      }

      // grid import for charging: ug >= p_ch dt - user exports
      const int gi = static_cast<int>(in_rhs.size());
      in.emplace_back(gi, L.pch(t), dt);
      in.emplace_back(gi, L.ug(t), -1.0);
      in_rhs.push_back(users.neg[t]);
    } else {
      const double buffer1 = belief->mu[t] + belief->sigma[t] * q1;
      const double buffer3 = belief->mu[t] + belief->sigma[t] * q3;
      const double buffer2 = belief->mu[t] + belief->sigma[t] * q2;

      // up >= user net + buffer1 + P dt
      const int lo = static_cast<int>(in_rhs.size());
      in.emplace_back(lo, L.up(t), -1.0);
      in.emplace_back(lo, L.p(t), dt);
      in_rhs.push_back(-(users.net[t] + buffer1));

      // cap: up <= user positive demand + buffer3 + P dt
      const int hi = static_cast<int>(in_rhs.size());
      in.emplace_back(hi, L.up(t), 1.0);
      in.emplace_back(hi, L.p(t), -dt);
      in_rhs.push_back(users.pos[t] + buffer3);

      // ug >= p_ch dt - user exports + buffer2
      const int gi = static_cast<int>(in_rhs.size());
      in.emplace_back(gi, L.pch(t), dt);
      in.emplace_back(gi, L.ug(t), -1.0);
      in_rhs.push_back(users.neg[t] - buffer2);
    }
  }

  // horizon peak incentive measured against the user-only peak
  p.c_vector[L.zeta()] += tariffs.peak_incentive;
  out.objective_constant = -tariffs.peak_incentive * out.zeta_user;

  p.eq_matrix.resize(static_cast<int>(eq_rhs.size()), n);
  p.eq_matrix.setFromTriplets(eq.begin(), eq.end());
  p.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<long>(eq_rhs.size()));
  p.ineq_matrix.resize(static_cast<int>(in_rhs.size()), n);
  p.ineq_matrix.setFromTriplets(in.begin(), in.end());
  p.ineq_rhs = Eigen::Map<Eigen::VectorXd>(in_rhs.data(), static_cast<long>(in_rhs.size()));
  return out;
}

}  // namespace

CbsProblem build_deterministic(const UserAggregate& users, const BatterySpec& battery,
                               const TariffBook& tariffs, long h, const HorizonConfig& cfg,
                               double e_init) {
  return build_impl(users, nullptr, nullptr, battery, tariffs, h, cfg, e_init);
}

CbsProblem build_chance_constrained(const UserAggregate& users, const AggregateBelief& belief,
                                    const ChanceConfig& chance, const BatterySpec& battery,
                                    const TariffBook& tariffs, long h, const HorizonConfig& cfg,
                                    double e_init) {
  return build_impl(users, &belief, &chance, battery, tariffs, h, cfg, e_init);
}

CbsHorizonPlan solve_cbs_horizon(const CbsProblem& problem, const BatterySpec& battery,
                                 const qp::SolverOptions& opts) {
  const int T = problem.intervals;
  const Layout L{T};
  qp::SolveResult res = qp::solve_with_binaries(problem.program, opts);
  if (res.status != qp::SolveStatus::optimal) {
    throw std::runtime_error(std::string("solve_cbs_horizon: solver returned ") +
                             qp::to_string(res.status) + " at horizon " +
                             std::to_string(problem.horizon));
  }
  CbsHorizonPlan plan;
  plan.energy.resize(T);
  plan.p_ch.resize(T);
  plan.p_dis.resize(T);
  plan.p_net.resize(T);
  plan.up.resize(T);
  plan.un.resize(T);
  plan.u_grid.resize(T);
  for (int t = 0; t < T; ++t) {
    plan.energy[t] = res.x[L.e(t)];
    plan.p_ch[t] = res.x[L.pch(t)];
    plan.p_dis[t] = res.x[L.pdis(t)];
    plan.p_net[t] = res.x[L.p(t)];
    plan.up[t] = res.x[L.up(t)];
    plan.un[t] = res.x[L.un(t)];
    plan.u_grid[t] = res.x[L.ug(t)];
    if (plan.up[t] < 1e-9) plan.up[t] = 0.0;
    if (plan.un[t] < 1e-9) plan.un[t] = 0.0;
    if (plan.u_grid[t] < 1e-9) plan.u_grid[t] = 0.0;
  }
  plan.zeta_local = res.x[L.zeta()];
  plan.zeta_user = problem.zeta_user;
  plan.objective = problem.program.objective_value(res.x) + problem.objective_constant;
  plan.iterations = res.iterations;
  plan.nodes = res.nodes_explored;

  // simultaneous charge/discharge is penalized by the opex term and should
  // not survive optimization; shift any overlap into net power and redo the
  // energy recursion, keeping the change only if it stays inside the SoC box
  double overlap = 0.0;
  for (int t = 0; t < T; ++t) overlap = std::max(overlap, std::min(plan.p_ch[t], plan.p_dis[t]));
  if (overlap > 1e-7) {
    Eigen::VectorXd pch = plan.p_ch, pdis = plan.p_dis, energy = plan.energy;
    double e = plan.energy[0] -
               (plan.p_ch[0] - plan.p_dis[0] / battery.efficiency) * problem.dt;  // e_init
    bool ok = true;
    for (int t = 0; t < T; ++t) {
      const double o = std::min(pch[t], pdis[t]);
      pch[t] -= o;
      pdis[t] -= o;
      e += (pch[t] - pdis[t] / battery.efficiency) * problem.dt;
      energy[t] = e;
      if (e < battery.soc_min * battery.capacity_kwh - 1e-6 ||
          e > battery.soc_max * battery.capacity_kwh + 1e-6) {
        ok = false;
        break;
      }
    }
    if (ok) {
      plan.p_ch = pch;
      plan.p_dis = pdis;
      plan.energy = energy;
      plan.repair_applied = true;
    }
  }
  return plan;
}

CbsHorizonPlan solve_chance_with_ladder(const UserAggregate& users,
                                        const AggregateBelief& belief, ChanceConfig chance,
                                        const BatterySpec& battery, const TariffBook& tariffs,
                                        long h, const HorizonConfig& cfg, double e_init,
                                        const qp::SolverOptions& opts) {
  for (int step = 0; step <= 3; ++step) {
    try {
      CbsProblem prob =
          build_chance_constrained(users, belief, chance, battery, tariffs, h, cfg, e_init);
      CbsHorizonPlan plan = solve_cbs_horizon(prob, battery, opts);
      plan.eta_relaxations = step;
      return plan;
    } catch (const std::runtime_error&) {
      if (step == 3) throw;
      chance.eta1 = std::max(chance.eta1 - 0.02, 0.5 + 1e-9);
      chance.eta2 = std::max(chance.eta2 - 0.02, 0.5 + 1e-9);
      chance.eta3 = std::max(chance.eta3 - 0.02, 0.5 + 1e-9);
    }
  }
  throw std::runtime_error("solve_chance_with_ladder: unreachable");
}

}  // namespace cbsim
