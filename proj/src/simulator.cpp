#include "cbsim/simulator.hpp"

#include "cbsim/parallel.hpp"
#include "cbsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbsim {

const char* to_string(OperatorMode m) {
  switch (m) {
    case OperatorMode::la: return "la";
    case OperatorMode::la_ti: return "la+ti";
    case OperatorMode::la_ti_br: return "la+ti+br";
  }
  return "unknown";
}

OperatorMode mode_from_string(const std::string& s) {
  if (s == "la") return OperatorMode::la;
  if (s == "la+ti") return OperatorMode::la_ti;
  if (s == "la+ti+br") return OperatorMode::la_ti_br;
  throw std::invalid_argument("unknown operator mode '" + s + "' (la | la+ti | la+ti+br)");
}

void Scenario::validate() const {
  horizon.validate();
  battery.validate();
  const long H = horizon.total_horizons();
  const long needed = H + horizon.intervals_per_horizon - 1;
  tariffs.validate(needed);
  if (users.empty()) throw std::invalid_argument("Scenario: no users");
  if (randomness.size() != users.size()) {
    throw std::invalid_argument("Scenario: one randomness model per user required");
  }
  for (const auto& u : users) u.validate(needed);
  for (const auto& m : randomness) {
    m.validate();
    if (m.intervals_per_day() != horizon.intervals_per_horizon) {
      throw std::invalid_argument("Scenario: randomness model day length mismatch");
    }
  }
  chance.validate();
  if (gp_trailing_days < 1) throw std::invalid_argument("Scenario: gp_trailing_days < 1");
}

void ScenarioLedger::validate() const {
  if (prosumer.size() != user_ids.size()) {
    throw std::invalid_argument("ScenarioLedger: prosumer flags mismatch");
  }
  for (const auto& rec : horizons) {
    if (static_cast<int>(rec.users.size()) != user_count()) {
      throw std::invalid_argument("ScenarioLedger: user record count mismatch");
    }
  }
}

double realize_consumption(double x_star, double x_rnd, bool* clamped) {
  const double raw = x_star + x_rnd;
  if (clamped) *clamped = raw < 0.0;
  return std::max(raw, 0.0);
}

SettlementRecord settle_horizon(const HorizonRecord& record, double rt_price, double dt) {
  SettlementRecord s;
  double net = record.cbs.p_net * dt;
  for (const auto& u : record.users) {
    net += (u.x_pos - u.x_neg) + (u.x_tilde - u.x_star);
  }
  s.realized_net = net;
  const double required = std::max(net, 0.0);
  s.shortfall = std::max(required - record.cbs.up, 0.0);
  s.surplus = std::max(record.cbs.up - required, 0.0);
  s.import_energy = record.cbs.up + s.shortfall;
  s.export_energy = s.import_energy - net;  // balances exactly
  s.extra_cost = rt_price * s.shortfall;
  return s;
}

ScenarioLedger run_simulation(const Scenario& scenario) {
  scenario.validate();
  const HorizonConfig& cfg = scenario.horizon;
  const int T = cfg.intervals_per_horizon;
  const long H = cfg.total_horizons();
  const int N = static_cast<int>(scenario.users.size());
  const double dt = cfg.interval_hours;
  const bool la_view = scenario.mode == OperatorMode::la;
  const bool chance_mode = scenario.mode == OperatorMode::la_ti_br;

  ScenarioLedger ledger;
  ledger.horizon = cfg;
  ledger.mode = scenario.mode;
  ledger.seed = scenario.seed;
  for (const auto& u : scenario.users) {
    ledger.user_ids.push_back(u.id);
    ledger.prosumer.push_back(u.is_prosumer ? 1 : 0);
  }
  ledger.horizons.reserve(static_cast<std::size_t>(H));

  // per-user chained state
  std::vector<double> carryover(static_cast<std::size_t>(N), 0.0);
  std::vector<double> credit_state(static_cast<std::size_t>(N), 0.0);
  std::vector<gp::RandomnessTracker> trackers;
  std::vector<Rng> rngs;
  trackers.reserve(static_cast<std::size_t>(N));
  Rng master(scenario.seed);
  for (int n = 0; n < N; ++n) {
    credit_state[static_cast<std::size_t>(n)] = scenario.users[static_cast<std::size_t>(n)].credit_init;
    trackers.emplace_back(scenario.randomness[static_cast<std::size_t>(n)],
                          scenario.gp_trailing_days);
    rngs.push_back(master.child(static_cast<std::uint64_t>(n) + 1));
  }
  double e_init = scenario.battery.initial_energy_kwh;

  std::vector<UserHorizonPlan> plans_true(static_cast<std::size_t>(N));
  std::vector<UserHorizonPlan> plans_view(static_cast<std::size_t>(N));
  std::vector<int> clamp_flags(static_cast<std::size_t>(N));
  std::vector<std::pair<double, double>> binding_beliefs(static_cast<std::size_t>(N));
  std::vector<Eigen::VectorXd> belief_mu(static_cast<std::size_t>(N)),
      belief_var(static_cast<std::size_t>(N));
  std::vector<std::string> failures(static_cast<std::size_t>(N));

  for (long h = 1; h <= H; ++h) {
    std::fill(clamp_flags.begin(), clamp_flags.end(), 0);
    for (auto& f : failures) f.clear();

    // 1) per-user solves and operator beliefs (independent across users)
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
      try {
        const UserProfile& user = scenario.users[n];
        UserProfile realized = user;  // kappa honoured per behaviour flags
        if (!scenario.behaviour.time_inconsistency) realized.kappa = 0.0;
        realized.credit_init = credit_state[n];
        UserProblem prob = build_user_problem(realized, scenario.tariffs, h, carryover[n], cfg);
        if (prob.carryover_clamped) clamp_flags[n] |= 2;
        plans_true[n] = solve_user_horizon(prob);

        if (la_view && realized.kappa > 0.0) {
          UserProblem view =
              build_user_problem(realized, scenario.tariffs, h, carryover[n], cfg, 0.0);
          plans_view[n] = solve_user_horizon(view);
        } else {
          plans_view[n] = plans_true[n];
        }

        if (chance_mode) {
          gp::PosteriorBelief belief = trackers[n].lookahead(h, T);
          belief_mu[n].resize(T);
          belief_var[n].resize(T);
          for (int t = 0; t < T; ++t) {
            const auto [mu, sd] = gp::marginal(belief, t);
            belief_mu[n][t] = mu;
            belief_var[n][t] = sd * sd;
          }
          binding_beliefs[n] = {belief_mu[n][0], std::sqrt(belief_var[n][0])};
        }
      } catch (const std::exception& e) {
        failures[n] = e.what();
      }
    });
    for (const auto& f : failures) {
      if (!f.empty()) {
        throw std::runtime_error("run_simulation: horizon " + std::to_string(h) + ": " + f);
      }
    }

    // 2) CBS schedule against the operator's view
    UserAggregate agg = aggregate_plans(plans_view);
    CbsHorizonPlan cbs_plan;
    if (chance_mode) {
      AggregateBelief agg_belief;
      agg_belief.mu = Eigen::VectorXd::Zero(T);
      agg_belief.sigma = Eigen::VectorXd::Zero(T);
      for (int n = 0; n < N; ++n) {
        agg_belief.mu += belief_mu[static_cast<std::size_t>(n)];
        agg_belief.sigma += belief_var[static_cast<std::size_t>(n)];
      }
      agg_belief.sigma = agg_belief.sigma.cwiseMax(0.0).cwiseSqrt();
      cbs_plan = solve_chance_with_ladder(agg, agg_belief, scenario.chance, scenario.battery,
                                          scenario.tariffs, h, cfg, e_init);
      ledger.eta_relaxations += cbs_plan.eta_relaxations;
    } else {
      CbsProblem prob =
          build_deterministic(agg, scenario.battery, scenario.tariffs, h, cfg, e_init);
      cbs_plan = solve_cbs_horizon(prob, scenario.battery);
    }

    // 3) realize randomness at the binding interval (one draw per user)
    HorizonRecord rec;
    rec.h = h;
    rec.users.resize(static_cast<std::size_t>(N));
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
      UserRecord& ur = rec.users[n];
      const UserHorizonPlan& plan = plans_true[n];
      ur.x_hat = scenario.users[n].expected[static_cast<std::size_t>(h - 1)];
      ur.x_star = plan.x[0];
      ur.x_rnd = scenario.behaviour.randomness ? trackers[n].draw_binding(h, rngs[n]) : 0.0;
      bool clamped = false;
      ur.x_tilde = realize_consumption(ur.x_star, ur.x_rnd, &clamped);
      if (clamped) clamp_flags[n] |= 1;
      ur.x_pos = plan.x_pos[0];
      ur.x_neg = plan.x_neg[0];
      ur.x_grid = plan.x_grid[0];
      ur.g_spill = plan.g_spill[0];
      ur.delta = plan.delta[0];
      ur.credits = plan.credits[0];
      ur.carryover = carryover[n];
      ur.plan_ahead1 = T > 1 ? plan.x[1] : plan.x[0];
      ur.plan_ahead2 = T > 2 ? plan.x[2] : ur.plan_ahead1;
      if (chance_mode) {
        ur.belief_mu = binding_beliefs[n].first;
        ur.belief_sd = binding_beliefs[n].second;
      }
      ur.clamped = (clamp_flags[n] & 1) != 0;
    });

    rec.cbs.p_net = cbs_plan.p_net[0];
    rec.cbs.p_ch = cbs_plan.p_ch[0];
    rec.cbs.p_dis = cbs_plan.p_dis[0];
    rec.cbs.energy = cbs_plan.energy[0];
    rec.cbs.up = cbs_plan.up[0];
    rec.cbs.un = cbs_plan.un[0];
    rec.cbs.u_grid = cbs_plan.u_grid[0];
    rec.cbs.zeta_local = cbs_plan.zeta_local;
    rec.cbs.zeta_user = cbs_plan.zeta_user;
    rec.cbs.objective = cbs_plan.objective;
    rec.cbs.iterations = cbs_plan.iterations;
    rec.cbs.nodes = cbs_plan.nodes;
    rec.cbs.eta_relaxations = cbs_plan.eta_relaxations;

    // 4) settle and chain the state (single writer)
    rec.settlement =
        settle_horizon(rec, scenario.tariffs.rt_price[static_cast<std::size_t>(h - 1)], dt);
    for (int n = 0; n < N; ++n) {
      const auto k = static_cast<std::size_t>(n);
      if (clamp_flags[k] & 1) ++ledger.clamp_events;
      if (clamp_flags[k] & 2) ++ledger.carryover_clamps;
      carryover[k] =
          update_carryover(carryover[k], rec.users[k].x_hat, rec.users[k].x_star);
      if (rec.users[k].credits < -1e-6) {
        throw std::runtime_error("run_simulation: negative credit state at horizon " +
                                 std::to_string(h));
      }
      credit_state[k] = std::max(0.0, rec.users[k].credits);
    }
    e_init = cbs_plan.energy[0];
    ledger.horizons.push_back(std::move(rec));
  }
  return ledger;
}

}  // namespace cbsim
