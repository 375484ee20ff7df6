#pragma once

#include "cbsim/cbs.hpp"
#include "cbsim/core.hpp"
#include "cbsim/enduser.hpp"
#include "cbsim/gp.hpp"
#include "cbsim/randomness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cbsim {

/// What the operator model accounts for. Realized user behaviour always
/// carries every enabled irrationality mechanism; the mode only changes the
/// information the CBS schedule is optimized against.
///   la        users modelled without discounting, deterministic CBS
///   la_ti     reported (discounted) plans, deterministic CBS
///   la_ti_br  reported plans plus GP beliefs, chance-constrained CBS
enum class OperatorMode { la, la_ti, la_ti_br };

const char* to_string(OperatorMode m);
OperatorMode mode_from_string(const std::string& s);

/// Realized end-user behaviour switches (diagnostics; defaults on).
struct BehaviourFlags {
  bool time_inconsistency = true;
  bool randomness = true;
};

struct Scenario {
  HorizonConfig horizon;
  TariffBook tariffs;
  BatterySpec battery;
  std::vector<UserProfile> users;
  std::vector<RandomnessModel> randomness;  // one per user
  ChanceConfig chance;
  OperatorMode mode = OperatorMode::la_ti_br;
  BehaviourFlags behaviour;
  std::uint64_t seed = 1;
  int gp_trailing_days = 7;

  void validate() const;
};

struct UserRecord {
  double x_hat = 0;      // expectation at the binding interval
  double x_star = 0;     // committed consumption
  double x_rnd = 0;      // drawn randomness (raw)
  double x_tilde = 0;    // realized consumption (clamped at zero)
  double x_pos = 0, x_neg = 0, x_grid = 0, g_spill = 0, delta = 0;
  double credits = 0;    // stored credits after the binding interval
  double carryover = 0;  // deviation carryover used when planning
  double plan_ahead1 = 0, plan_ahead2 = 0;  // this horizon's plan for h+1, h+2
  double belief_mu = 0, belief_sd = 0;      // operator belief at binding (BR mode)
  bool clamped = false;
};

struct CbsRecord {
  double p_net = 0, p_ch = 0, p_dis = 0, energy = 0;
  double up = 0, un = 0, u_grid = 0;
  double zeta_local = 0, zeta_user = 0;
  double objective = 0;
  int iterations = 0, nodes = 0, eta_relaxations = 0;
};

struct SettlementRecord {
  double realized_net = 0;    // community net incl. battery energy (kWh)
  double import_energy = 0;   // committed + shortfall purchases (kWh)
  double export_energy = 0;   // spilled surplus, zero revenue (kWh)
  double shortfall = 0;       // bought at the spot price beyond commitment
  double surplus = 0;         // committed but unused purchases
  double extra_cost = 0;      // rt price * shortfall ($)
};

struct HorizonRecord {
  long h = 0;
  std::vector<UserRecord> users;
  CbsRecord cbs;
  SettlementRecord settlement;
};

struct ScenarioLedger {
  HorizonConfig horizon;
  OperatorMode mode = OperatorMode::la;
  std::uint64_t seed = 0;
  std::vector<std::string> user_ids;
  std::vector<std::uint8_t> prosumer;
  std::vector<HorizonRecord> horizons;
  long clamp_events = 0;
  long eta_relaxations = 0;
  long carryover_clamps = 0;

  int user_count() const { return static_cast<int>(user_ids.size()); }
  void validate() const;
};

/// x_tilde = x_star + x_rnd, clamped at zero (consumption cannot be
/// negative); the clamp is reported through the flag.
double realize_consumption(double x_star, double x_rnd, bool* clamped = nullptr);

/// Ex-post balance of one horizon: shortfalls against the committed
/// community import are bought at the wholesale price, surpluses are
/// exported at zero revenue.
SettlementRecord settle_horizon(const HorizonRecord& record, double rt_price, double dt);

/// Run the receding-horizon loop over every horizon: solve users, build the
/// operator's view, schedule the CBS, realize randomness, settle and chain
/// the carryover/credit/state-of-charge state.
ScenarioLedger run_simulation(const Scenario& scenario);

}  // namespace cbsim
