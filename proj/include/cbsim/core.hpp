#pragma once

#include <utility>
#include <vector>

namespace cbsim {

/// Time base of the receding-horizon simulation. One horizon step is taken
/// per interval, so the horizon count equals days * intervals_per_horizon.
/// All indices (day, interval-of-day, horizon) are 1-based.
struct HorizonConfig {
  int intervals_per_horizon = 48;  // lookahead length T
  int rebound_intervals = 12;      // rebound window T_RB <= T
  int total_days = 1;              // simulated days D
  double interval_hours = 0.5;     // dt

  int total_horizons() const { return total_days * intervals_per_horizon; }
  int interval_of_day(long h) const {
    return static_cast<int>((h - 1) % intervals_per_horizon) + 1;
  }
  void validate() const;
};

/// h = (d-1)*T + t. Bijective over 1<=d<=D, 1<=t<=T.
long reindex(int day, int interval, const HorizonConfig& cfg);
std::pair<int, int> reindex_inverse(long h, const HorizonConfig& cfg);

/// Price and charge book. rt_price, import_charge and export_charge are
/// absolute-horizon series (long enough to cover every lookahead window);
/// the remaining charges are flat scalars.
///   grid_charge      $/kWh on grid-sourced battery charging
///   peak_incentive   $/kWh of interval peak energy, accrued per day
///   fixed_charge     $/kW/day on battery power capacity
///   credit_charge    $/kWh of solar credits spent
///   credit_refund    $/kWh of solar credits remaining at settlement
///   opex             $/kWh of battery charging throughput
struct TariffBook {
  std::vector<double> rt_price;       // may be negative
  std::vector<double> import_charge;  // non-negative
  std::vector<double> export_charge;  // sign-configurable
  double grid_charge = 0.027;
  double peak_incentive = 0.60;
  double fixed_charge = 0.31;
  double credit_charge = 0.10;
  double credit_refund = 0.05;
  double opex = 0.022;

  void validate(long min_length) const;
};

/// lambda_ref for horizon h: max of rt_price + import_charge over the
/// lookahead window [h, h+T-1].
double price_reference(long h, const TariffBook& tariffs, const HorizonConfig& cfg);

struct BatterySpec {
  double capacity_kwh = 100.0;
  double c_rate = 0.5;        // 1/h
  double efficiency = 0.90;   // applied on discharge
  double soc_min = 0.0;
  double soc_max = 1.0;
  double initial_energy_kwh = 0.0;
  double unit_cost = 800.0;   // $/kWh
  long lifetime_intervals = 3650L * 48;

  double power_limit_kw() const { return capacity_kwh * c_rate; }
  void validate() const;
};

}  // namespace cbsim
