#include "cbsim/core.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace cbsim {

void HorizonConfig::validate() const {
  if (intervals_per_horizon < 1) throw std::invalid_argument("HorizonConfig: T < 1");
  if (rebound_intervals < 1 || rebound_intervals > intervals_per_horizon) {
    throw std::invalid_argument("HorizonConfig: need 1 <= T_RB <= T");
  }
  if (total_days < 1) throw std::invalid_argument("HorizonConfig: D < 1");
  if (!(interval_hours > 0.0)) throw std::invalid_argument("HorizonConfig: dt <= 0");
}

long reindex(int day, int interval, const HorizonConfig& cfg) {
  if (day < 1 || day > cfg.total_days) {
    throw std::out_of_range("reindex: day " + std::to_string(day) + " outside [1," +
                            std::to_string(cfg.total_days) + "]");
  }
  if (interval < 1 || interval > cfg.intervals_per_horizon) {
    throw std::out_of_range("reindex: interval " + std::to_string(interval) +
                            " outside [1," + std::to_string(cfg.intervals_per_horizon) + "]");
  }
  return static_cast<long>(day - 1) * cfg.intervals_per_horizon + interval;
}

std::pair<int, int> reindex_inverse(long h, const HorizonConfig& cfg) {
  if (h < 1 || h > cfg.total_horizons()) {
    throw std::out_of_range("reindex_inverse: horizon " + std::to_string(h) +
                            " outside [1," + std::to_string(cfg.total_horizons()) + "]");
  }
  const int day = static_cast<int>((h - 1) / cfg.intervals_per_horizon) + 1;
  const int interval = static_cast<int>((h - 1) % cfg.intervals_per_horizon) + 1;
  return {day, interval};
}

void TariffBook::validate(long min_length) const {
  const auto check_len = [&](const std::vector<double>& s, const char* name) {
    if (static_cast<long>(s.size()) < min_length) {
      throw std::invalid_argument(std::string("TariffBook: ") + name +
                                  " shorter than required " + std::to_string(min_length));
    }
  };
  check_len(rt_price, "rt_price");
  check_len(import_charge, "import_charge");
  check_len(export_charge, "export_charge");
  for (double v : import_charge) {
    if (v < 0.0) throw std::invalid_argument("TariffBook: negative import_charge");
  }
  if (grid_charge < 0 || peak_incentive < 0 || fixed_charge < 0 || credit_charge < 0 ||
      credit_refund < 0 || opex < 0) {
    throw std::invalid_argument("TariffBook: flat charges must be non-negative");
  }
}

double price_reference(long h, const TariffBook& tariffs, const HorizonConfig& cfg) {
  const long last = h + cfg.intervals_per_horizon - 1;
  if (h < 1 || last > static_cast<long>(tariffs.rt_price.size()) ||
      last > static_cast<long>(tariffs.import_charge.size())) {
    throw std::out_of_range("price_reference: window [" + std::to_string(h) + "," +
                            std::to_string(last) + "] exceeds price series");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (long i = h; i <= last; ++i) {
    best = std::max(best, tariffs.rt_price[static_cast<std::size_t>(i - 1)] +
                              tariffs.import_charge[static_cast<std::size_t>(i - 1)]);
  }
  return best;
}

void BatterySpec::validate() const {
  if (!(capacity_kwh >= 0.0)) throw std::invalid_argument("BatterySpec: capacity < 0");
  if (!(c_rate >= 0.0)) throw std::invalid_argument("BatterySpec: c_rate < 0");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("BatterySpec: efficiency outside (0,1]");
  }
  if (!(0.0 <= soc_min && soc_min <= soc_max && soc_max <= 1.0)) {
    throw std::invalid_argument("BatterySpec: need 0 <= soc_min <= soc_max <= 1");
  }
  if (initial_energy_kwh < soc_min * capacity_kwh - 1e-9 ||
      initial_energy_kwh > soc_max * capacity_kwh + 1e-9) {
    throw std::invalid_argument("BatterySpec: initial energy outside SoC bounds");
  }
  if (lifetime_intervals < 1) throw std::invalid_argument("BatterySpec: lifetime < 1");
}

}  // namespace cbsim
