#pragma once

#include <optional>
#include <stdexcept>

/// Power balance of the emulated lab segment: one PV inverter, one battery
/// inverter and one load bank behind a distribution transformer.
///
/// Sign convention is consumption-positive at the bus: battery charging is
/// positive, transformer import from the overlaying grid is positive.
namespace cpt::grid {

class InputDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PvState {
  double available_kw = 0.0;
  std::optional<double> limit_kw;  ///< absent = unlimited
  double rated_kw = 36.0;
  double output_kw = 0.0;
};

struct BssState {
  double capacity_kwh = 22.0;
  double rated_kw = 15.0;
  double soc_kwh = 11.0;
  double setpoint_kw = 0.0;  ///< > 0 charging
  double actual_kw = 0.0;
  double efficiency = 1.0;

  double soc_pct() const { return capacity_kwh > 0.0 ? soc_kwh / capacity_kwh * 100.0 : 0.0; }
};

struct LoadState {
  double demand_kw = 0.0;
  double rated_kw = 20.0;
};

struct BusBalance {
  double transformer_kw = 0.0;  ///< > 0 import
  double transformer_rated_kva = 630.0;

  /// Unity power factor is assumed, so apparent power equals |P|.
  bool overloaded() const;
};

/// Curtails available power to the nameplate rating and the active limit.
/// The limit is carried over unchanged.
PvState step_pv(PvState state);

/// Forward-Euler SOC update over dt_s. The setpoint is clamped to the rated
/// power and to the power that keeps SOC inside [0, capacity] for this step;
/// when that SOC clamp binds, SOC lands exactly on the bound.
BssState step_bss(BssState state, double dt_s);

/// Load demand clamped to the bank rating.
LoadState step_load(LoadState state, double requested_kw);

/// transformer = demand + battery - pv
BusBalance bus_balance(const LoadState& load, const PvState& pv, const BssState& bss,
                       double transformer_rated_kva = 630.0);

}  // namespace cpt::grid
