#include "cpt/grid_model.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace cpt::grid {

bool BusBalance::overloaded() const
{
  return std::abs(transformer_kw) > transformer_rated_kva;
}

PvState step_pv(PvState state)
{
  if (!(state.available_kw >= 0.0) || !std::isfinite(state.available_kw)) {
    throw InputDomainError("PV available power must be finite and >= 0, got " +
                           std::to_string(state.available_kw));
  }
  double out = std::min(state.available_kw, state.rated_kw);
  if (state.limit_kw) {
    out = std::min(out, std::max(*state.limit_kw, 0.0));
  }
  state.output_kw = std::max(out, 0.0);
  return state;
}

BssState step_bss(BssState state, double dt_s)
{
  if (!(dt_s > 0.0)) {
    throw InputDomainError("battery step requires dt_s > 0");
  }
  if (state.soc_kwh < 0.0 || state.soc_kwh > state.capacity_kwh) {
    throw InputDomainError("battery SOC outside [0, capacity]");
  }
  if (!(state.efficiency > 0.0 && state.efficiency <= 1.0)) {
    throw InputDomainError("battery efficiency must be in (0, 1]");
  }

  const double dt_h = dt_s / 3600.0;
  const double eta = state.efficiency;
  double power = std::clamp(state.setpoint_kw, -state.rated_kw, state.rated_kw);

  if (power > 0.0) {
    const double headroom_kw = (state.capacity_kwh - state.soc_kwh) / (eta * dt_h);
    if (power >= headroom_kw) {
      power = headroom_kw;
      state.soc_kwh = state.capacity_kwh;
    } else {
      state.soc_kwh += power * eta * dt_h;
    }
  } else if (power < 0.0) {
    const double available_kw = state.soc_kwh * eta / dt_h;
    if (-power >= available_kw) {
      power = -available_kw;
      state.soc_kwh = 0.0;
    } else {
      state.soc_kwh += power * dt_h / eta;
    }
  }

  state.soc_kwh = std::clamp(state.soc_kwh, 0.0, state.capacity_kwh);
  state.actual_kw = power;
  return state;
}

LoadState step_load(LoadState state, double requested_kw)
{
  if (!std::isfinite(requested_kw)) {
    throw InputDomainError("load demand must be finite");
  }
  state.demand_kw = std::clamp(requested_kw, 0.0, state.rated_kw);
  return state;
}

BusBalance bus_balance(const LoadState& load, const PvState& pv, const BssState& bss,
                       double transformer_rated_kva)
{
  return BusBalance{load.demand_kw + bss.actual_kw - pv.output_kw, transformer_rated_kva};
}

}  // namespace cpt::grid
