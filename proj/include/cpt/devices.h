#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpt/cosim.h"
#include "cpt/grid_model.h"
#include "cpt/modbus.h"
#include "cpt/netem.h"
#include "cpt/profiles.h"

/// Scheduler-facing wrappers around the grid model: every field device is a
/// Modbus TCP server on its own host, the profile player feeds the physics.
namespace cpt::devices {

namespace sig {
inline constexpr const char* profile_load = "profile.load_kw";
inline constexpr const char* profile_pv = "profile.pv_available_kw";
inline constexpr const char* pv_output = "pv.output_kw";
inline constexpr const char* pv_available = "pv.available_kw";
inline constexpr const char* pv_limit = "pv.limit_kw";
inline constexpr const char* bss_actual = "bss.actual_kw";
inline constexpr const char* bss_setpoint = "bss.setpoint_kw";
inline constexpr const char* bss_soc_kwh = "bss.soc_kwh";
inline constexpr const char* bss_soc_pct = "bss.soc_pct";
inline constexpr const char* load_demand = "load.demand_kw";
inline constexpr const char* transformer = "meter.transformer_kw";
}  // namespace sig

/// Publishes both profiles, sampled at the current step time.
class ProfilePlayer {
 public:
  ProfilePlayer(profiles::TimeSeriesProfile load, profiles::TimeSeriesProfile pv, double epoch_s);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);

 private:
  profiles::TimeSeriesProfile load_;
  profiles::TimeSeriesProfile pv_;
  double epoch_s_;
};

struct ServerStats {
  std::uint64_t requests = 0;
  std::uint64_t exceptions = 0;
  std::uint64_t malformed = 0;
};

/// Host plus register map. Requests are served before the physics step, so
/// a reading reflects the state at the end of the previous step.
class ModbusDevice {
 public:
  ModbusDevice(net::Host host, modbus::RegisterMap map);

  const net::Host& host() const { return host_; }
  const modbus::RegisterMap& registers() const { return map_; }
  const ServerStats& server_stats() const { return stats_; }

 protected:
  /// Serves every request delivered this step; returns the accepted writes.
  std::vector<modbus::RegisterWrite> serve_frames(cosim::StepContext& ctx);
  void flush(cosim::StepContext& ctx);

  net::Host host_;
  modbus::RegisterMap map_;
  ServerStats stats_;
};

class PvInverter : public ModbusDevice {
 public:
  PvInverter(net::Host host, grid::PvState initial);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);
  const grid::PvState& state() const { return state_; }

 private:
  grid::PvState state_;
};

class BssInverter : public ModbusDevice {
 public:
  BssInverter(net::Host host, grid::BssState initial);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);
  const grid::BssState& state() const { return state_; }

 private:
  grid::BssState state_;
};

class LoadBank : public ModbusDevice {
 public:
  LoadBank(net::Host host, grid::LoadState initial);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);
  const grid::LoadState& state() const { return state_; }

 private:
  grid::LoadState state_;
};

/// Transformer meter. Measures the previous step's device outputs.
class Meter : public ModbusDevice {
 public:
  Meter(net::Host host, double transformer_rated_kva);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);
  double last_reading_kw() const { return reading_kw_; }

 private:
  double rated_kva_;
  double reading_kw_ = 0.0;
  bool overloaded_ = false;
};

}  // namespace cpt::devices
