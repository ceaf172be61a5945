#pragma once

#include <cstdint>
#include <optional>

#include "cpt/cosim.h"
#include "cpt/modbus_client.h"
#include "cpt/netem.h"

/// The EMS / DSR platform: polls the transformer meter and the inverters
/// every control period and nulls the measured transformer power with the
/// battery.
namespace cpt::ems {

struct ControlPolicy {
  double period_s = 5.0;
  double deadband_kw = 0.1;
  double bss_rated_kw = 15.0;
  bool manages_pv_limit = false;  ///< clear PV limits it finds (fixed variant)
  double timeout_s = 5.0;         ///< per Modbus request

  /// Throws std::invalid_argument if the policy cannot run at this step size.
  void validate(double step_s) const;
};

struct SetpointCommand {
  double setpoint_kw = 0.0;       ///< as representable in the register
  std::uint16_t register_value = 0;
};

/// new = previous - meter, clamped to the rated power, when |meter| exceeds
/// the deadband. A full battery is not asked to charge further and an empty
/// one not to discharge further.
std::optional<SetpointCommand> control_step(double meter_kw, double bss_soc_pct,
                                            double previous_setpoint_kw,
                                            const ControlPolicy& policy);

struct Targets {
  net::Ipv4Addr meter;
  net::Ipv4Addr pv;
  net::Ipv4Addr bss;
  std::uint8_t meter_unit = 1;
  std::uint8_t pv_unit = 1;
  std::uint8_t bss_unit = 1;
};

struct Measurements {
  std::optional<double> transformer_kw;
  std::optional<double> bss_actual_kw;
  std::optional<double> bss_soc_pct;
  std::optional<double> pv_output_kw;
  std::optional<std::uint16_t> pv_limit_raw;
};

struct EmsStats {
  std::uint64_t cycles = 0;
  std::uint64_t cycles_skipped = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t pv_limit_writes = 0;
  modbus::ClientStats client;
};

class EmsController {
 public:
  EmsController(net::Host host, Targets targets, ControlPolicy policy, double step_s);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);

  /// Issues the three reads (meter, battery, PV) of one control period.
  void poll_cycle(std::int64_t step);

  const EmsStats& stats() const;
  double last_setpoint_kw() const { return last_setpoint_kw_; }
  const Measurements& last_measurements() const { return cycle_.values; }
  const net::Host& host() const { return host_; }

 private:
  struct Cycle {
    std::uint64_t id = 0;
    Measurements values;
    bool decided = true;
    bool failed = false;
  };

  void handle_response(const modbus::Completed& done, cosim::StepContext& ctx);
  void maybe_decide(cosim::StepContext& ctx);

  net::Host host_;
  Targets targets_;
  ControlPolicy policy_;
  std::int64_t period_steps_;
  modbus::Client client_;
  Cycle cycle_;
  double last_setpoint_kw_ = 0.0;
  mutable EmsStats stats_;
};

}  // namespace cpt::ems
