#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpt/cosim.h"
#include "cpt/modbus.h"
#include "cpt/modbus_client.h"
#include "cpt/netem.h"

/// Scripted adversary on the plant LAN: scan, role identification, ARP-spoof
/// MITM between the EMS and the two inverters, command manipulation.
namespace cpt::attack {

struct AttackPlan {
  double start_s = 11.5 * 3600.0;   ///< manipulation takes effect at the devices
  double end_s = 14.25 * 3600.0;
  double pv_limit_kw = 3.5;
  double bss_charge_kw = 14.0;
  double repoison_period_s = 10.0;
  double recon_lead_s = 60.0;       ///< scan this long before start

  /// Throws std::invalid_argument on an empty window, a negative PV limit or
  /// a charge command beyond the battery rating.
  void validate(double bss_rated_kw) const;
  bool active_at(double t_s) const { return t_s >= start_s && t_s < end_s; }
};

enum class Role { unknown, ems, pv, bss, load_bank, meter };

const char* to_string(Role role);
Role role_from_device_type(std::uint16_t type);

using RoleMap = std::map<net::Ipv4Addr, Role>;

enum class Stage { idle, scanning, identifying, prestage, mitm, grace, done };

const char* to_string(Stage stage);

struct ScanEntry {
  net::Ipv4Addr ip;
  net::MacAddr mac;
  bool operator==(const ScanEntry&) const = default;
};

/// What manipulate() rewrites: Modbus writes to the battery setpoint.
struct ManipulationRule {
  net::Ipv4Addr bss_ip;
  std::uint16_t setpoint_register = modbus::reg::bss_setpoint;
  std::uint16_t forced_value = 0;
};

/// Rewrites the setpoint carried by an EMS->BSS write (0x06 or 0x10) in
/// place, fixing up the checksums. Anything else, malformed frames included,
/// is left untouched. Returns true when the frame changed.
bool manipulate(net::EthernetFrame& frame, const ManipulationRule& rule);

struct AttackStats {
  std::size_t scan_requests = 0;
  std::size_t forged_arp = 0;
  std::size_t corrective_arp = 0;
  std::size_t forwarded = 0;
  std::size_t rewritten = 0;
  std::size_t injected = 0;
  std::size_t reinjected = 0;
  std::size_t consumed = 0;
  std::size_t dropped = 0;
  std::optional<std::int64_t> pv_limit_landing_step;
};

class Attacker {
 public:
  Attacker(net::Host host, AttackPlan plan, cosim::SimClock clock);

  cosim::SimulatorHandle handle() const;
  void step(cosim::StepContext& ctx);

  const std::vector<ScanEntry>& scan_results() const { return scan_; }
  const RoleMap& roles() const { return roles_; }
  Stage stage() const { return stage_; }
  const AttackStats& stats() const { return stats_; }
  const net::Host& host() const { return host_; }
  std::optional<net::Ipv4Addr> ip_of(Role role) const;

  std::int64_t start_step() const { return start_step_; }
  std::int64_t end_step() const { return end_step_; }

 private:
  struct Tracked {
    std::uint16_t address = 0;
    std::uint16_t quantity = 0;
  };

  void enter(Stage stage, cosim::StepContext& ctx, const std::string& why);
  void begin_scan();
  void finish_scan(cosim::StepContext& ctx);
  void finish_identification(cosim::StepContext& ctx);
  void poison(net::Ipv4Addr victim, net::Ipv4Addr claimed);
  void repair(net::Ipv4Addr victim, net::Ipv4Addr claimed);
  void poison_all();
  void repair_all();
  void inject(net::Ipv4Addr target, std::uint16_t address, std::uint16_t value);
  void handle_transit(net::EthernetFrame frame, cosim::StepContext& ctx);
  std::optional<net::MacAddr> true_mac(net::Ipv4Addr ip) const;

  net::Host host_;
  AttackPlan plan_;
  cosim::SimClock clock_;
  std::int64_t start_step_;
  std::int64_t end_step_;
  std::int64_t scan_step_;
  std::int64_t repoison_steps_;

  Stage stage_ = Stage::idle;
  std::int64_t stage_since_ = 0;
  std::int64_t last_poison_ = 0;
  std::vector<ScanEntry> scan_;
  std::map<net::Ipv4Addr, net::MacAddr> responders_;
  RoleMap roles_;
  modbus::Client probe_;
  std::map<std::pair<net::Ipv4Addr, std::uint16_t>, Tracked> pv_reads_;
  std::uint32_t inject_seq_ = 0x1e0c5a11u;
  std::uint16_t inject_ip_id_ = 0x4000;
  bool injected_ = false;
  AttackStats stats_;
};

inline constexpr std::uint16_t kInjectPort = 47808;

}  // namespace cpt::attack
