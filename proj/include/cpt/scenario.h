#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpt/attack.h"
#include "cpt/capture.h"
#include "cpt/ems.h"
#include "cpt/grid_model.h"
#include "cpt/netem.h"
#include "cpt/profiles.h"

/// Declarative scenarios: YAML config, validation, wiring of all simulators
/// into one scheduler, execution and normal-vs-attack reporting.
namespace cpt::scenario {

struct Issue {
  std::string path;    ///< e.g. "attack.end"
  std::string reason;
};

/// Every problem found while loading or validating, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const { return issues_; }

 private:
  std::vector<Issue> issues_;
};

struct EndpointConfig {
  net::MacAddr mac;
  net::Ipv4Addr ip;
};

struct ProfileSource {
  std::filesystem::path file;  ///< resolved against the config directory
  profiles::ScalingRule scaling;
};

/// Endpoint ids used on the network and in signal names.
namespace id {
inline constexpr const char* ems = "ems";
inline constexpr const char* meter = "meter";
inline constexpr const char* pv = "pv";
inline constexpr const char* bss = "bss";
inline constexpr const char* load = "load";
inline constexpr const char* attacker = "attacker";
}  // namespace id

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  ///< directory of the config file

  // clock
  std::string date = "2022-05-10";
  double start_s = 9.25 * 3600.0;
  double end_s = 15.0 * 3600.0;
  double step_s = 1.0;

  // network
  net::Subnet subnet;
  std::optional<double> arp_expiry_s;
  std::map<std::string, EndpointConfig> endpoints;

  // devices
  grid::PvState pv;
  grid::BssState bss;
  grid::LoadState load;
  double transformer_rated_kva = 630.0;

  profiles::Interpolation interpolation = profiles::Interpolation::hold;
  ProfileSource load_profile;
  ProfileSource pv_profile;

  ems::ControlPolicy ems;
  std::optional<attack::AttackPlan> attack;

  std::filesystem::path output_dir;
  std::vector<std::string> formats = capture::all_formats();
};

/// Parses the YAML file. Throws ConfigError listing every schema problem.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir);

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;
  bool ok() const { return errors.empty(); }
};

/// Cross-field and cross-module checks (uniqueness, windows, ratings, files).
ValidationReport validate(const ScenarioConfig& config);

struct RunOverrides {
  std::optional<double> until_s;
  std::optional<std::filesystem::path> output_dir;
  bool realtime = false;
  bool write_outputs = true;
  /// Simulator registration order (ids from the default order). Outputs must
  /// not depend on it.
  std::optional<std::vector<std::string>> registration_order;
  std::ostream* transcript = nullptr;  ///< receives the exchange transcript
};

struct RunResult {
  std::unique_ptr<capture::Recorder> recorder;
  capture::Summary summary;
  std::int64_t steps = 0;
  double wall_s = 0.0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::filesystem::path> written;

  net::NetStats network;
  ems::EmsStats ems;
  std::optional<attack::AttackStats> attack;
  attack::RoleMap attacker_roles;
  std::vector<attack::ScanEntry> scan;
  std::map<std::string, std::map<net::Ipv4Addr, net::ArpEntry>> arp_caches;
  std::uint16_t pv_limit_register = 0;
  std::vector<std::string> registration_order;
};

/// Default simulator registration order.
std::vector<std::string> default_order(const ScenarioConfig& config);

/// Builds and runs the scenario. Step errors abort the run; whatever was
/// captured up to that point is still exported.
RunResult run_scenario(const ScenarioConfig& config, const RunOverrides& overrides = {});

/// Human-readable comparison of two dataset directories. Throws
/// std::runtime_error when either directory lacks a summary.
void report(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out);

}  // namespace cpt::scenario
