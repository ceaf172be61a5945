#include "cpt/scenario.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "cpt/cosim.h"
#include "cpt/devices.h"
#include "cpt/time_of_day.h"

namespace cpt::scenario {

namespace {

std::string join_issues(const std::vector<Issue>& issues)
{
  std::string out;
  for (const auto& i : issues) {
    out += (out.empty() ? "" : "\n") + i.path + ": " + i.reason;
  }
  return out;
}

/// Reads typed values and collects problems instead of stopping at the first.
class Reader {
 public:
  std::vector<Issue> issues;

  template <class T>
  std::optional<T> get(const YAML::Node& parent, const std::string& key, const std::string& path)
  {
    if (!parent || !parent.IsMap()) {
      return std::nullopt;
    }
    const auto node = parent[key];
    if (!node || node.IsNull()) {
      return std::nullopt;
    }
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      issues.push_back({path, "wrong type"});
      return std::nullopt;
    }
  }

  template <class T>
  void read(const YAML::Node& parent, const std::string& key, const std::string& path, T& into)
  {
    if (auto v = get<T>(parent, key, path)) {
      into = *v;
    }
  }

  void time(const YAML::Node& parent, const std::string& key, const std::string& path, double& into)
  {
    if (auto v = get<std::string>(parent, key, path)) {
      try {
        into = parse_time_of_day(*v);
      } catch (const std::invalid_argument& ex) {
        issues.push_back({path, ex.what()});
      }
    }
  }

  template <class T, class Parse>
  void parsed(const YAML::Node& parent, const std::string& key, const std::string& path, T& into,
              Parse parse)
  {
    if (auto v = get<std::string>(parent, key, path)) {
      try {
        into = parse(*v);
      } catch (const std::exception& ex) {
        issues.push_back({path, ex.what()});
      }
    }
  }

  void unknown_keys(const YAML::Node& node, const std::string& path,
                    std::initializer_list<const char*> known)
  {
    if (!node || !node.IsMap()) {
      return;
    }
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
        issues.push_back({path.empty() ? key : path + "." + key, "unknown key"});
      }
    }
  }
};

void read_profile(Reader& r, const YAML::Node& node, const std::string& path, ProfileSource& into,
                  const std::filesystem::path& base)
{
  if (!node) {
    r.issues.push_back({path, "missing"});
    return;
  }
  r.unknown_keys(node, path, {"file", "factor", "clamp_max_kw"});
  if (auto file = r.get<std::string>(node, "file", path + ".file")) {
    into.file = base / *file;
  } else {
    r.issues.push_back({path + ".file", "missing"});
  }
  r.read(node, "factor", path + ".factor", into.scaling.factor);
  if (auto c = r.get<double>(node, "clamp_max_kw", path + ".clamp_max_kw")) {
    into.scaling.clamp_max_kw = *c;
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<Issue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues))
{
}

ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir)
{
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError(std::vector<Issue>{{"line " + std::to_string(ex.mark.line + 1), ex.msg}});
  }
  if (!root.IsMap()) {
    throw ConfigError(std::vector<Issue>{{"", "config must be a mapping"}});
  }

  ScenarioConfig c;
  c.base_dir = base_dir;
  Reader r;
  r.unknown_keys(root, "",
                 {"name", "seed", "clock", "network", "endpoints", "devices", "profiles", "ems",
                  "attack", "output"});
  r.read(root, "name", "name", c.name);
  r.read(root, "seed", "seed", c.seed);

  const auto clock = root["clock"];
  r.unknown_keys(clock, "clock", {"date", "start", "end", "step_s"});
  r.read(clock, "date", "clock.date", c.date);
  r.time(clock, "start", "clock.start", c.start_s);
  r.time(clock, "end", "clock.end", c.end_s);
  r.read(clock, "step_s", "clock.step_s", c.step_s);

  const auto network = root["network"];
  r.unknown_keys(network, "network", {"subnet", "arp_expiry_s"});
  if (!network || !network.IsMap() || !network["subnet"]) {
    r.issues.push_back({"network.subnet", "missing"});
  }
  r.parsed(network, "subnet", "network.subnet", c.subnet,
           [](const std::string& s) { return net::Subnet::parse(s); });
  if (auto e = r.get<double>(network, "arp_expiry_s", "network.arp_expiry_s")) {
    c.arp_expiry_s = *e;
  }

  const auto endpoints = root["endpoints"];
  r.unknown_keys(endpoints, "endpoints",
                 {id::ems, id::meter, id::pv, id::bss, id::load, id::attacker});
  for (const char* name : {id::ems, id::meter, id::pv, id::bss, id::load, id::attacker}) {
    const std::string path = std::string("endpoints.") + name;
    const auto node = endpoints && endpoints.IsMap() ? endpoints[name] : YAML::Node{};
    if (!node) {
      if (std::string(name) != id::attacker) {
        r.issues.push_back({path, "missing"});
      }
      continue;
    }
    r.unknown_keys(node, path, {"mac", "ip"});
    EndpointConfig ep;
    const auto before = r.issues.size();
    if (!node.IsMap() || !node["mac"] || !node["ip"]) {
      r.issues.push_back({path, "needs mac and ip"});
    }
    r.parsed(node, "mac", path + ".mac", ep.mac,
             [](const std::string& s) { return net::MacAddr::parse(s); });
    r.parsed(node, "ip", path + ".ip", ep.ip,
             [](const std::string& s) { return net::Ipv4Addr::parse(s); });
    if (r.issues.size() == before) {
      c.endpoints[name] = ep;
    }
  }

  const auto devices = root["devices"];
  r.unknown_keys(devices, "devices", {"pv", "bss", "load", "transformer"});
  if (devices && devices.IsMap()) {
    const auto pv = devices["pv"];
    r.unknown_keys(pv, "devices.pv", {"rated_kw", "limit_kw"});
    r.read(pv, "rated_kw", "devices.pv.rated_kw", c.pv.rated_kw);
    if (auto l = r.get<double>(pv, "limit_kw", "devices.pv.limit_kw")) {
      c.pv.limit_kw = *l;
    }
    const auto bss = devices["bss"];
    r.unknown_keys(bss, "devices.bss", {"rated_kw", "capacity_kwh", "initial_soc_kwh", "efficiency"});
    r.read(bss, "rated_kw", "devices.bss.rated_kw", c.bss.rated_kw);
    r.read(bss, "capacity_kwh", "devices.bss.capacity_kwh", c.bss.capacity_kwh);
    r.read(bss, "initial_soc_kwh", "devices.bss.initial_soc_kwh", c.bss.soc_kwh);
    r.read(bss, "efficiency", "devices.bss.efficiency", c.bss.efficiency);
    const auto load = devices["load"];
    r.unknown_keys(load, "devices.load", {"rated_kw"});
    r.read(load, "rated_kw", "devices.load.rated_kw", c.load.rated_kw);
    const auto tr = devices["transformer"];
    r.unknown_keys(tr, "devices.transformer", {"rated_kva"});
    r.read(tr, "rated_kva", "devices.transformer.rated_kva", c.transformer_rated_kva);
  }

  const auto prof = root["profiles"];
  r.unknown_keys(prof, "profiles", {"interpolation", "load", "pv"});
  if (!prof || !prof.IsMap()) {
    r.issues.push_back({"profiles", "missing"});
  } else {
    r.parsed(prof, "interpolation", "profiles.interpolation", c.interpolation,
             [](const std::string& s) { return profiles::parse_interpolation(s); });
    read_profile(r, prof["load"], "profiles.load", c.load_profile, base_dir);
    read_profile(r, prof["pv"], "profiles.pv", c.pv_profile, base_dir);
  }

  const auto ems = root["ems"];
  r.unknown_keys(ems, "ems", {"period_s", "deadband_kw", "timeout_s", "manages_pv_limit"});
  r.read(ems, "period_s", "ems.period_s", c.ems.period_s);
  r.read(ems, "deadband_kw", "ems.deadband_kw", c.ems.deadband_kw);
  r.read(ems, "timeout_s", "ems.timeout_s", c.ems.timeout_s);
  r.read(ems, "manages_pv_limit", "ems.manages_pv_limit", c.ems.manages_pv_limit);

  if (const auto atk = root["attack"]; atk && !atk.IsNull()) {
    r.unknown_keys(atk, "attack",
                   {"start", "end", "pv_limit_kw", "bss_charge_kw", "repoison_period_s",
                    "recon_lead_s"});
    attack::AttackPlan plan;
    r.time(atk, "start", "attack.start", plan.start_s);
    r.time(atk, "end", "attack.end", plan.end_s);
    r.read(atk, "pv_limit_kw", "attack.pv_limit_kw", plan.pv_limit_kw);
    r.read(atk, "bss_charge_kw", "attack.bss_charge_kw", plan.bss_charge_kw);
    r.read(atk, "repoison_period_s", "attack.repoison_period_s", plan.repoison_period_s);
    r.read(atk, "recon_lead_s", "attack.recon_lead_s", plan.recon_lead_s);
    c.attack = plan;
  }

  const auto out = root["output"];
  r.unknown_keys(out, "output", {"dir", "formats"});
  if (auto dir = r.get<std::string>(out, "dir", "output.dir")) {
    c.output_dir = (base_dir / *dir).lexically_normal();
  } else {
    c.output_dir = (base_dir / "out" / c.name).lexically_normal();
  }
  r.read(out, "formats", "output.formats", c.formats);

  c.ems.bss_rated_kw = c.bss.rated_kw;
  if (!r.issues.empty()) {
    throw ConfigError(std::move(r.issues));
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(std::vector<Issue>{{path.string(), "cannot open config file"}});
  }
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

ValidationReport validate(const ScenarioConfig& c)
{
  ValidationReport rep;
  auto error = [&](std::string path, std::string reason) {
    rep.errors.push_back({std::move(path), std::move(reason)});
  };
  auto warn = [&](std::string path, std::string reason) {
    rep.warnings.push_back({std::move(path), std::move(reason)});
  };

  try {
    capture::unix_midnight(c.date);
  } catch (const std::invalid_argument& ex) {
    error("clock.date", ex.what());
  }
  if (!(c.step_s > 0.0)) error("clock.step_s", "must be > 0");
  if (!(c.end_s >= c.start_s)) error("clock.end", "must not be before clock.start");

  std::map<net::Ipv4Addr, std::string> ips;
  std::map<net::MacAddr, std::string> macs;
  for (const auto& [name, ep] : c.endpoints) {
    const auto path = "endpoints." + name;
    if (!c.subnet.contains(ep.ip)) {
      error(path + ".ip", ep.ip.str() + " is outside " + c.subnet.str());
    } else {
      const auto hosts = c.subnet.hosts();
      if (!std::binary_search(hosts.begin(), hosts.end(), ep.ip)) {
        error(path + ".ip", ep.ip.str() + " is the network or broadcast address");
      }
    }
    if (ep.mac.is_multicast() || ep.mac.is_zero()) {
      error(path + ".mac", "must be a unicast address");
    }
    if (auto [it, fresh] = ips.emplace(ep.ip, name); !fresh) {
      error(path + ".ip", "duplicate IP " + ep.ip.str() + " (also endpoints." + it->second + ")");
    }
    if (auto [it, fresh] = macs.emplace(ep.mac, name); !fresh) {
      error(path + ".mac",
            "duplicate MAC " + ep.mac.str() + " (also endpoints." + it->second + ")");
    }
  }

  if (!(c.pv.rated_kw > 0.0)) error("devices.pv.rated_kw", "must be > 0");
  if (c.pv.limit_kw && !(*c.pv.limit_kw >= 0.0)) error("devices.pv.limit_kw", "must be >= 0");
  if (!(c.bss.rated_kw > 0.0)) error("devices.bss.rated_kw", "must be > 0");
  if (!(c.bss.capacity_kwh > 0.0)) error("devices.bss.capacity_kwh", "must be > 0");
  if (!(c.bss.soc_kwh >= 0.0 && c.bss.soc_kwh <= c.bss.capacity_kwh)) {
    error("devices.bss.initial_soc_kwh", "must be within [0, capacity_kwh]");
  }
  if (!(c.bss.efficiency > 0.0 && c.bss.efficiency <= 1.0)) {
    error("devices.bss.efficiency", "must be within (0, 1]");
  }
  if (!(c.load.rated_kw >= 0.0)) error("devices.load.rated_kw", "must be >= 0");
  if (!(c.transformer_rated_kva > 0.0)) error("devices.transformer.rated_kva", "must be > 0");

  const double duration = c.end_s - c.start_s;
  for (const auto* p : {&c.load_profile, &c.pv_profile}) {
    const std::string path = p == &c.load_profile ? "profiles.load" : "profiles.pv";
    if (!(p->scaling.factor > 0.0)) error(path + ".factor", "must be > 0");
    if (!std::filesystem::exists(p->file)) {
      error(path + ".file", "no such file: " + p->file.string());
      continue;
    }
    try {
      const auto prof = profiles::load_profile_file(p->file, c.interpolation);
      if (prof.points().front().t_s > 0.0 || prof.points().back().t_s < duration) {
        warn(path + ".file", "does not cover the whole run; end values are held");
      }
    } catch (const std::exception& ex) {
      error(path + ".file", ex.what());
    }
  }

  try {
    c.ems.validate(c.step_s);
  } catch (const std::invalid_argument& ex) {
    error("ems", ex.what());
  }

  if (c.attack) {
    const auto& a = *c.attack;
    try {
      a.validate(c.bss.rated_kw);
    } catch (const std::invalid_argument& ex) {
      error("attack", ex.what());
    }
    if (a.start_s < c.start_s || a.end_s > c.end_s) {
      error("attack", "window " + format_time_of_day(a.start_s) + "-" +
                          format_time_of_day(a.end_s) + " is not within the run window");
    }
    if (!c.endpoints.contains(id::attacker)) {
      error("endpoints.attacker", "an attack needs an attacker endpoint");
    }
    if (a.start_s - a.recon_lead_s < c.start_s) {
      warn("attack.recon_lead_s", "reconnaissance would begin before the run; it starts at step 0");
    }
  }

  try {
    capture::check_formats(c.formats);
  } catch (const capture::UnsupportedFormat& ex) {
    error("output.formats", ex.what());
  }
  return rep;
}

// --- run -----------------------------------------------------------------

namespace {

/// Fans scheduler callbacks out to the recorder and the optional transcript.
class Tee : public cosim::Observer {
 public:
  Tee(capture::Recorder& recorder, std::ostream* transcript)
      : recorder_(recorder), transcript_(transcript)
  {
  }
  void on_step(const cosim::StepReport& report) override
  {
    recorder_.on_step(report);
    if (transcript_) {
      cosim::write_transcript(*transcript_, report.records);
    }
  }
  void on_lifecycle(const cosim::Event& event) override { recorder_.on_lifecycle(event); }

 private:
  capture::Recorder& recorder_;
  std::ostream* transcript_;
};

const char* role_of(const std::string& endpoint)
{
  if (endpoint == id::ems) return "EMS";
  if (endpoint == id::meter) return "Meter";
  if (endpoint == id::pv) return "PV";
  if (endpoint == id::bss) return "BSS";
  if (endpoint == id::load) return "LoadBank";
  if (endpoint == id::attacker) return "Attacker";
  return "unknown";
}

}  // namespace

std::vector<std::string> default_order(const ScenarioConfig& config)
{
  std::vector<std::string> order{"profiles", id::load, id::pv, id::bss, id::meter, id::ems};
  if (config.attack) {
    order.push_back(id::attacker);
  }
  return order;
}

RunResult run_scenario(const ScenarioConfig& config, const RunOverrides& overrides)
{
  if (auto rep = validate(config); !rep.ok()) {
    throw ConfigError(rep.errors);
  }
  const double until = overrides.until_s.value_or(config.end_s);
  if (until < config.start_s) {
    throw ConfigError(std::vector<Issue>{{"--until", "before the scenario start"}});
  }

  cosim::SimClock clock{config.start_s, config.step_s, 0};
  cosim::Scheduler sched(clock);

  net::HostOptions hopts;
  hopts.seed = config.seed;
  if (config.arp_expiry_s) {
    hopts.arp_expiry_steps = std::max<std::int64_t>(1, std::llround(*config.arp_expiry_s / config.step_s));
  }
  auto host = [&](const std::string& name) {
    const auto& ep = config.endpoints.at(name);
    return net::Host(name, ep.mac, ep.ip, config.subnet, hopts);
  };

  auto load_prof = profiles::scale(
      profiles::load_profile_file(config.load_profile.file, config.interpolation),
      config.load_profile.scaling);
  auto pv_prof = profiles::scale(
      profiles::load_profile_file(config.pv_profile.file, config.interpolation),
      config.pv_profile.scaling);

  grid::PvState pv0 = config.pv;
  grid::BssState bss0 = config.bss;
  grid::LoadState load0 = config.load;

  devices::ProfilePlayer player(std::move(load_prof), std::move(pv_prof), config.start_s);
  devices::PvInverter pv(host(id::pv), pv0);
  devices::BssInverter bss(host(id::bss), bss0);
  devices::LoadBank load(host(id::load), load0);
  devices::Meter meter(host(id::meter), config.transformer_rated_kva);
  ems::Targets targets{config.endpoints.at(id::meter).ip, config.endpoints.at(id::pv).ip,
                       config.endpoints.at(id::bss).ip};
  ems::EmsController ems(host(id::ems), targets, config.ems, config.step_s);
  std::optional<attack::Attacker> attacker;
  if (config.attack) {
    attacker.emplace(host(id::attacker), *config.attack, clock);
  }

  std::vector<std::string> endpoint_ids;
  for (const auto& [name, ep] : config.endpoints) {
    if (name != id::attacker || attacker) {
      endpoint_ids.push_back(name);
    }
  }
  net::Network network(endpoint_ids);

  std::map<std::string, std::function<void()>> registrars{
      {"profiles",
       [&] { sched.register_simulator(player.handle(), [&](auto& ctx) { player.step(ctx); }); }},
      {id::load, [&] { sched.register_simulator(load.handle(), [&](auto& ctx) { load.step(ctx); }); }},
      {id::pv, [&] { sched.register_simulator(pv.handle(), [&](auto& ctx) { pv.step(ctx); }); }},
      {id::bss, [&] { sched.register_simulator(bss.handle(), [&](auto& ctx) { bss.step(ctx); }); }},
      {id::meter,
       [&] { sched.register_simulator(meter.handle(), [&](auto& ctx) { meter.step(ctx); }); }},
      {id::ems, [&] { sched.register_simulator(ems.handle(), [&](auto& ctx) { ems.step(ctx); }); }},
  };
  if (attacker) {
    registrars[id::attacker] = [&] {
      sched.register_simulator(attacker->handle(), [&](auto& ctx) { attacker->step(ctx); });
    };
  }

  const auto order = overrides.registration_order.value_or(default_order(config));
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    auto expected = default_order(config);
    std::sort(expected.begin(), expected.end());
    if (sorted != expected) {
      throw std::invalid_argument("registration order must be a permutation of the simulators");
    }
  }
  for (const auto& name : order) {
    registrars.at(name)();
  }
  sched.register_relay(network.handle(), [&](auto& ctx) { network.relay(ctx); });

  capture::CaptureOptions copts;
  copts.step_s = config.step_s;
  copts.deadband_kw = config.ems.deadband_kw;
  if (config.attack) {
    copts.attack_window = std::make_pair(config.attack->start_s, config.attack->end_s);
  }
  copts.pcap_midnight_unix = capture::unix_midnight(config.date);
  for (const auto& [name, ep] : config.endpoints) {
    if (name != id::attacker || attacker) {
      copts.inventory.push_back({name, role_of(name), ep.mac, ep.ip});
    }
  }

  RunResult result;
  result.registration_order = sched.registration_order();
  result.recorder = std::make_unique<capture::Recorder>(copts);
  Tee tee(*result.recorder, overrides.transcript);
  sched.set_observer(&tee);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto run = sched.run(until, cosim::RunOptions{overrides.realtime});
    result.steps = run.steps;
  } catch (const cosim::StepError& ex) {
    result.aborted = true;
    result.abort_reason = ex.what();
    result.steps = sched.clock().now;
  }
  result.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& rec = *result.recorder;
  const auto flows = rec.flows();
  result.summary = capture::summarize(rec.samples(), flows, rec.graph().nodes().size(),
                                      rec.frames().size(), network.stats(), rec.events().size(),
                                      copts);
  result.network = network.stats();
  result.ems = ems.stats();
  result.pv_limit_register = pv.registers().get(modbus::reg::pv_limit);
  result.arp_caches[id::ems] = ems.host().arp_cache();
  result.arp_caches[id::pv] = pv.host().arp_cache();
  result.arp_caches[id::bss] = bss.host().arp_cache();
  result.arp_caches[id::meter] = meter.host().arp_cache();
  result.arp_caches[id::load] = load.host().arp_cache();
  if (attacker) {
    result.attack = attacker->stats();
    result.attacker_roles = attacker->roles();
    result.scan = attacker->scan_results();
    result.arp_caches[id::attacker] = attacker->host().arp_cache();
  }

  if (overrides.write_outputs) {
    const auto dir = overrides.output_dir.value_or(config.output_dir);
    result.written = capture::export_dataset(dir, config.formats, {&rec, result.summary});
  }
  return result;
}

// --- report --------------------------------------------------------------

namespace {

struct DatasetView {
  nlohmann::json summary;
  std::set<std::string> nodes;  // "mac ip role"
  std::vector<std::pair<double, double>> process;  // (t, transformer)
  std::vector<double> labelled;                     // t of attack-labelled rows
};

DatasetView read_dataset(const std::filesystem::path& dir)
{
  DatasetView v;
  std::ifstream s(dir / "summary.json");
  if (!s) {
    throw std::runtime_error("no summary.json in " + dir.string());
  }
  try {
    s >> v.summary;
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error("unreadable summary.json in " + dir.string() + ": " + ex.what());
  }
  std::ifstream g(dir / "flowgraph.txt");
  for (std::string line; std::getline(g, line);) {
    std::istringstream ls(line);
    std::string kind, idx, mac, ip, role;
    if (ls >> kind >> idx >> mac >> ip >> role && kind == "node") {
      v.nodes.insert(mac + " " + ip + " " + role);
    }
  }
  std::ifstream p(dir / "process.csv");
  std::string line;
  std::getline(p, line);
  while (std::getline(p, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() == 7) {
      const double t = parse_time_of_day(f[0]);
      v.process.emplace_back(t, std::stod(f[4]));
      if (f[6] == "1") v.labelled.push_back(t);
    }
  }
  return v;
}

double window_imbalance(const DatasetView& v, double start, double end, double step_s)
{
  double sum = 0.0;
  for (const auto& [t, tr] : v.process) {
    if (t >= start && t < end) sum += std::abs(tr) * step_s / 3600.0;
  }
  return sum;
}

std::optional<std::pair<double, double>> attack_bounds(const DatasetView& v)
{
  if (v.labelled.empty()) return std::nullopt;
  return std::make_pair(v.labelled.front(), v.labelled.back());
}

}  // namespace

void report(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out)
{
  const auto A = read_dataset(a);
  const auto B = read_dataset(b);
  auto num = [](const nlohmann::json& j, const char* key) {
    return j.contains(key) && j[key].is_number() ? j[key].get<double>() : 0.0;
  };

  out << "A: " << a.string() << "\nB: " << b.string() << "\n\n";
  out << std::left << std::setw(30) << "metric" << std::right << std::setw(14) << "A"
      << std::setw(14) << "B" << std::setw(14) << "B-A" << '\n';
  auto row = [&](const std::string& name, double va, double vb) {
    out << std::left << std::setw(30) << name << std::right << std::fixed << std::setprecision(3)
        << std::setw(14) << va << std::setw(14) << vb << std::setw(14) << vb - va << '\n';
  };
  for (const char* key : {"imbalance_kwh", "peak_import_kw", "peak_export_kw",
                          "p95_abs_transformer_kw", "within_deadband_fraction", "pv_energy_kwh",
                          "pv_curtailed_kwh", "soc_min_pct", "soc_max_pct", "flows",
                          "graph_nodes", "frames_captured"}) {
    row(key, num(A.summary, key), num(B.summary, key));
  }

  // The attack window is recovered from the labelled rows of either run and
  // applied to both, so a normal run can be compared on the same interval.
  std::optional<std::pair<double, double>> window = attack_bounds(B);
  if (!window) window = attack_bounds(A);
  if (window) {
    const double step = num(B.summary, "step_s") > 0 ? num(B.summary, "step_s") : 1.0;
    const double end = window->second + step;
    row("window_imbalance_kwh", window_imbalance(A, window->first, end, step),
        window_imbalance(B, window->first, end, step));
    out << "attack window: " << format_time_of_day(window->first) << " - "
        << format_time_of_day(end) << '\n';
  }

  out << "\nflow-graph nodes only in A:\n";
  std::size_t n = 0;
  for (const auto& node : A.nodes) {
    if (!B.nodes.contains(node)) {
      out << "  " << node << '\n';
      ++n;
    }
  }
  if (n == 0) out << "  (none)\n";
  out << "flow-graph nodes only in B:\n";
  n = 0;
  for (const auto& node : B.nodes) {
    if (!A.nodes.contains(node)) {
      out << "  " << node << '\n';
      ++n;
    }
  }
  if (n == 0) out << "  (none)\n";
}

}  // namespace cpt::scenario
