// Golden-run acceptance checks. Runs both bundled scenarios twice, writes
// their datasets under argv[1] and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpt/modbus.h"
#include "cpt/profiles.h"
#include "cpt/scenario.h"
#include "cpt/time_of_day.h"

namespace fs = std::filesystem;
using namespace cpt;

namespace {

constexpr double kDeadband = 0.1;
constexpr double kSettle = 10.0;  // two control periods

struct Check {
  bool ok = true;
  std::string why;

  void fail(const std::string& msg)
  {
    if (ok) why = msg;
    ok = false;
  }
};

struct Golden {
  scenario::ScenarioConfig cfg;
  scenario::RunResult run;
  scenario::RunResult repeat;
  fs::path dir;
  fs::path repeat_dir;
};

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Golden run_golden(const char* name, const fs::path& out)
{
  Golden g;
  g.cfg = scenario::load_config(fs::path(CPT_SOURCE_DIR) / "scenarios" / (std::string(name) + ".yaml"));
  g.dir = out / name;
  g.repeat_dir = out / (std::string(name) + "_repeat");
  fs::remove_all(g.dir);
  fs::remove_all(g.repeat_dir);
  scenario::RunOverrides ov;
  ov.output_dir = g.dir;
  g.run = scenario::run_scenario(g.cfg, ov);
  ov.output_dir = g.repeat_dir;
  g.repeat = scenario::run_scenario(g.cfg, ov);
  return g;
}

std::string at(double t)
{
  return format_time_of_day(t);
}

// Knot instants (time of day) of both profiles that fall inside [from, to).
std::vector<double> knots(const scenario::ScenarioConfig& cfg, double from, double to)
{
  std::set<double> ts;
  for (const auto* src : {&cfg.load_profile, &cfg.pv_profile}) {
    const auto profile = profiles::load_profile_file(src->file);
    for (const auto& k : profile.points()) {
      const double t = cfg.start_s + k.t_s;
      if (t >= from && t < to) ts.insert(t);
    }
  }
  return {ts.begin(), ts.end()};
}

// Ripple after each knot, and |T| <= deadband from knot + 10 s until the next
// knot (or `to`).
void check_knots(const std::vector<capture::ProcessSample>& s, const std::vector<double>& ks,
                 double to, Check& c)
{
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double next = i + 1 < ks.size() ? ks[i + 1] : to;
    bool ripple = false;
    for (const auto& x : s) {
      if (x.t_s < ks[i] || x.t_s >= next) continue;
      const double a = std::abs(x.transformer_kw);
      if (a > kDeadband) ripple = true;
      if (x.t_s >= ks[i] + kSettle && a > kDeadband) {
        c.fail("|T|=" + std::to_string(a) + " at " + at(x.t_s) + ", knot " + at(ks[i]));
        return;
      }
    }
    if (!ripple) {
      c.fail("no ripple after knot " + at(ks[i]));
      return;
    }
  }
}

Check criterion1(const Golden& n)
{
  Check c;
  const auto& s = n.run.recorder->samples();
  const double frac = n.run.summary.within_deadband_fraction;
  if (frac < 0.95) c.fail("within-deadband fraction " + std::to_string(frac));
  for (const auto& x : s) {
    const double residual = x.load_kw - x.pv_available_kw;
    if (std::abs(residual) > 15.0) c.fail("residual " + std::to_string(residual) + " at " + at(x.t_s));
    if (x.soc_pct <= 0.0 || x.soc_pct >= 100.0) c.fail("SOC at a bound at " + at(x.t_s));
  }
  check_knots(s, knots(n.cfg, n.cfg.start_s, n.cfg.end_s), n.cfg.end_s, c);
  if (c.ok) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2f%% of steps within 0.1 kW", frac * 100);
    c.why = buf;
  }
  return c;
}

Check criterion2(const Golden& a)
{
  Check c;
  const auto& plan = *a.cfg.attack;
  const double cap = a.cfg.bss.capacity_kwh;
  const auto& st = *a.run.attack;
  if (!st.pv_limit_landing_step) {
    c.fail("PV limit never landed");
    return c;
  }
  const double landing = a.cfg.start_s + static_cast<double>(*st.pv_limit_landing_step) * a.cfg.step_s;
  if (landing > plan.start_s) c.fail("PV limit landed at " + at(landing));
  std::size_t forced = 0;
  std::size_t saturated = 0;
  for (const auto& x : a.run.recorder->samples()) {
    if (!plan.active_at(x.t_s)) continue;
    if (!x.attack_active) c.fail("row not labelled at " + at(x.t_s));
    if (x.t_s >= landing && x.pv_kw > 3.5) c.fail("PV " + std::to_string(x.pv_kw) + " at " + at(x.t_s));
    if (x.soc_kwh < cap) {
      ++forced;
      if (std::abs(x.bss_kw - 14.0) > 1e-6) {
        c.fail("BSS " + std::to_string(x.bss_kw) + " kW at " + at(x.t_s));
      }
      const double expect = x.load_kw + 14.0 - std::min(x.pv_available_kw, 3.5);
      if (std::abs(x.transformer_kw - expect) > 1e-9) {
        c.fail("balance identity off at " + at(x.t_s));
      }
    } else {
      ++saturated;
    }
  }
  if (c.ok) {
    c.why = std::to_string(forced) + " steps at +14 kW, " + std::to_string(saturated) +
            " with the battery full; PV limit from " + at(landing);
  }
  return c;
}

Check criterion3(const Golden& a)
{
  Check c;
  const double end = a.cfg.attack->end_s;
  const auto& s = a.run.recorder->samples();
  auto ks = knots(a.cfg, end, a.cfg.end_s);
  if (ks.empty() || ks.front() != end) ks.insert(ks.begin(), end);  // window end acts as a knot
  check_knots(s, ks, a.cfg.end_s, c);
  std::size_t n = 0, within = 0;
  for (const auto& x : s) {
    if (x.t_s < end) continue;
    ++n;
    within += std::abs(x.transformer_kw) <= kDeadband;
    if (x.pv_available_kw > 3.5 && x.pv_kw > 3.5 + 1e-12) {
      c.fail("PV " + std::to_string(x.pv_kw) + " kW at " + at(x.t_s) + ", limit was reset");
    }
    if (!x.pv_limit_kw || std::abs(*x.pv_limit_kw - 3.5) > 1e-9) {
      c.fail("PV limit not 3.5 kW at " + at(x.t_s));
    }
  }
  if (n == 0 || within < 0.95 * static_cast<double>(n)) c.fail("post-window fraction too low");
  if (a.run.pv_limit_register != modbus::encode_fp(3.5)) c.fail("PV register 20 was reset");
  if (c.ok) {
    c.why = std::to_string(within) + "/" + std::to_string(n) +
            " post-window steps within 0.1 kW; PV limit still 3.5 kW at the end";
  }
  return c;
}

double window_integral(const Golden& g, double from, double to)
{
  double sum = 0.0;
  for (const auto& x : g.run.recorder->samples()) {
    if (x.t_s >= from && x.t_s < to) sum += std::abs(x.transformer_kw) * g.cfg.step_s / 3600.0;
  }
  return sum;
}

Check criterion4(const Golden& n, const Golden& a)
{
  Check c;
  const auto& plan = *a.cfg.attack;
  const double in = window_integral(n, plan.start_s, plan.end_s);
  const double ia = window_integral(a, plan.start_s, plan.end_s);
  if (!(ia >= 5.0 * in)) c.fail("attack " + std::to_string(ia) + " vs normal " + std::to_string(in));
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.3f kWh vs %.3f kWh (%.0fx)", ia, in, in > 0 ? ia / in : 0.0);
  if (c.ok) c.why = buf;
  return c;
}

Check criterion5(const Golden& n, const Golden& a)
{
  Check c;
  const auto ems_ip = a.cfg.endpoints.at(scenario::id::ems).ip;
  const auto pv_ip = a.cfg.endpoints.at(scenario::id::pv).ip;
  // From the flow records directly.
  auto macs = [](const Golden& g) {
    std::map<net::Ipv4Addr, std::set<net::MacAddr>> m;
    for (const auto& f : g.run.recorder->flows()) {
      m[f.key.src_ip].insert(f.key.src_mac);
      m[f.key.dst_ip].insert(f.key.dst_mac);
    }
    return m;
  };
  auto am = macs(a);
  if (am[ems_ip].size() < 2) c.fail("EMS IP has " + std::to_string(am[ems_ip].size()) + " MAC(s)");
  if (am[pv_ip].size() < 2) c.fail("PV IP has " + std::to_string(am[pv_ip].size()) + " MAC(s)");
  for (const auto& [ip, set] : macs(n)) {
    if (set.size() != 1) c.fail("normal run: " + ip.str() + " has " + std::to_string(set.size()) + " MACs");
  }
  const auto g = n.run.recorder->graph();
  const auto center = g.star_center();
  const auto& ems = n.cfg.endpoints.at(scenario::id::ems);
  if (!center || center->mac != ems.mac || center->ip != ems.ip) {
    c.fail("normal graph is not a star around the EMS");
  }
  if (c.ok) {
    c.why = "attack: EMS IP " + std::to_string(am[ems_ip].size()) + " MACs, PV IP " +
            std::to_string(am[pv_ip].size()) + " MACs; normal: star of " +
            std::to_string(g.nodes().size()) + " nodes around the EMS";
  }
  return c;
}

// Minimal pcap reader, independent of the exporter.
struct PcapScan {
  bool header_ok = false;
  std::size_t records = 0;
  std::size_t modbus = 0;
  std::string error;
};

std::uint32_t rd32(const std::string& b, std::size_t i)
{
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[i + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[i + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[i + 3])) << 24;
}

unsigned be16(const std::string& b, std::size_t i)
{
  return static_cast<unsigned>(static_cast<unsigned char>(b[i])) << 8 |
         static_cast<unsigned char>(b[i + 1]);
}

PcapScan scan_pcap(const fs::path& path)
{
  PcapScan r;
  const auto b = slurp(path);
  if (b.size() < 24 || rd32(b, 0) != 0xa1b2c3d4u || be16(b, 4) != 0x0200 || rd32(b, 20) != 1) {
    r.error = "bad global header";
    return r;
  }
  r.header_ok = true;
  std::size_t i = 24;
  while (i < b.size()) {
    if (i + 16 > b.size()) {
      r.error = "truncated record header";
      return r;
    }
    const std::size_t incl = rd32(b, i + 8);
    const std::size_t orig = rd32(b, i + 12);
    i += 16;
    if (incl != orig || i + incl > b.size()) {
      r.error = "bad record length";
      return r;
    }
    const std::string f = b.substr(i, incl);
    i += incl;
    ++r.records;
    if (f.size() < 34 || be16(f, 12) != 0x0800 || static_cast<unsigned char>(f[23]) != 6) continue;
    const std::size_t ihl = (static_cast<unsigned char>(f[14]) & 0x0f) * 4u;
    const std::size_t ip_total = be16(f, 16);
    const std::size_t tcp = 14 + ihl;
    const std::size_t thl = (static_cast<unsigned char>(f[tcp + 12]) >> 4) * 4u;
    const std::size_t data = tcp + thl;
    const std::size_t end = 14 + ip_total;
    if (be16(f, tcp) != 502 && be16(f, tcp + 2) != 502) continue;
    if (end > f.size() || end < data + 8) {
      r.error = "Modbus segment too short";
      return r;
    }
    if (be16(f, data + 2) != 0 || be16(f, data + 4) != end - data - 6) {
      r.error = "bad MBAP header in record " + std::to_string(r.records);
      return r;
    }
    ++r.modbus;
  }
  return r;
}

Check criterion6(const Golden& n, const Golden& a)
{
  Check c;
  std::mt19937 rng(20220510);
  for (int i = 0; i < 10000; ++i) {
    modbus::Bytes data(rng() % 252);
    for (auto& x : data) x = static_cast<std::uint8_t>(rng());
    auto f = static_cast<std::uint8_t>(rng() % 0x7f + 1);
    auto adu = modbus::make_adu(static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng()), f,
                                std::move(data));
    auto wire = modbus::encode(adu);
    if (modbus::decode(wire) != adu || modbus::encode(modbus::decode(wire)) != wire) {
      c.fail("ADU " + std::to_string(i) + " did not round-trip");
      break;
    }
  }
  std::string detail = "10000 ADUs round-trip";
  for (const auto* g : {&n, &a}) {
    auto r = scan_pcap(g->dir / "capture.pcap");
    if (!r.error.empty()) c.fail(g->cfg.name + ": " + r.error);
    const auto expect = g->run.network.delivered + g->run.network.flooded;
    if (r.records != expect) {
      c.fail(g->cfg.name + ": " + std::to_string(r.records) + " pcap records vs " +
             std::to_string(expect) + " delivered+flooded");
    }
    if (r.modbus == 0) c.fail(g->cfg.name + ": no Modbus TCP in the pcap");
    detail += "; " + g->cfg.name + " " + std::to_string(r.records) + " frames (" +
              std::to_string(r.modbus) + " Modbus)";
  }
  if (c.ok) c.why = detail;
  return c;
}

Check criterion7(const Golden& n, const Golden& a)
{
  Check c;
  for (const auto* g : {&n, &a}) {
    for (const char* f : {"process.csv", "flows.csv", "capture.pcap"}) {
      const auto x = slurp(g->dir / f);
      if (x.empty() || x != slurp(g->repeat_dir / f)) c.fail(g->cfg.name + "/" + f + " differs");
    }
  }
  if (c.ok) c.why = "process, flows and pcap byte-identical across repeated runs";
  return c;
}

// Re-reads the exported process CSV and recomputes the balance from its columns.
void check_conservation_csv(const fs::path& csv, Check& c)
{
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) {
      c.fail("malformed row in " + csv.string());
      return;
    }
    ++rows;
    const double pv = std::stod(f[1]), bss = std::stod(f[2]), load = std::stod(f[3]);
    const double tr = std::stod(f[4]);
    if (std::abs(tr - (load + bss - pv)) > 1e-9) c.fail("conservation off at " + f[0]);
  }
  if (rows == 0) c.fail("empty " + csv.string());
}

Check criterion8(const std::vector<const scenario::RunResult*>& runs, const Golden& n,
                 const Golden& a)
{
  Check c;
  const double cap = n.cfg.bss.capacity_kwh;
  for (const auto* r : runs) {
    for (const auto& x : r->recorder->samples()) {
      if (std::abs(x.transformer_kw - (x.load_kw + x.bss_kw - x.pv_kw)) > 1e-9) {
        c.fail("conservation off at " + at(x.t_s));
      }
      if (x.soc_kwh < 0.0 || x.soc_kwh > cap) c.fail("SOC " + std::to_string(x.soc_kwh) + " kWh");
      if (x.pv_kw > x.pv_available_kw + 1e-12 || x.pv_kw < 0.0) c.fail("PV above available");
      if (std::abs(x.bss_kw) > n.cfg.bss.rated_kw + 1e-12) c.fail("BSS beyond rating");
    }
  }
  check_conservation_csv(n.dir / "process.csv", c);
  check_conservation_csv(a.dir / "process.csv", c);
  if (c.ok) c.why = "balance exact and SOC within [0, 22] kWh in all four runs";
  return c;
}

}  // namespace

int main(int argc, char** argv)
{
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  Golden normal, attack;
  try {
    normal = run_golden("normal", out);
    attack = run_golden("attack", out);
  } catch (const std::exception& ex) {
    std::cout << "FAIL golden runs: " << ex.what() << '\n';
    return 1;
  }

  bool all = true;
  auto report = [&](int id, const Check& c) {
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << id << ": " << c.why << '\n';
    all = all && c.ok;
  };

  Check timing;
  std::string walls;
  for (const auto* r : {&normal.run, &normal.repeat, &attack.run, &attack.repeat}) {
    if (r->aborted) timing.fail("run aborted: " + r->abort_reason);
    if (r->wall_s >= 10.0) timing.fail("run took " + std::to_string(r->wall_s) + " s");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%.2f s", walls.empty() ? "" : ", ", r->wall_s);
    walls += buf;
    if (r->steps != 20700) timing.fail("expected 20700 steps, got " + std::to_string(r->steps));
  }
  if (timing.ok) timing.why = "20700 steps per run; wall " + walls;
  std::cout << (timing.ok ? "PASS" : "FAIL") << " runtime: " << timing.why << '\n';
  all = all && timing.ok;

  report(1, criterion1(normal));
  report(2, criterion2(attack));
  report(3, criterion3(attack));
  report(4, criterion4(normal, attack));
  report(5, criterion5(normal, attack));
  report(6, criterion6(normal, attack));
  report(7, criterion7(normal, attack));
  report(8, criterion8({&normal.run, &normal.repeat, &attack.run, &attack.repeat}, normal, attack));
  return all ? 0 : 1;
}
