// cpt-sim: validate, run and compare cyber-physical twin scenarios.
//
// Exit codes: 0 ok, 1 configuration error, 2 runtime abort.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cpt/capture.h"
#include "cpt/scenario.h"
#include "cpt/time_of_day.h"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeAbort = 2;

void print_issues(const char* kind, const std::vector<cpt::scenario::Issue>& issues)
{
  for (const auto& i : issues) {
    std::cerr << kind << ": " << (i.path.empty() ? "<root>" : i.path) << ": " << i.reason << '\n';
  }
}

int cmd_validate(const std::string& path)
{
  try {
    const auto cfg = cpt::scenario::load_config(path);
    const auto rep = cpt::scenario::validate(cfg);
    print_issues("warning", rep.warnings);
    print_issues("error", rep.errors);
    if (!rep.ok()) {
      return kConfigError;
    }
    std::cout << path << ": ok (" << cfg.name << ", "
              << cpt::format_time_of_day(cfg.start_s) << "-" << cpt::format_time_of_day(cfg.end_s)
              << (cfg.attack ? ", attack" : "") << ")\n";
    return kOk;
  } catch (const cpt::scenario::ConfigError& ex) {
    print_issues("error", ex.issues());
    return kConfigError;
  }
}

int cmd_run(const std::string& path, const std::string& until, const std::string& out,
            bool realtime)
{
  cpt::scenario::ScenarioConfig cfg;
  cpt::scenario::RunOverrides ov;
  try {
    cfg = cpt::scenario::load_config(path);
    if (!until.empty()) {
      ov.until_s = cpt::parse_time_of_day(until);
    }
  } catch (const cpt::scenario::ConfigError& ex) {
    print_issues("error", ex.issues());
    return kConfigError;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: --until: " << ex.what() << '\n';
    return kConfigError;
  }
  if (!out.empty()) {
    ov.output_dir = out;
  }
  ov.realtime = realtime;

  try {
    const auto res = cpt::scenario::run_scenario(cfg, ov);
    const auto& s = res.summary;
    std::printf("%s: %lld steps in %.2f s wall\n", cfg.name.c_str(),
                static_cast<long long>(res.steps), res.wall_s);
    std::printf("  imbalance %.3f kWh, peak import %.2f kW, p95 |T| %.3f kW\n", s.imbalance_kwh,
                s.peak_import_kw, s.p95_abs_transformer_kw);
    if (s.attack_window) {
      std::printf("  attack window: %lld steps, imbalance %.3f kWh\n",
                  static_cast<long long>(s.attack_window->steps), s.attack_window->imbalance_kwh);
    }
    std::printf("  frames %zu, flows %zu\n", s.frames_captured, s.flows);
    for (const auto& p : res.written) {
      std::printf("  wrote %s\n", p.string().c_str());
    }
    if (res.aborted) {
      std::cerr << "run aborted: " << res.abort_reason << '\n';
      return kRuntimeAbort;
    }
    return kOk;
  } catch (const cpt::scenario::ConfigError& ex) {
    print_issues("error", ex.issues());
    return kConfigError;
  } catch (const cpt::capture::SinkError& ex) {
    std::cerr << "output error: " << ex.what() << '\n';
    return kRuntimeAbort;
  } catch (const std::exception& ex) {
    std::cerr << "run aborted: " << ex.what() << '\n';
    return kRuntimeAbort;
  }
}

int cmd_report(const std::string& a, const std::string& b)
{
  try {
    cpt::scenario::report(a, b, std::cout);
    return kOk;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Smart-grid cyber-physical twin simulator"};
  app.require_subcommand(1);

  std::string cfg_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario config");
  validate->add_option("config", cfg_path, "Scenario YAML")->required();

  std::string until;
  std::string out;
  bool realtime = false;
  auto* run = app.add_subcommand("run", "Run a scenario and export its datasets");
  run->add_option("config", cfg_path, "Scenario YAML")->required();
  run->add_option("--until", until, "Stop at this time of day (HH:MM[:SS])");
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_flag("--realtime", realtime, "Pace steps to the wall clock");

  std::string dir_a;
  std::string dir_b;
  auto* rep = app.add_subcommand("report", "Compare two dataset directories");
  rep->add_option("dirA", dir_a, "First dataset")->required();
  rep->add_option("dirB", dir_b, "Second dataset")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*validate) return cmd_validate(cfg_path);
  if (*run) return cmd_run(cfg_path, until, out, realtime);
  return cmd_report(dir_a, dir_b);
}
