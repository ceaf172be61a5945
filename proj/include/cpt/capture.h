#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpt/cosim.h"
#include "cpt/netem.h"

/// Dataset capture: per-step process samples, every frame that left the
/// switch, flow records keyed by the full (mac, ip) 4-tuple and the data-flow
/// graph built from them. Plus the exporters.
namespace cpt::capture {

struct ProcessSample {
  double t_s = 0.0;  ///< time of day
  double pv_kw = 0.0;
  double bss_kw = 0.0;
  double load_kw = 0.0;
  double transformer_kw = 0.0;
  double soc_pct = 0.0;
  bool attack_active = false;

  // Kept for analysis, not exported to the process CSV.
  double pv_available_kw = 0.0;
  double soc_kwh = 0.0;
  double bss_setpoint_kw = 0.0;
  std::optional<double> pv_limit_kw;
};

struct CapturedFrame {
  std::int64_t step = 0;
  double t_s = 0.0;
  cosim::Bytes bytes;
};

struct FlowKey {
  net::MacAddr src_mac;
  net::MacAddr dst_mac;
  net::Ipv4Addr src_ip;
  net::Ipv4Addr dst_ip;

  auto operator<=>(const FlowKey&) const = default;
};

struct FlowRecord {
  FlowKey key;
  std::uint64_t frames = 0;
  std::uint64_t bytes = 0;
  double first_ts = 0.0;
  double last_ts = 0.0;
};

/// Ground truth of who owns which address; used only to label graph nodes.
struct Endpoint {
  std::string id;
  std::string role;  ///< "EMS", "PV", "BSS", "LoadBank", "Meter", "Attacker"
  net::MacAddr mac;
  net::Ipv4Addr ip;
};

struct GraphNode {
  net::MacAddr mac;
  net::Ipv4Addr ip;
  std::string role;

  auto operator<=>(const GraphNode&) const = default;
};

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::uint64_t frames = 0;
  std::uint64_t bytes = 0;
};

/// One node per (mac, ip) pair seen on the wire: an IP answered by two MACs
/// becomes two nodes.
class DataFlowGraph {
 public:
  static DataFlowGraph build(const std::vector<FlowRecord>& flows,
                             const std::vector<Endpoint>& inventory);

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }

  std::map<net::Ipv4Addr, std::set<net::MacAddr>> macs_per_ip() const;
  /// The node every edge touches, if the edges form a star.
  std::optional<GraphNode> star_center() const;

  /// Plain text: "node <n> <mac> <ip> <role>" and "edge <from> <to> <frames> <bytes>".
  void write(std::ostream& out) const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
};

struct WindowStats {
  std::int64_t steps = 0;
  double imbalance_kwh = 0.0;  ///< integral of |transformer| over the window
  double mean_transformer_kw = 0.0;
  double peak_import_kw = 0.0;
};

struct Summary {
  std::int64_t steps = 0;
  double step_s = 1.0;
  double imbalance_kwh = 0.0;
  double peak_import_kw = 0.0;
  double peak_export_kw = 0.0;
  double p95_abs_transformer_kw = 0.0;
  double within_deadband_fraction = 0.0;
  double pv_energy_kwh = 0.0;
  double pv_curtailed_kwh = 0.0;
  double soc_min_pct = 0.0;
  double soc_max_pct = 0.0;
  std::optional<WindowStats> attack_window;
  std::size_t flows = 0;
  std::size_t graph_nodes = 0;
  std::size_t frames_captured = 0;
  net::NetStats network;
  std::size_t events = 0;
};

struct CaptureOptions {
  double step_s = 1.0;
  double deadband_kw = 0.1;
  std::optional<std::pair<double, double>> attack_window;  ///< [start, end) time of day
  std::int64_t pcap_midnight_unix = 0;  ///< calendar date of the run, 00:00 UTC
  std::vector<Endpoint> inventory;
};

/// Unix time of 00:00 UTC on an ISO "YYYY-MM-DD" date.
std::int64_t unix_midnight(std::string_view iso_date);

/// Builds everything from the scheduler's step reports.
class Recorder : public cosim::Observer {
 public:
  explicit Recorder(CaptureOptions options);

  void on_step(const cosim::StepReport& report) override;
  void on_lifecycle(const cosim::Event& event) override;

  const CaptureOptions& options() const { return options_; }
  const std::vector<ProcessSample>& samples() const { return samples_; }
  const std::vector<CapturedFrame>& frames() const { return frames_; }
  const std::vector<cosim::Event>& events() const { return events_; }
  std::vector<FlowRecord> flows() const;
  DataFlowGraph graph() const { return DataFlowGraph::build(flows(), options_.inventory); }

 private:
  void record_frame(std::int64_t step, double t_s, const cosim::Bytes& bytes);

  CaptureOptions options_;
  std::vector<ProcessSample> samples_;
  std::vector<CapturedFrame> frames_;
  std::map<FlowKey, FlowRecord> flows_;
  std::vector<cosim::Event> events_;
};

Summary summarize(const std::vector<ProcessSample>& samples, const std::vector<FlowRecord>& flows,
                  std::size_t graph_nodes, std::size_t frames_captured, const net::NetStats& network,
                  std::size_t events, const CaptureOptions& options);

// --- exporters -------------------------------------------------------------

class UnsupportedFormat : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Writing an output failed; datasets must be complete, so this aborts a run.
class SinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_process_csv(std::ostream& out, const std::vector<ProcessSample>& samples);
void write_flows_csv(std::ostream& out, const std::vector<FlowRecord>& flows);
/// Classic little-endian pcap, version 2.4, Ethernet link type.
void write_pcap(std::ostream& out, const std::vector<CapturedFrame>& frames,
                std::int64_t midnight_unix);
/// Per-minute means of the process data, ready for plotting.
void write_plot_csv(std::ostream& out, const std::vector<ProcessSample>& samples);
void write_events_csv(std::ostream& out, const std::vector<cosim::Event>& events);
void write_summary_json(std::ostream& out, const Summary& summary);

inline const std::vector<std::string>& all_formats()
{
  static const std::vector<std::string> formats{"process", "flows", "pcap", "graph",
                                                "plot",    "events", "summary"};
  return formats;
}

/// Throws UnsupportedFormat for a name not in all_formats().
void check_formats(const std::vector<std::string>& formats);

struct Dataset {
  const Recorder* recorder = nullptr;
  Summary summary;
};

/// Writes the selected formats into dir (created if missing). Returns the
/// written paths. Throws SinkError when a file cannot be written.
std::vector<std::filesystem::path> export_dataset(const std::filesystem::path& dir,
                                                  const std::vector<std::string>& formats,
                                                  const Dataset& data);

/// Shortest decimal that round-trips.
std::string format_number(double value);

}  // namespace cpt::capture
