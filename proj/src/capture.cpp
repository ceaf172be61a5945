#include "cpt/capture.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "cpt/devices.h"
#include "cpt/time_of_day.h"

namespace cpt::capture {

namespace {

double as_double(const cosim::Payload& p, double fallback = 0.0)
{
  if (const auto* v = std::get_if<double>(&p)) {
    return *v;
  }
  return fallback;
}

std::string csv_quote(const std::string& text)
{
  if (text.find_first_of(",\"\n") == std::string::npos) {
    return text;
  }
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + '"';
}

template <class T>
void put_le(std::ostream& out, T value)
{
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

}  // namespace

std::string format_number(double value)
{
  if (value == 0.0) {
    return "0";  // also folds -0
  }
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::int64_t unix_midnight(std::string_view iso_date)
{
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const char* p = iso_date.data();
  const char* end = p + iso_date.size();
  auto r1 = std::from_chars(p, end, y);
  if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != '-') {
    throw std::invalid_argument("date must be YYYY-MM-DD: " + std::string(iso_date));
  }
  auto r2 = std::from_chars(r1.ptr + 1, end, m);
  if (r2.ec != std::errc{} || r2.ptr == end || *r2.ptr != '-') {
    throw std::invalid_argument("date must be YYYY-MM-DD: " + std::string(iso_date));
  }
  auto r3 = std::from_chars(r2.ptr + 1, end, d);
  if (r3.ec != std::errc{} || r3.ptr != end) {
    throw std::invalid_argument("date must be YYYY-MM-DD: " + std::string(iso_date));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) {
    throw std::invalid_argument("no such date: " + std::string(iso_date));
  }
  return std::chrono::sys_days{ymd}.time_since_epoch().count() * 86400LL;
}

// --- graph ---------------------------------------------------------------

DataFlowGraph DataFlowGraph::build(const std::vector<FlowRecord>& flows,
                                   const std::vector<Endpoint>& inventory)
{
  auto label = [&](net::MacAddr mac, net::Ipv4Addr ip) {
    const Endpoint* by_mac = nullptr;
    const Endpoint* by_ip = nullptr;
    for (const auto& e : inventory) {
      if (e.mac == mac) by_mac = &e;
      if (e.ip == ip) by_ip = &e;
    }
    if (by_mac && by_mac == by_ip) {
      return by_mac->role;
    }
    if (by_mac && by_ip) {
      return by_mac->role + "-as-" + by_ip->role;
    }
    return std::string(by_mac ? by_mac->role : by_ip ? by_ip->role : "unknown");
  };

  std::map<std::pair<net::MacAddr, net::Ipv4Addr>, std::size_t> index;
  std::set<std::pair<net::MacAddr, net::Ipv4Addr>> seen;
  for (const auto& f : flows) {
    seen.insert({f.key.src_mac, f.key.src_ip});
    seen.insert({f.key.dst_mac, f.key.dst_ip});
  }
  DataFlowGraph g;
  for (const auto& [mac, ip] : seen) {
    index[{mac, ip}] = g.nodes_.size();
    g.nodes_.push_back(GraphNode{mac, ip, label(mac, ip)});
  }
  for (const auto& f : flows) {
    g.edges_.push_back(GraphEdge{index.at({f.key.src_mac, f.key.src_ip}),
                                 index.at({f.key.dst_mac, f.key.dst_ip}), f.frames, f.bytes});
  }
  return g;
}

std::map<net::Ipv4Addr, std::set<net::MacAddr>> DataFlowGraph::macs_per_ip() const
{
  std::map<net::Ipv4Addr, std::set<net::MacAddr>> out;
  for (const auto& n : nodes_) {
    out[n.ip].insert(n.mac);
  }
  return out;
}

std::optional<GraphNode> DataFlowGraph::star_center() const
{
  if (edges_.empty()) {
    return std::nullopt;
  }
  for (std::size_t c : {edges_.front().from, edges_.front().to}) {
    const bool all = std::all_of(edges_.begin(), edges_.end(),
                                 [c](const GraphEdge& e) { return e.from == c || e.to == c; });
    if (all) {
      return nodes_[c];
    }
  }
  return std::nullopt;
}

void DataFlowGraph::write(std::ostream& out) const
{
  out << "# cpt data-flow graph v1\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    out << "node " << i << ' ' << nodes_[i].mac.str() << ' ' << nodes_[i].ip.str() << ' '
        << nodes_[i].role << '\n';
  }
  for (const auto& e : edges_) {
    out << "edge " << e.from << ' ' << e.to << ' ' << e.frames << ' ' << e.bytes << '\n';
  }
}

// --- recorder ------------------------------------------------------------

Recorder::Recorder(CaptureOptions options) : options_(std::move(options)) {}

void Recorder::on_step(const cosim::StepReport& report)
{
  ProcessSample s;
  s.t_s = report.time_s;
  for (const auto& r : report.records) {
    const auto& name = r.signal;
    if (name == devices::sig::pv_output) {
      s.pv_kw = as_double(r.value);
    } else if (name == devices::sig::pv_available) {
      s.pv_available_kw = as_double(r.value);
    } else if (name == devices::sig::pv_limit) {
      if (const auto* v = std::get_if<double>(&r.value)) s.pv_limit_kw = *v;
    } else if (name == devices::sig::bss_actual) {
      s.bss_kw = as_double(r.value);
    } else if (name == devices::sig::bss_setpoint) {
      s.bss_setpoint_kw = as_double(r.value);
    } else if (name == devices::sig::bss_soc_pct) {
      s.soc_pct = as_double(r.value);
    } else if (name == devices::sig::bss_soc_kwh) {
      s.soc_kwh = as_double(r.value);
    } else if (name == devices::sig::load_demand) {
      s.load_kw = as_double(r.value);
    } else if (name == net::kWireSignal) {
      if (const auto* batch = std::get_if<cosim::FrameBatch>(&r.value)) {
        for (const auto& bytes : *batch) {
          record_frame(report.step, report.time_s, bytes);
        }
      }
    }
  }
  s.transformer_kw = s.load_kw + s.bss_kw - s.pv_kw;
  if (options_.attack_window) {
    s.attack_active =
        s.t_s >= options_.attack_window->first && s.t_s < options_.attack_window->second;
  }
  samples_.push_back(s);
  events_.insert(events_.end(), report.events.begin(), report.events.end());
}

void Recorder::on_lifecycle(const cosim::Event& event)
{
  events_.push_back(event);
}

void Recorder::record_frame(std::int64_t step, double t_s, const cosim::Bytes& bytes)
{
  frames_.push_back(CapturedFrame{step, t_s, bytes});
  net::EthernetFrame frame;
  try {
    frame = net::decode_frame(bytes);
  } catch (const net::FrameError&) {
    return;
  }
  if (frame.ethertype != net::kEtherTypeIpv4 || frame.payload.size() < net::kIpv4HeaderSize) {
    return;
  }
  const auto& p = frame.payload;
  auto ip_at = [&p](std::size_t at) {
    return net::Ipv4Addr(static_cast<std::uint32_t>(p[at]) << 24 |
                         static_cast<std::uint32_t>(p[at + 1]) << 16 |
                         static_cast<std::uint32_t>(p[at + 2]) << 8 | p[at + 3]);
  };
  FlowKey key{frame.src, frame.dst, ip_at(12), ip_at(16)};
  auto [it, inserted] = flows_.try_emplace(key, FlowRecord{key, 0, 0, t_s, t_s});
  auto& f = it->second;
  ++f.frames;
  f.bytes += bytes.size();
  f.last_ts = t_s;
}

std::vector<FlowRecord> Recorder::flows() const
{
  std::vector<FlowRecord> out;
  out.reserve(flows_.size());
  for (const auto& [key, rec] : flows_) {
    out.push_back(rec);
  }
  return out;
}

// --- summary -------------------------------------------------------------

Summary summarize(const std::vector<ProcessSample>& samples, const std::vector<FlowRecord>& flows,
                  std::size_t graph_nodes, std::size_t frames_captured, const net::NetStats& network,
                  std::size_t events, const CaptureOptions& options)
{
  Summary s;
  s.step_s = options.step_s;
  s.steps = static_cast<std::int64_t>(samples.size());
  s.flows = flows.size();
  s.graph_nodes = graph_nodes;
  s.frames_captured = frames_captured;
  s.network = network;
  s.events = events;
  if (samples.empty()) {
    return s;
  }
  const double h = options.step_s / 3600.0;
  std::vector<double> abs_t;
  abs_t.reserve(samples.size());
  std::size_t within = 0;
  s.soc_min_pct = samples.front().soc_pct;
  s.soc_max_pct = samples.front().soc_pct;
  WindowStats w;
  double window_sum = 0.0;
  for (const auto& x : samples) {
    const double a = std::abs(x.transformer_kw);
    abs_t.push_back(a);
    s.imbalance_kwh += a * h;
    s.peak_import_kw = std::max(s.peak_import_kw, x.transformer_kw);
    s.peak_export_kw = std::max(s.peak_export_kw, -x.transformer_kw);
    if (a <= options.deadband_kw) ++within;
    s.pv_energy_kwh += x.pv_kw * h;
    s.pv_curtailed_kwh += std::max(0.0, x.pv_available_kw - x.pv_kw) * h;
    s.soc_min_pct = std::min(s.soc_min_pct, x.soc_pct);
    s.soc_max_pct = std::max(s.soc_max_pct, x.soc_pct);
    if (x.attack_active) {
      ++w.steps;
      w.imbalance_kwh += a * h;
      window_sum += x.transformer_kw;
      w.peak_import_kw = std::max(w.peak_import_kw, x.transformer_kw);
    }
  }
  std::sort(abs_t.begin(), abs_t.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(abs_t.size())));
  s.p95_abs_transformer_kw = abs_t[std::max<std::size_t>(rank, 1) - 1];
  s.within_deadband_fraction = static_cast<double>(within) / static_cast<double>(samples.size());
  if (options.attack_window) {
    if (w.steps > 0) {
      w.mean_transformer_kw = window_sum / static_cast<double>(w.steps);
    }
    s.attack_window = w;
  }
  return s;
}

// --- writers -------------------------------------------------------------

void write_process_csv(std::ostream& out, const std::vector<ProcessSample>& samples)
{
  out << "t,pv_kw,bss_kw,load_kw,transformer_kw,soc_pct,attack_active\n";
  for (const auto& s : samples) {
    out << format_time_of_day(s.t_s) << ',' << format_number(s.pv_kw) << ','
        << format_number(s.bss_kw) << ',' << format_number(s.load_kw) << ','
        << format_number(s.transformer_kw) << ',' << format_number(s.soc_pct) << ','
        << (s.attack_active ? 1 : 0) << '\n';
  }
}

void write_flows_csv(std::ostream& out, const std::vector<FlowRecord>& flows)
{
  out << "src_mac,dst_mac,src_ip,dst_ip,frames,bytes,first_ts,last_ts\n";
  for (const auto& f : flows) {
    out << f.key.src_mac.str() << ',' << f.key.dst_mac.str() << ',' << f.key.src_ip.str() << ','
        << f.key.dst_ip.str() << ',' << f.frames << ',' << f.bytes << ','
        << format_time_of_day(f.first_ts) << ',' << format_time_of_day(f.last_ts) << '\n';
  }
}

void write_pcap(std::ostream& out, const std::vector<CapturedFrame>& frames,
                std::int64_t midnight_unix)
{
  put_le<std::uint32_t>(out, 0xa1b2c3d4u);
  put_le<std::uint16_t>(out, 2);
  put_le<std::uint16_t>(out, 4);
  put_le<std::int32_t>(out, 0);       // thiszone
  put_le<std::uint32_t>(out, 0);      // sigfigs
  put_le<std::uint32_t>(out, 65535);  // snaplen
  put_le<std::uint32_t>(out, 1);      // LINKTYPE_ETHERNET
  for (const auto& f : frames) {
    const double whole = std::floor(f.t_s);
    auto usec = static_cast<std::int64_t>(std::llround((f.t_s - whole) * 1e6));
    auto sec = midnight_unix + static_cast<std::int64_t>(whole);
    if (usec >= 1000000) {
      usec -= 1000000;
      ++sec;
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sec));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(usec));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.bytes.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.bytes.size()));
    out.write(reinterpret_cast<const char*>(f.bytes.data()),
              static_cast<std::streamsize>(f.bytes.size()));
  }
}

void write_plot_csv(std::ostream& out, const std::vector<ProcessSample>& samples)
{
  out << "minute,pv_kw,bss_kw,load_kw,transformer_kw,soc_pct,attack_active\n";
  std::size_t i = 0;
  while (i < samples.size()) {
    const double minute = std::floor(samples[i].t_s / 60.0) * 60.0;
    double pv = 0, bss = 0, load = 0, tr = 0, soc = 0;
    bool attack = false;
    std::size_t n = 0;
    for (; i < samples.size() && std::floor(samples[i].t_s / 60.0) * 60.0 == minute; ++i, ++n) {
      pv += samples[i].pv_kw;
      bss += samples[i].bss_kw;
      load += samples[i].load_kw;
      tr += samples[i].transformer_kw;
      soc += samples[i].soc_pct;
      attack = attack || samples[i].attack_active;
    }
    const double k = static_cast<double>(n);
    auto mean = [k](double v) { return format_number(std::round(v / k * 1e4) / 1e4); };
    out << format_time_of_day(minute).substr(0, 5) << ',' << mean(pv) << ',' << mean(bss) << ','
        << mean(load) << ',' << mean(tr) << ',' << mean(soc) << ',' << (attack ? 1 : 0) << '\n';
  }
}

void write_events_csv(std::ostream& out, const std::vector<cosim::Event>& events)
{
  out << "step,t,source,message\n";
  for (const auto& e : events) {
    out << e.step << ',' << format_time_of_day(e.time_s) << ',' << csv_quote(e.source) << ','
        << csv_quote(e.message) << '\n';
  }
}

void write_summary_json(std::ostream& out, const Summary& s)
{
  nlohmann::ordered_json j;
  j["steps"] = s.steps;
  j["step_s"] = s.step_s;
  j["imbalance_kwh"] = s.imbalance_kwh;
  j["peak_import_kw"] = s.peak_import_kw;
  j["peak_export_kw"] = s.peak_export_kw;
  j["p95_abs_transformer_kw"] = s.p95_abs_transformer_kw;
  j["within_deadband_fraction"] = s.within_deadband_fraction;
  j["pv_energy_kwh"] = s.pv_energy_kwh;
  j["pv_curtailed_kwh"] = s.pv_curtailed_kwh;
  j["soc_min_pct"] = s.soc_min_pct;
  j["soc_max_pct"] = s.soc_max_pct;
  if (s.attack_window) {
    j["attack_window"] = {{"steps", s.attack_window->steps},
                          {"imbalance_kwh", s.attack_window->imbalance_kwh},
                          {"mean_transformer_kw", s.attack_window->mean_transformer_kw},
                          {"peak_import_kw", s.attack_window->peak_import_kw}};
  } else {
    j["attack_window"] = nullptr;
  }
  j["flows"] = s.flows;
  j["graph_nodes"] = s.graph_nodes;
  j["frames_captured"] = s.frames_captured;
  j["network"] = {{"sent", s.network.sent},
                  {"delivered", s.network.delivered},
                  {"flooded", s.network.flooded},
                  {"dropped", s.network.dropped}};
  j["events"] = s.events;
  out << j.dump(2) << '\n';
}

void check_formats(const std::vector<std::string>& formats)
{
  for (const auto& f : formats) {
    if (std::find(all_formats().begin(), all_formats().end(), f) == all_formats().end()) {
      throw UnsupportedFormat("unsupported output format '" + f + "'");
    }
  }
}

std::vector<std::filesystem::path> export_dataset(const std::filesystem::path& dir,
                                                  const std::vector<std::string>& formats,
                                                  const Dataset& data)
{
  check_formats(formats);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw SinkError("cannot create " + dir.string() + ": " + ec.message());
  }
  const auto& rec = *data.recorder;
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, auto&& writer) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw SinkError("cannot open " + path.string());
    }
    writer(out);
    out.flush();
    if (!out) {
      throw SinkError("write failed: " + path.string());
    }
    written.push_back(path);
  };
  for (const auto& f : formats) {
    if (f == "process") {
      emit("process.csv", [&](std::ostream& o) { write_process_csv(o, rec.samples()); });
    } else if (f == "flows") {
      emit("flows.csv", [&](std::ostream& o) { write_flows_csv(o, rec.flows()); });
    } else if (f == "pcap") {
      emit("capture.pcap", [&](std::ostream& o) {
        write_pcap(o, rec.frames(), rec.options().pcap_midnight_unix);
      });
    } else if (f == "graph") {
      emit("flowgraph.txt", [&](std::ostream& o) { rec.graph().write(o); });
    } else if (f == "plot") {
      emit("plot.csv", [&](std::ostream& o) { write_plot_csv(o, rec.samples()); });
    } else if (f == "events") {
      emit("events.csv", [&](std::ostream& o) { write_events_csv(o, rec.events()); });
    } else if (f == "summary") {
      emit("summary.json", [&](std::ostream& o) { write_summary_json(o, data.summary); });
    }
  }
  return written;
}

}  // namespace cpt::capture
