#include "cpt/ems.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cpt::ems {

namespace {

constexpr std::uint16_t kFirstLocalPort = 40001;

std::int64_t steps_for(double seconds, double step_s)
{
  return std::max<std::int64_t>(1, std::llround(seconds / step_s));
}

std::uint64_t cycle_of(const std::string& tag)
{
  const auto colon = tag.find(':');
  return colon == std::string::npos ? 0 : std::stoull(tag.substr(colon + 1));
}

}  // namespace

void ControlPolicy::validate(double step_s) const
{
  if (!(period_s >= step_s)) {
    throw std::invalid_argument("EMS period must be at least one scheduler step");
  }
  if (!(deadband_kw >= 0.0)) {
    throw std::invalid_argument("EMS deadband must be >= 0");
  }
  if (!(bss_rated_kw > 0.0)) {
    throw std::invalid_argument("EMS battery rating must be > 0");
  }
  if (!(timeout_s >= step_s)) {
    throw std::invalid_argument("EMS request timeout must be at least one step");
  }
}

std::optional<SetpointCommand> control_step(double meter_kw, double bss_soc_pct,
                                            double previous_setpoint_kw,
                                            const ControlPolicy& policy)
{
  if (!(std::abs(meter_kw) > policy.deadband_kw)) {
    return std::nullopt;
  }
  double next = std::clamp(previous_setpoint_kw - meter_kw, -policy.bss_rated_kw,
                           policy.bss_rated_kw);
  if (bss_soc_pct >= 100.0) {
    next = std::min(next, 0.0);
  } else if (bss_soc_pct <= 0.0) {
    next = std::max(next, 0.0);
  }
  const auto raw = modbus::encode_fp(next);
  return SetpointCommand{modbus::decode_fp(raw), raw};
}

EmsController::EmsController(net::Host host, Targets targets, ControlPolicy policy, double step_s)
    : host_(std::move(host)),
      targets_(targets),
      policy_(policy),
      period_steps_(steps_for(policy.period_s, step_s)),
      client_(kFirstLocalPort, steps_for(policy.timeout_s, step_s))
{
  policy_.validate(step_s);
}

cosim::SimulatorHandle EmsController::handle() const
{
  return {host_.id(), {net::rx_signal(host_.id())}, {net::tx_signal(host_.id())}};
}

const EmsStats& EmsController::stats() const
{
  stats_.client = client_.stats();
  return stats_;
}

void EmsController::poll_cycle(std::int64_t step)
{
  if (!cycle_.decided && !cycle_.failed) {
    ++stats_.cycles_skipped;
  }
  cycle_ = Cycle{cycle_.id + 1, {}, false, false};
  ++stats_.cycles;
  const auto id = std::to_string(cycle_.id);
  using modbus::read_holding_request;
  namespace reg = modbus::reg;
  client_.send(host_, targets_.meter,
               read_holding_request(0, targets_.meter_unit, reg::meter_transformer, 1), step,
               "meter:" + id);
  client_.send(host_, targets_.bss, read_holding_request(0, targets_.bss_unit, reg::bss_actual, 2),
               step, "bss:" + id);
  client_.send(host_, targets_.pv, read_holding_request(0, targets_.pv_unit, reg::pv_output, 2),
               step, "pv:" + id);
  stats_.reads += 3;
}

void EmsController::handle_response(const modbus::Completed& done, cosim::StepContext& ctx)
{
  const auto& tag = done.request.tag;
  if (tag.rfind("write", 0) == 0) {
    if (done.response.is_exception()) {
      ctx.emit(tag + " rejected with exception " +
               std::to_string(static_cast<int>(done.response.data.at(0))));
    }
    return;
  }
  if (cycle_of(tag) != cycle_.id) {
    return;  // late answer from an older cycle
  }
  std::vector<std::uint16_t> values;
  try {
    values = modbus::read_response_values(done.response);
  } catch (const std::exception& ex) {
    cycle_.failed = true;
    ++stats_.cycles_skipped;
    ctx.emit("poll failure (" + tag + "): " + ex.what() + "; holding setpoint");
    return;
  }
  auto& m = cycle_.values;
  if (tag.rfind("meter", 0) == 0 && values.size() >= 1) {
    m.transformer_kw = modbus::decode_fp(values[0]);
  } else if (tag.rfind("bss", 0) == 0 && values.size() >= 2) {
    m.bss_actual_kw = modbus::decode_fp(values[0]);
    m.bss_soc_pct = modbus::decode_fp(values[1]);
  } else if (tag.rfind("pv", 0) == 0 && values.size() >= 2) {
    m.pv_output_kw = modbus::decode_fp(values[0]);
    m.pv_limit_raw = values[1];
    if (policy_.manages_pv_limit && values[1] != modbus::reg::no_limit) {
      client_.send(host_, targets_.pv,
                   modbus::write_single_request(0, targets_.pv_unit, modbus::reg::pv_limit,
                                                modbus::reg::no_limit),
                   ctx.step(), "write:pv");
      ++stats_.writes;
      ++stats_.pv_limit_writes;
    }
  }
}

void EmsController::maybe_decide(cosim::StepContext& ctx)
{
  if (cycle_.decided || cycle_.failed || !cycle_.values.transformer_kw ||
      !cycle_.values.bss_soc_pct) {
    return;
  }
  cycle_.decided = true;
  auto cmd = control_step(*cycle_.values.transformer_kw, *cycle_.values.bss_soc_pct,
                          last_setpoint_kw_, policy_);
  if (!cmd) {
    return;
  }
  last_setpoint_kw_ = cmd->setpoint_kw;
  client_.send(host_, targets_.bss,
               modbus::write_single_request(0, targets_.bss_unit, modbus::reg::bss_setpoint,
                                            cmd->register_value),
               ctx.step(), "write:bss");
  ++stats_.writes;
}

void EmsController::step(cosim::StepContext& ctx)
{
  const auto step = ctx.step();
  auto received = host_.receive(ctx.input_frames(net::rx_signal(host_.id())), step);
  for (const auto& done : client_.accept(received.segments)) {
    handle_response(done, ctx);
  }
  maybe_decide(ctx);

  for (const auto& lost : client_.expire(step)) {
    if (lost.tag.rfind("write", 0) == 0) {
      ctx.emit(lost.tag + " timed out");
      continue;
    }
    if (cycle_of(lost.tag) == cycle_.id && !cycle_.decided && !cycle_.failed) {
      const bool needed = lost.tag.rfind("pv", 0) != 0;
      if (needed) {
        cycle_.failed = true;
        ++stats_.cycles_skipped;
        ctx.emit("poll failure (" + lost.tag + " timed out); cycle skipped, holding setpoint");
        continue;
      }
    }
    ctx.emit("request " + lost.tag + " timed out");
  }
  for (auto ip : host_.expire(step)) {
    ctx.emit("cannot resolve " + ip.str());
  }

  if (step % period_steps_ == 0) {
    poll_cycle(step);
  }
  ctx.publish(net::tx_signal(host_.id()), host_.take_outbox());
}

}  // namespace cpt::ems
