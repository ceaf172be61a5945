#include "cpt/devices.h"

#include <cmath>
#include <cstdio>

namespace cpt::devices {

ProfilePlayer::ProfilePlayer(profiles::TimeSeriesProfile load, profiles::TimeSeriesProfile pv,
                             double epoch_s)
    : load_(std::move(load)), pv_(std::move(pv)), epoch_s_(epoch_s)
{
}

cosim::SimulatorHandle ProfilePlayer::handle() const
{
  return {"profiles", {}, {sig::profile_load, sig::profile_pv}};
}

void ProfilePlayer::step(cosim::StepContext& ctx)
{
  const double t = ctx.time_s() - epoch_s_;
  ctx.publish(sig::profile_load, profiles::sample(load_, t));
  ctx.publish(sig::profile_pv, profiles::sample(pv_, t));
}

ModbusDevice::ModbusDevice(net::Host host, modbus::RegisterMap map)
    : host_(std::move(host)), map_(std::move(map))
{
}

std::vector<modbus::RegisterWrite> ModbusDevice::serve_frames(cosim::StepContext& ctx)
{
  std::vector<modbus::RegisterWrite> writes;
  auto received = host_.receive(ctx.input_frames(net::rx_signal(host_.id())), ctx.step());
  for (const auto& seg : received.segments) {
    if (seg.dst_port != modbus::kTcpPort) {
      continue;
    }
    modbus::Adu request;
    try {
      request = modbus::decode(seg.payload);
    } catch (const modbus::FrameError&) {
      ++stats_.malformed;
      continue;
    }
    ++stats_.requests;
    auto result = modbus::serve(request, map_);
    if (result.response.is_exception()) {
      ++stats_.exceptions;
    }
    writes.insert(writes.end(), result.writes.begin(), result.writes.end());
    host_.send_ip(seg.src_ip, modbus::kTcpPort, seg.src_port, modbus::encode(result.response),
                  ctx.step());
  }
  for (auto ip : host_.expire(ctx.step())) {
    ctx.emit("cannot resolve " + ip.str() + ", response dropped");
  }
  return writes;
}

void ModbusDevice::flush(cosim::StepContext& ctx)
{
  ctx.publish(net::tx_signal(host_.id()), host_.take_outbox());
}

// --- PV ------------------------------------------------------------------

PvInverter::PvInverter(net::Host host, grid::PvState initial)
    : ModbusDevice(std::move(host), modbus::make_pv_map()), state_(initial)
{
  if (state_.limit_kw) {
    map_.set_kw(modbus::reg::pv_limit, *state_.limit_kw);
    map_.set_kw(modbus::reg::pv_limit_readback, *state_.limit_kw);
  }
}

cosim::SimulatorHandle PvInverter::handle() const
{
  return {host_.id(),
          {net::rx_signal(host_.id()), sig::profile_pv},
          {net::tx_signal(host_.id()), sig::pv_output, sig::pv_available, sig::pv_limit}};
}

void PvInverter::step(cosim::StepContext& ctx)
{
  for (const auto& w : serve_frames(ctx)) {
    if (w.address == modbus::reg::pv_limit) {
      if (w.value == modbus::reg::no_limit) {
        state_.limit_kw.reset();
      } else {
        state_.limit_kw = modbus::decode_fp(w.value);
      }
      if (state_.limit_kw) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "limit set to %.2f kW", *state_.limit_kw);
        ctx.emit(buf);
      } else {
        ctx.emit("limit cleared");
      }
    }
  }
  state_.available_kw = ctx.input_value(sig::profile_pv, state_.available_kw);
  state_ = grid::step_pv(state_);

  map_.set_kw(modbus::reg::pv_output, state_.output_kw);
  map_.set(modbus::reg::pv_limit_readback,
           state_.limit_kw ? modbus::encode_fp(*state_.limit_kw) : modbus::reg::no_limit);

  ctx.publish(sig::pv_output, state_.output_kw);
  ctx.publish(sig::pv_available, state_.available_kw);
  ctx.publish(sig::pv_limit,
              state_.limit_kw ? cosim::Payload{*state_.limit_kw} : cosim::Payload{});
  flush(ctx);
}

// --- battery -------------------------------------------------------------

BssInverter::BssInverter(net::Host host, grid::BssState initial)
    : ModbusDevice(std::move(host), modbus::make_bss_map()), state_(initial)
{
  map_.set_kw(modbus::reg::bss_soc, state_.soc_pct());
  map_.set_kw(modbus::reg::bss_setpoint, state_.setpoint_kw);
}

cosim::SimulatorHandle BssInverter::handle() const
{
  return {host_.id(),
          {net::rx_signal(host_.id())},
          {net::tx_signal(host_.id()), sig::bss_actual, sig::bss_setpoint, sig::bss_soc_kwh,
           sig::bss_soc_pct}};
}

void BssInverter::step(cosim::StepContext& ctx)
{
  for (const auto& w : serve_frames(ctx)) {
    if (w.address == modbus::reg::bss_setpoint) {
      state_.setpoint_kw = modbus::decode_fp(w.value);
    }
  }
  state_ = grid::step_bss(state_, ctx.step_s());

  map_.set_kw(modbus::reg::bss_actual, state_.actual_kw);
  map_.set_kw(modbus::reg::bss_soc, state_.soc_pct());

  ctx.publish(sig::bss_actual, state_.actual_kw);
  ctx.publish(sig::bss_setpoint, state_.setpoint_kw);
  ctx.publish(sig::bss_soc_kwh, state_.soc_kwh);
  ctx.publish(sig::bss_soc_pct, state_.soc_pct());
  flush(ctx);
}

// --- load bank -----------------------------------------------------------

LoadBank::LoadBank(net::Host host, grid::LoadState initial)
    : ModbusDevice(std::move(host), modbus::make_load_bank_map()), state_(initial)
{
}

cosim::SimulatorHandle LoadBank::handle() const
{
  return {host_.id(),
          {net::rx_signal(host_.id()), sig::profile_load},
          {net::tx_signal(host_.id()), sig::load_demand}};
}

void LoadBank::step(cosim::StepContext& ctx)
{
  serve_frames(ctx);
  state_ = grid::step_load(state_, ctx.input_value(sig::profile_load, state_.demand_kw));
  map_.set_kw(modbus::reg::load_demand, state_.demand_kw);
  ctx.publish(sig::load_demand, state_.demand_kw);
  flush(ctx);
}

// --- meter ---------------------------------------------------------------

Meter::Meter(net::Host host, double transformer_rated_kva)
    : ModbusDevice(std::move(host), modbus::make_meter_map()), rated_kva_(transformer_rated_kva)
{
}

cosim::SimulatorHandle Meter::handle() const
{
  return {host_.id(),
          {net::rx_signal(host_.id()), sig::load_demand, sig::pv_output, sig::bss_actual},
          {net::tx_signal(host_.id()), sig::transformer}};
}

void Meter::step(cosim::StepContext& ctx)
{
  reading_kw_ = ctx.input_value(sig::load_demand) + ctx.input_value(sig::bss_actual) -
                ctx.input_value(sig::pv_output);
  map_.set_kw(modbus::reg::meter_transformer, reading_kw_);
  const bool over = std::abs(reading_kw_) > rated_kva_;
  if (over != overloaded_) {
    ctx.emit(over ? "transformer overload" : "transformer back within rating");
    overloaded_ = over;
  }
  serve_frames(ctx);
  ctx.publish(sig::transformer, reading_kw_);
  flush(ctx);
}

}  // namespace cpt::devices
