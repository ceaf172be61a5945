#include "cpt/modbus.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpt::modbus {

namespace {

void put16(Bytes& out, std::uint16_t v)
{
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at)
{
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

const char* exception_name(ExceptionCode code)
{
  switch (code) {
    case ExceptionCode::illegal_function: return "illegal function";
    case ExceptionCode::illegal_data_address: return "illegal data address";
    case ExceptionCode::illegal_data_value: return "illegal data value";
  }
  return "unknown exception";
}

}  // namespace

ModbusException::ModbusException(ExceptionCode code)
    : std::runtime_error(std::string("modbus exception: ") + exception_name(code)), code_(code)
{
}

Adu make_adu(std::uint16_t transaction_id, std::uint8_t unit_id, std::uint8_t function, Bytes data)
{
  if (data.size() + 2 > std::numeric_limits<std::uint16_t>::max()) {
    throw FrameError("PDU too large");
  }
  Adu adu;
  adu.header = MbapHeader{transaction_id, 0, static_cast<std::uint16_t>(data.size() + 2), unit_id};
  adu.function = function;
  adu.data = std::move(data);
  return adu;
}

Bytes encode(const Adu& adu)
{
  if (adu.header.length != adu.data.size() + 2) {
    throw FrameError("MBAP length does not match the PDU");
  }
  Bytes out;
  out.reserve(kMbapSize + 1 + adu.data.size());
  put16(out, adu.header.transaction_id);
  put16(out, adu.header.protocol_id);
  put16(out, adu.header.length);
  out.push_back(adu.header.unit_id);
  out.push_back(adu.function);
  out.insert(out.end(), adu.data.begin(), adu.data.end());
  return out;
}

Adu decode(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kMbapSize + 1) {
    throw FrameError("truncated Modbus TCP frame");
  }
  Adu adu;
  adu.header.transaction_id = get16(bytes, 0);
  adu.header.protocol_id = get16(bytes, 2);
  adu.header.length = get16(bytes, 4);
  adu.header.unit_id = bytes[6];
  if (adu.header.protocol_id != 0) {
    throw FrameError("protocol id is not 0");
  }
  if (adu.header.length < 2 || bytes.size() != kMbapSize - 1 + adu.header.length) {
    throw FrameError("MBAP length mismatch");
  }
  adu.function = bytes[7];
  adu.data.assign(bytes.begin() + kMbapSize + 1, bytes.end());
  if (adu.is_exception() && adu.data.size() != 1) {
    throw FrameError("exception response must carry one code byte");
  }
  return adu;
}

Adu read_holding_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                         std::uint16_t quantity)
{
  Bytes d;
  put16(d, address);
  put16(d, quantity);
  return make_adu(tid, unit, fc::read_holding, std::move(d));
}

Adu write_single_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                         std::uint16_t value)
{
  Bytes d;
  put16(d, address);
  put16(d, value);
  return make_adu(tid, unit, fc::write_single, std::move(d));
}

Adu write_multiple_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                           std::span<const std::uint16_t> values)
{
  Bytes d;
  put16(d, address);
  put16(d, static_cast<std::uint16_t>(values.size()));
  d.push_back(static_cast<std::uint8_t>(values.size() * 2));
  for (auto v : values) {
    put16(d, v);
  }
  return make_adu(tid, unit, fc::write_multiple, std::move(d));
}

Adu exception_response(const Adu& request, ExceptionCode code)
{
  return make_adu(request.header.transaction_id, request.header.unit_id,
                  static_cast<std::uint8_t>((request.function & 0x7f) | fc::exception_flag),
                  Bytes{static_cast<std::uint8_t>(code)});
}

std::vector<std::uint16_t> read_response_values(const Adu& response)
{
  if (response.is_exception()) {
    throw ModbusException(static_cast<ExceptionCode>(response.data.at(0)));
  }
  if (response.function != fc::read_holding || response.data.empty() ||
      response.data[0] != response.data.size() - 1 || response.data[0] % 2 != 0) {
    throw FrameError("malformed read holding registers response");
  }
  std::vector<std::uint16_t> values;
  for (std::size_t i = 1; i + 1 < response.data.size(); i += 2) {
    values.push_back(get16(response.data, i));
  }
  return values;
}

std::optional<SingleWrite> parse_write_single(const Adu& adu)
{
  if (adu.function != fc::write_single || adu.data.size() != 4) {
    return std::nullopt;
  }
  return SingleWrite{get16(adu.data, 0), get16(adu.data, 2)};
}

double decode_fp(std::uint16_t raw)
{
  return static_cast<double>(static_cast<std::int16_t>(raw)) / 100.0;
}

std::uint16_t encode_fp(double value)
{
  if (std::isnan(value)) {
    throw std::invalid_argument("cannot encode NaN as fixed point");
  }
  const double counts = std::clamp(std::round(value * 100.0), -32768.0, 32767.0);
  return static_cast<std::uint16_t>(static_cast<std::int16_t>(counts));
}

const char* to_string(DeviceType type)
{
  switch (type) {
    case DeviceType::pv: return "PV";
    case DeviceType::bss: return "BSS";
    case DeviceType::load_bank: return "LoadBank";
    case DeviceType::meter: return "Meter";
  }
  return "unknown";
}

RegisterMap::RegisterMap(DeviceType type) : type_(type)
{
  registers_[reg::device_type] =
      Slot{RegisterSpec{Unit::device_type, false}, static_cast<std::uint16_t>(type)};
}

void RegisterMap::define(std::uint16_t address, RegisterSpec spec, std::uint16_t initial)
{
  if (address == reg::device_type) {
    throw std::invalid_argument("register 0 is reserved for the device type");
  }
  registers_[address] = Slot{spec, initial};
}

const RegisterSpec& RegisterMap::spec(std::uint16_t address) const
{
  auto it = registers_.find(address);
  if (it == registers_.end()) {
    throw ModbusException(ExceptionCode::illegal_data_address);
  }
  return it->second.spec;
}

std::uint16_t RegisterMap::get(std::uint16_t address) const
{
  auto it = registers_.find(address);
  if (it == registers_.end()) {
    throw ModbusException(ExceptionCode::illegal_data_address);
  }
  return it->second.value;
}

void RegisterMap::set(std::uint16_t address, std::uint16_t value)
{
  auto it = registers_.find(address);
  if (it == registers_.end()) {
    throw ModbusException(ExceptionCode::illegal_data_address);
  }
  it->second.value = value;
}

RegisterMap make_pv_map()
{
  RegisterMap m(DeviceType::pv);
  m.define(reg::pv_output, RegisterSpec{Unit::power_kw, false});
  m.define(reg::pv_limit_readback, RegisterSpec{Unit::power_kw, false}, reg::no_limit);
  m.define(reg::pv_limit, RegisterSpec{Unit::power_kw, true, 0, 32766, true}, reg::no_limit);
  return m;
}

RegisterMap make_bss_map()
{
  RegisterMap m(DeviceType::bss);
  m.define(reg::bss_actual, RegisterSpec{Unit::power_kw, false});
  m.define(reg::bss_soc, RegisterSpec{Unit::percent, false});
  m.define(reg::bss_setpoint, RegisterSpec{Unit::power_kw, true});
  return m;
}

RegisterMap make_load_bank_map()
{
  RegisterMap m(DeviceType::load_bank);
  m.define(reg::load_demand, RegisterSpec{Unit::power_kw, false});
  return m;
}

RegisterMap make_meter_map()
{
  RegisterMap m(DeviceType::meter);
  m.define(reg::meter_transformer, RegisterSpec{Unit::power_kw, false});
  return m;
}

namespace {

std::optional<ExceptionCode> check_write(const RegisterMap& map, std::uint16_t address,
                                         std::uint16_t value)
{
  if (!map.mapped(address) || !map.spec(address).writable) {
    return ExceptionCode::illegal_data_address;
  }
  const auto& spec = map.spec(address);
  if (spec.accepts_no_limit && value == reg::no_limit) {
    return std::nullopt;
  }
  const auto counts = static_cast<std::int16_t>(value);
  if (counts < spec.min_count || counts > spec.max_count) {
    return ExceptionCode::illegal_data_value;
  }
  return std::nullopt;
}

}  // namespace

ServeResult serve(const Adu& request, RegisterMap& map)
{
  const auto& d = request.data;
  ServeResult result;
  auto fail = [&](ExceptionCode code) {
    result.response = exception_response(request, code);
    result.writes.clear();
    return result;
  };

  switch (request.function) {
    case fc::read_holding: {
      if (d.size() != 4) {
        return fail(ExceptionCode::illegal_data_value);
      }
      const auto address = get16(d, 0);
      const auto quantity = get16(d, 2);
      if (quantity < 1 || quantity > 125) {
        return fail(ExceptionCode::illegal_data_value);
      }
      Bytes out{static_cast<std::uint8_t>(quantity * 2)};
      for (std::uint32_t a = address; a < static_cast<std::uint32_t>(address) + quantity; ++a) {
        if (a > 0xffff || !map.mapped(static_cast<std::uint16_t>(a))) {
          return fail(ExceptionCode::illegal_data_address);
        }
        put16(out, map.get(static_cast<std::uint16_t>(a)));
      }
      result.response =
          make_adu(request.header.transaction_id, request.header.unit_id, fc::read_holding, out);
      return result;
    }
    case fc::write_single: {
      if (d.size() != 4) {
        return fail(ExceptionCode::illegal_data_value);
      }
      const auto address = get16(d, 0);
      const auto value = get16(d, 2);
      if (auto ex = check_write(map, address, value)) {
        return fail(*ex);
      }
      map.set(address, value);
      result.writes.push_back(RegisterWrite{address, value});
      result.response = make_adu(request.header.transaction_id, request.header.unit_id,
                                 fc::write_single, d);
      return result;
    }
    case fc::write_multiple: {
      if (d.size() < 5) {
        return fail(ExceptionCode::illegal_data_value);
      }
      const auto address = get16(d, 0);
      const auto quantity = get16(d, 2);
      if (quantity < 1 || quantity > 123 || d[4] != quantity * 2 ||
          d.size() != 5 + static_cast<std::size_t>(quantity) * 2) {
        return fail(ExceptionCode::illegal_data_value);
      }
      std::vector<RegisterWrite> writes;
      for (std::uint32_t i = 0; i < quantity; ++i) {
        const auto a = static_cast<std::uint32_t>(address) + i;
        if (a > 0xffff) {
          return fail(ExceptionCode::illegal_data_address);
        }
        const auto value = get16(d, 5 + i * 2);
        if (auto ex = check_write(map, static_cast<std::uint16_t>(a), value)) {
          return fail(*ex);
        }
        writes.push_back(RegisterWrite{static_cast<std::uint16_t>(a), value});
      }
      for (const auto& w : writes) {
        map.set(w.address, w.value);
      }
      result.writes = std::move(writes);
      Bytes echo(d.begin(), d.begin() + 4);
      result.response = make_adu(request.header.transaction_id, request.header.unit_id,
                                 fc::write_multiple, std::move(echo));
      return result;
    }
    default:
      return fail(ExceptionCode::illegal_function);
  }
}

double to_physical(Unit unit, std::uint16_t raw)
{
  switch (unit) {
    case Unit::device_type: return static_cast<double>(raw);
    case Unit::power_kw:
    case Unit::percent: return decode_fp(raw);
  }
  return 0.0;
}

std::vector<double> poll(RegisterMap& map, std::span<const std::uint16_t> addresses)
{
  std::vector<double> out;
  out.reserve(addresses.size());
  for (auto address : addresses) {
    const auto result = serve(read_holding_request(0, 0, address, 1), map);
    const auto values = read_response_values(result.response);
    out.push_back(to_physical(map.spec(address).unit, values.at(0)));
  }
  return out;
}

}  // namespace cpt::modbus
