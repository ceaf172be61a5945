#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// Modbus TCP: MBAP framing, the three holding-register function codes the
/// lab devices use, and the register maps shared by devices, EMS and attacker.
namespace cpt::modbus {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kTcpPort = 502;
inline constexpr std::size_t kMbapSize = 7;

namespace fc {
inline constexpr std::uint8_t read_holding = 0x03;
inline constexpr std::uint8_t write_single = 0x06;
inline constexpr std::uint8_t write_multiple = 0x10;
inline constexpr std::uint8_t exception_flag = 0x80;
}  // namespace fc

enum class ExceptionCode : std::uint8_t {
  illegal_function = 0x01,
  illegal_data_address = 0x02,
  illegal_data_value = 0x03,
};

struct MbapHeader {
  std::uint16_t transaction_id = 0;
  std::uint16_t protocol_id = 0;
  std::uint16_t length = 0;  ///< unit id + PDU
  std::uint8_t unit_id = 0;

  bool operator==(const MbapHeader&) const = default;
};

struct Adu {
  MbapHeader header;
  std::uint8_t function = 0;
  Bytes data;

  bool is_exception() const { return (function & fc::exception_flag) != 0; }
  bool operator==(const Adu&) const = default;
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A device answered with an exception response, or a poll hit one.
class ModbusException : public std::runtime_error {
 public:
  explicit ModbusException(ExceptionCode code);
  ExceptionCode code() const { return code_; }

 private:
  ExceptionCode code_;
};

/// Builds an ADU with a consistent MBAP length field.
Adu make_adu(std::uint16_t transaction_id, std::uint8_t unit_id, std::uint8_t function, Bytes data);

/// Big-endian. Throws FrameError if header.length disagrees with the PDU or
/// the PDU would overflow the length field.
Bytes encode(const Adu& adu);
/// Throws FrameError on truncation, protocol_id != 0, or a length mismatch.
Adu decode(std::span<const std::uint8_t> bytes);

Adu read_holding_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                         std::uint16_t quantity);
Adu write_single_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                         std::uint16_t value);
Adu write_multiple_request(std::uint16_t tid, std::uint8_t unit, std::uint16_t address,
                           std::span<const std::uint16_t> values);
Adu exception_response(const Adu& request, ExceptionCode code);

/// Register values of a 0x03 response. Throws ModbusException for exception
/// responses and FrameError for malformed ones.
std::vector<std::uint16_t> read_response_values(const Adu& response);

/// Address and value of a 0x06 request or its echo.
struct SingleWrite {
  std::uint16_t address = 0;
  std::uint16_t value = 0;
};
std::optional<SingleWrite> parse_write_single(const Adu& adu);

// --- fixed point -----------------------------------------------------------

/// Signed 16-bit counts of 0.01 units (kW or %).
double decode_fp(std::uint16_t raw);
/// Rounds to the nearest count, saturating at the int16 range.
std::uint16_t encode_fp(double value);

// --- register maps ---------------------------------------------------------

enum class DeviceType : std::uint16_t { pv = 1, bss = 2, load_bank = 3, meter = 4 };

const char* to_string(DeviceType type);

enum class Unit { device_type, power_kw, percent };

namespace reg {
inline constexpr std::uint16_t device_type = 0;
inline constexpr std::uint16_t pv_output = 10;
inline constexpr std::uint16_t pv_limit_readback = 11;
inline constexpr std::uint16_t pv_limit = 20;
inline constexpr std::uint16_t bss_actual = 10;
inline constexpr std::uint16_t bss_soc = 11;
inline constexpr std::uint16_t bss_setpoint = 20;
inline constexpr std::uint16_t load_demand = 10;
inline constexpr std::uint16_t meter_transformer = 10;
/// Written to pv_limit (and shown in pv_limit_readback) for "no limit".
inline constexpr std::uint16_t no_limit = 0x7FFF;
}  // namespace reg

struct RegisterSpec {
  Unit unit = Unit::power_kw;
  bool writable = false;
  std::int32_t min_count = -32768;  ///< accepted write range (signed counts)
  std::int32_t max_count = 32767;
  bool accepts_no_limit = false;  ///< 0x7FFF always accepted
};

struct RegisterWrite {
  std::uint16_t address = 0;
  std::uint16_t value = 0;
};

/// Holding registers of one device. Register 0 carries the device type and is
/// read-only; nothing is authenticated.
class RegisterMap {
 public:
  explicit RegisterMap(DeviceType type);

  DeviceType device_type() const { return type_; }
  void define(std::uint16_t address, RegisterSpec spec, std::uint16_t initial = 0);
  bool mapped(std::uint16_t address) const { return registers_.contains(address); }
  const RegisterSpec& spec(std::uint16_t address) const;

  std::uint16_t get(std::uint16_t address) const;
  /// Device-side update, bypasses write protection.
  void set(std::uint16_t address, std::uint16_t value);
  void set_kw(std::uint16_t address, double kw) { set(address, encode_fp(kw)); }

 private:
  struct Slot {
    RegisterSpec spec;
    std::uint16_t value = 0;
  };
  DeviceType type_;
  std::map<std::uint16_t, Slot> registers_;
};

RegisterMap make_pv_map();
RegisterMap make_bss_map();
RegisterMap make_load_bank_map();
RegisterMap make_meter_map();

struct ServeResult {
  Adu response;
  std::vector<RegisterWrite> writes;  ///< accepted writes, for device hooks
};

/// Answers any decoded request with exactly one response carrying the same
/// transaction and unit id. Writes are applied to the map and reported so the
/// owning device can react (e.g. a new PV limit).
ServeResult serve(const Adu& request, RegisterMap& map);

/// Reads addresses through the server path and converts to physical units
/// (kW, %, or the raw device type). Throws ModbusException on failure.
std::vector<double> poll(RegisterMap& map, std::span<const std::uint16_t> addresses);

/// Physical value of a register according to its unit.
double to_physical(Unit unit, std::uint16_t raw);

}  // namespace cpt::modbus
