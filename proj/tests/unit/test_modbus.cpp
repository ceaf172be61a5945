#include <gtest/gtest.h>

#include <random>

#include "cpt/modbus.h"
#include "cpt/modbus_client.h"

using namespace cpt;
using namespace cpt::modbus;

namespace {

// Byte-level reference: MBAP (tid, 0, len, unit) then fc and big-endian fields.
Bytes oracle_frame(std::uint16_t tid, std::uint8_t unit, std::uint8_t fcode,
                   std::vector<std::uint16_t> words)
{
  Bytes pdu{fcode};
  for (auto w : words) {
    pdu.push_back(static_cast<std::uint8_t>(w / 256));
    pdu.push_back(static_cast<std::uint8_t>(w % 256));
  }
  const std::size_t len = pdu.size() + 1;
  Bytes out{static_cast<std::uint8_t>(tid / 256), static_cast<std::uint8_t>(tid % 256), 0, 0,
            static_cast<std::uint8_t>(len / 256), static_cast<std::uint8_t>(len % 256), unit};
  for (auto b : pdu) out.push_back(b);
  return out;
}

}  // namespace

TEST(ModbusCodec, ReadRequestBytes)
{
  const Bytes expected{0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x03, 0x00, 0x0A, 0x00, 0x01};
  EXPECT_EQ(encode(read_holding_request(1, 1, 10, 1)), expected);
  EXPECT_EQ(oracle_frame(1, 1, 0x03, {10, 1}), expected);
  auto adu = decode(expected);
  EXPECT_EQ(adu.header.transaction_id, 1);
  EXPECT_EQ(adu.header.length, 6);
  EXPECT_EQ(adu.function, fc::read_holding);
}

TEST(ModbusCodec, MatchesOracleForRandomRequests)
{
  std::mt19937 rng(42);
  for (int i = 0; i < 2000; ++i) {
    const auto tid = static_cast<std::uint16_t>(rng());
    const auto unit = static_cast<std::uint8_t>(rng());
    const auto addr = static_cast<std::uint16_t>(rng());
    const auto val = static_cast<std::uint16_t>(rng());
    EXPECT_EQ(encode(read_holding_request(tid, unit, addr, val)),
              oracle_frame(tid, unit, 0x03, {addr, val}));
    EXPECT_EQ(encode(write_single_request(tid, unit, addr, val)),
              oracle_frame(tid, unit, 0x06, {addr, val}));
  }
}

TEST(ModbusCodec, FuzzRoundTrip)
{
  std::mt19937 rng(1);
  for (int i = 0; i < 10000; ++i) {
    Bytes data(rng() % 250);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    auto f = static_cast<std::uint8_t>(rng() % 0x7f + 1);
    auto adu = make_adu(static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng()), f,
                        data);
    auto bytes = encode(adu);
    ASSERT_EQ(bytes.size(), kMbapSize + 1 + data.size());
    EXPECT_EQ(decode(bytes), adu);
  }
}

TEST(ModbusCodec, RejectsMalformed)
{
  auto good = encode(read_holding_request(1, 1, 10, 1));
  EXPECT_THROW(decode(std::span(good).subspan(0, 7)), FrameError);
  auto bad_proto = good;
  bad_proto[3] = 1;
  EXPECT_THROW(decode(bad_proto), FrameError);
  auto bad_len = good;
  bad_len[5] = 9;
  EXPECT_THROW(decode(bad_len), FrameError);
  auto adu = read_holding_request(1, 1, 10, 1);
  adu.header.length = 3;
  EXPECT_THROW(encode(adu), FrameError);
}

TEST(FixedPoint, Examples)
{
  EXPECT_DOUBLE_EQ(decode_fp(static_cast<std::uint16_t>(-123)), -1.23);
  EXPECT_EQ(encode_fp(3.5), 350);
  EXPECT_EQ(encode_fp(14.0), 1400);
  EXPECT_EQ(encode_fp(-6.0), static_cast<std::uint16_t>(-600));
  EXPECT_EQ(encode_fp(1e9), 32767);
  EXPECT_EQ(encode_fp(-1e9), 0x8000);
  EXPECT_THROW(encode_fp(std::nan("")), std::invalid_argument);
}

TEST(FixedPoint, RoundTripWithinHalfCount)
{
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-327.0, 327.0);
  for (int i = 0; i < 5000; ++i) {
    const double v = d(rng);
    EXPECT_LE(std::abs(decode_fp(encode_fp(v)) - v), 0.005 + 1e-12);
  }
  for (int raw = 0; raw <= 0xffff; raw += 7) {
    EXPECT_EQ(encode_fp(decode_fp(static_cast<std::uint16_t>(raw))), raw);
  }
}

TEST(Server, WritePvLimit)
{
  auto pv = make_pv_map();
  auto r = serve(write_single_request(9, 1, reg::pv_limit, 350), pv);
  EXPECT_FALSE(r.response.is_exception());
  EXPECT_EQ(r.response.header.transaction_id, 9);
  EXPECT_EQ(encode(r.response), oracle_frame(9, 1, 0x06, {20, 350}));
  ASSERT_EQ(r.writes.size(), 1u);
  EXPECT_EQ(pv.get(reg::pv_limit), 350);
  // no-limit sentinel is accepted, negative limits are not
  EXPECT_FALSE(serve(write_single_request(10, 1, reg::pv_limit, reg::no_limit), pv)
                   .response.is_exception());
  auto neg = serve(write_single_request(11, 1, reg::pv_limit, encode_fp(-1.0)), pv);
  ASSERT_TRUE(neg.response.is_exception());
  EXPECT_EQ(neg.response.data[0], 0x03);
  EXPECT_TRUE(neg.writes.empty());
}

TEST(Server, WriteBssSetpointMultiple)
{
  auto bss = make_bss_map();
  const std::uint16_t v[] = {1400};
  auto r = serve(write_multiple_request(2, 1, reg::bss_setpoint, v), bss);
  EXPECT_FALSE(r.response.is_exception());
  EXPECT_EQ(encode(r.response), oracle_frame(2, 1, 0x10, {20, 1}));
  EXPECT_DOUBLE_EQ(decode_fp(bss.get(reg::bss_setpoint)), 14.0);
}

TEST(Server, ExceptionsCarryRequestIds)
{
  auto meter = make_meter_map();
  auto r = serve(read_holding_request(77, 3, 9999, 1), meter);
  ASSERT_TRUE(r.response.is_exception());
  EXPECT_EQ(r.response.function, 0x83);
  EXPECT_EQ(r.response.data, Bytes{0x02});
  EXPECT_EQ(r.response.header.transaction_id, 77);
  EXPECT_EQ(r.response.header.unit_id, 3);
  EXPECT_EQ(encode(r.response), (Bytes{0, 77, 0, 0, 0, 3, 3, 0x83, 0x02}));

  EXPECT_EQ(serve(make_adu(1, 1, 0x2b, {}), meter).response.data, Bytes{0x01});
  EXPECT_EQ(serve(write_single_request(1, 1, reg::device_type, 1), meter).response.data,
            Bytes{0x02});
  EXPECT_EQ(serve(read_holding_request(1, 1, 10, 0), meter).response.data, Bytes{0x03});
  EXPECT_THROW(read_response_values(r.response), ModbusException);
}

TEST(Server, ReadMeterNegative)
{
  auto meter = make_meter_map();
  meter.set(reg::meter_transformer, static_cast<std::uint16_t>(-123));
  auto r = serve(read_holding_request(1, 1, reg::meter_transformer, 1), meter);
  auto vals = read_response_values(r.response);
  ASSERT_EQ(vals.size(), 1u);
  EXPECT_DOUBLE_EQ(decode_fp(vals[0]), -1.23);
  const std::uint16_t addrs[] = {reg::device_type, reg::meter_transformer};
  auto p = poll(meter, addrs);
  EXPECT_EQ(p, (std::vector<double>{4.0, -1.23}));
}

TEST(Server, AnyDecodedRequestGetsExactlyOneResponse)
{
  std::mt19937 rng(5);
  auto bss = make_bss_map();
  for (int i = 0; i < 3000; ++i) {
    Bytes data(rng() % 12);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    const std::uint8_t fns[] = {0x03, 0x06, 0x10, static_cast<std::uint8_t>(rng() % 0x7f + 1)};
    auto req = make_adu(static_cast<std::uint16_t>(i), 1, fns[rng() % 4], data);
    auto r = serve(req, bss);
    EXPECT_EQ(r.response.header.transaction_id, req.header.transaction_id);
    EXPECT_NO_THROW(decode(encode(r.response)));
    if (r.response.is_exception()) EXPECT_TRUE(r.writes.empty());
  }
}

TEST(Client, MatchesAndTimesOut)
{
  const auto subnet = net::Subnet::parse("192.168.10.0/24");
  net::Host host("ems", net::MacAddr::parse("02:00:5e:10:00:0a"),
                 net::Ipv4Addr::parse("192.168.10.10"), subnet);
  Client c(40001, 5);
  const auto meter_ip = net::Ipv4Addr::parse("192.168.10.20");
  const auto tid = c.send(host, meter_ip, read_holding_request(0, 1, 10, 1), 0, "meter:1");
  EXPECT_EQ(tid, 1);
  EXPECT_EQ(c.outstanding(), 1u);

  auto meter = make_meter_map();
  net::TcpSegment resp;
  resp.src_ip = meter_ip;
  resp.dst_ip = host.ip();
  resp.src_port = kTcpPort;
  resp.dst_port = 40001;
  resp.payload = encode(serve(read_holding_request(tid, 1, 10, 1), meter).response);
  auto stray = resp;
  stray.payload = encode(serve(read_holding_request(999, 1, 10, 1), meter).response);
  auto done = c.accept({stray, resp});
  ASSERT_EQ(done.size(), 1u);
  EXPECT_EQ(done[0].request.tag, "meter:1");
  EXPECT_EQ(c.stats().unmatched, 1u);

  c.send(host, meter_ip, read_holding_request(0, 1, 10, 1), 10, "meter:2");
  EXPECT_TRUE(c.expire(14).empty());
  EXPECT_EQ(c.expire(15).size(), 1u);
  EXPECT_EQ(c.stats().timeouts, 1u);
}
