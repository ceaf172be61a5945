#include <charconv>
#include <cstdio>

#include "cpt/netem.h"

namespace cpt::net {

namespace {

void put16(Bytes& out, std::uint16_t v)
{
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put32(Bytes& out, std::uint32_t v)
{
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at)
{
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at)
{
  return (static_cast<std::uint32_t>(get16(b, at)) << 16) | get16(b, at + 2);
}

void put_mac(Bytes& out, MacAddr mac)
{
  out.insert(out.end(), mac.octets().begin(), mac.octets().end());
}

MacAddr get_mac(std::span<const std::uint8_t> b, std::size_t at)
{
  std::array<std::uint8_t, 6> o{};
  std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(at), 6, o.begin());
  return MacAddr(o);
}

int hex_digit(char c)
{
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

MacAddr MacAddr::parse(std::string_view text)
{
  std::array<std::uint8_t, 6> o{};
  if (text.size() != 17) {
    throw std::invalid_argument("invalid MAC address '" + std::string(text) + "'");
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const int hi = hex_digit(text[i * 3]);
    const int lo = hex_digit(text[i * 3 + 1]);
    if (hi < 0 || lo < 0 || (i < 5 && text[i * 3 + 2] != ':')) {
      throw std::invalid_argument("invalid MAC address '" + std::string(text) + "'");
    }
    o[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return MacAddr(o);
}

std::string MacAddr::str() const
{
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets_[0], octets_[1],
                octets_[2], octets_[3], octets_[4], octets_[5]);
  return buf;
}

Ipv4Addr Ipv4Addr::parse(std::string_view text)
{
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc{} || next == p || octet > 255 || next - p > 3) {
      throw std::invalid_argument("invalid IPv4 address '" + std::string(text) + "'");
    }
    value = (value << 8) | octet;
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') {
        throw std::invalid_argument("invalid IPv4 address '" + std::string(text) + "'");
      }
      ++p;
    }
  }
  if (p != end) {
    throw std::invalid_argument("invalid IPv4 address '" + std::string(text) + "'");
  }
  return Ipv4Addr(value);
}

std::string Ipv4Addr::str() const
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", value_ >> 24, (value_ >> 16) & 0xff,
                (value_ >> 8) & 0xff, value_ & 0xff);
  return buf;
}

Subnet Subnet::parse(std::string_view text)
{
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw std::invalid_argument("subnet needs a prefix length: '" + std::string(text) + "'");
  }
  int prefix = 0;
  auto pfx = text.substr(slash + 1);
  auto [ptr, ec] = std::from_chars(pfx.data(), pfx.data() + pfx.size(), prefix);
  if (ec != std::errc{} || ptr != pfx.data() + pfx.size() || prefix < 1 || prefix > 30) {
    throw std::invalid_argument("invalid subnet prefix in '" + std::string(text) + "'");
  }
  Subnet s{Ipv4Addr::parse(text.substr(0, slash)), prefix};
  const std::uint32_t mask = 0xffffffffu << (32 - prefix);
  s.network = Ipv4Addr(s.network.value() & mask);
  return s;
}

bool Subnet::contains(Ipv4Addr ip) const
{
  const std::uint32_t mask = 0xffffffffu << (32 - prefix);
  return (ip.value() & mask) == network.value();
}

std::vector<Ipv4Addr> Subnet::hosts() const
{
  std::vector<Ipv4Addr> out;
  const std::uint32_t size = 1u << (32 - prefix);
  for (std::uint32_t i = 1; i + 1 < size; ++i) {
    out.emplace_back(network.value() + i);
  }
  return out;
}

std::string Subnet::str() const
{
  return network.str() + "/" + std::to_string(prefix);
}

std::uint16_t internet_checksum(std::span<const std::uint8_t> bytes, std::uint32_t initial)
{
  std::uint32_t sum = initial;
  std::size_t i = 0;
  for (; i + 1 < bytes.size(); i += 2) {
    sum += static_cast<std::uint32_t>((bytes[i] << 8) | bytes[i + 1]);
  }
  if (i < bytes.size()) {
    sum += static_cast<std::uint32_t>(bytes[i] << 8);
  }
  while (sum >> 16) {
    sum = (sum & 0xffff) + (sum >> 16);
  }
  return static_cast<std::uint16_t>(~sum & 0xffff);
}

Bytes encode(const EthernetFrame& frame)
{
  const std::size_t minimum = frame.ethertype == kEtherTypeArp    ? kArpSize
                              : frame.ethertype == kEtherTypeIpv4 ? kIpv4HeaderSize
                                                                  : 0;
  if (frame.payload.size() < minimum) {
    throw FrameError("payload too short for ethertype");
  }
  Bytes out;
  out.reserve(std::max(kMinFrameSize, kEthernetHeaderSize + frame.payload.size()));
  put_mac(out, frame.dst);
  put_mac(out, frame.src);
  put16(out, frame.ethertype);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  if (out.size() < kMinFrameSize) {
    out.resize(kMinFrameSize, 0);
  }
  return out;
}

EthernetFrame decode_frame(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kEthernetHeaderSize) {
    throw FrameError("frame shorter than the Ethernet header");
  }
  EthernetFrame f;
  f.dst = get_mac(bytes, 0);
  f.src = get_mac(bytes, 6);
  f.ethertype = get16(bytes, 12);
  f.payload.assign(bytes.begin() + kEthernetHeaderSize, bytes.end());
  return f;
}

Bytes encode(const ArpMessage& m)
{
  Bytes out;
  out.reserve(kArpSize);
  put16(out, 1);  // Ethernet
  put16(out, kEtherTypeIpv4);
  out.push_back(6);
  out.push_back(4);
  put16(out, static_cast<std::uint16_t>(m.op));
  put_mac(out, m.sender_mac);
  put32(out, m.sender_ip.value());
  put_mac(out, m.target_mac);
  put32(out, m.target_ip.value());
  return out;
}

ArpMessage decode_arp(std::span<const std::uint8_t> b)
{
  if (b.size() < kArpSize) {
    throw FrameError("truncated ARP message");
  }
  if (get16(b, 0) != 1 || get16(b, 2) != kEtherTypeIpv4 || b[4] != 6 || b[5] != 4) {
    throw FrameError("unsupported ARP hardware/protocol type");
  }
  const auto op = get16(b, 6);
  if (op != 1 && op != 2) {
    throw FrameError("unknown ARP operation");
  }
  return ArpMessage{static_cast<ArpOp>(op), get_mac(b, 8), Ipv4Addr(get32(b, 14)),
                    get_mac(b, 18), Ipv4Addr(get32(b, 24))};
}

Bytes encode(const TcpSegment& s)
{
  const std::size_t total = kIpv4HeaderSize + kTcpHeaderSize + s.payload.size();
  if (total > 0xffff) {
    throw FrameError("IPv4 packet too large");
  }
  Bytes out;
  out.reserve(total);
  out.push_back(0x45);  // v4, IHL 5
  out.push_back(0);
  put16(out, static_cast<std::uint16_t>(total));
  put16(out, s.ip_id);
  put16(out, 0x4000);  // don't fragment
  out.push_back(64);
  out.push_back(6);  // TCP
  put16(out, 0);
  put32(out, s.src_ip.value());
  put32(out, s.dst_ip.value());
  const auto ip_sum = internet_checksum(std::span(out).subspan(0, kIpv4HeaderSize));
  out[10] = static_cast<std::uint8_t>(ip_sum >> 8);
  out[11] = static_cast<std::uint8_t>(ip_sum & 0xff);

  put16(out, s.src_port);
  put16(out, s.dst_port);
  put32(out, s.seq);
  put32(out, s.ack);
  out.push_back(0x50);  // data offset 5
  out.push_back(s.flags);
  put16(out, 65535);
  put16(out, 0);
  put16(out, 0);
  out.insert(out.end(), s.payload.begin(), s.payload.end());

  // pseudo-header
  const auto tcp_len = static_cast<std::uint32_t>(kTcpHeaderSize + s.payload.size());
  std::uint32_t pseudo = (s.src_ip.value() >> 16) + (s.src_ip.value() & 0xffff) +
                         (s.dst_ip.value() >> 16) + (s.dst_ip.value() & 0xffff) + 6 + tcp_len;
  const auto tcp_sum = internet_checksum(std::span(out).subspan(kIpv4HeaderSize), pseudo);
  out[kIpv4HeaderSize + 16] = static_cast<std::uint8_t>(tcp_sum >> 8);
  out[kIpv4HeaderSize + 17] = static_cast<std::uint8_t>(tcp_sum & 0xff);
  return out;
}

TcpSegment decode_ipv4_tcp(std::span<const std::uint8_t> b)
{
  if (b.size() < kIpv4HeaderSize) {
    throw FrameError("truncated IPv4 header");
  }
  if ((b[0] >> 4) != 4) {
    throw FrameError("not an IPv4 packet");
  }
  const std::size_t ihl = static_cast<std::size_t>(b[0] & 0x0f) * 4;
  const std::size_t total = get16(b, 2);
  if (ihl < kIpv4HeaderSize || total < ihl || total > b.size()) {
    throw FrameError("inconsistent IPv4 lengths");
  }
  if (b[9] != 6) {
    throw FrameError("not a TCP packet");
  }
  if (total < ihl + kTcpHeaderSize) {
    throw FrameError("truncated TCP header");
  }
  const auto tcp = b.subspan(ihl, total - ihl);
  const std::size_t offset = static_cast<std::size_t>(tcp[12] >> 4) * 4;
  if (offset < kTcpHeaderSize || offset > tcp.size()) {
    throw FrameError("invalid TCP data offset");
  }
  TcpSegment s;
  s.ip_id = get16(b, 4);
  s.src_ip = Ipv4Addr(get32(b, 12));
  s.dst_ip = Ipv4Addr(get32(b, 16));
  s.src_port = get16(tcp, 0);
  s.dst_port = get16(tcp, 2);
  s.seq = get32(tcp, 4);
  s.ack = get32(tcp, 8);
  s.flags = tcp[13];
  s.payload.assign(tcp.begin() + static_cast<std::ptrdiff_t>(offset), tcp.end());
  return s;
}

EthernetFrame ipv4_frame(MacAddr src, MacAddr dst, const TcpSegment& segment)
{
  return EthernetFrame{dst, src, kEtherTypeIpv4, encode(segment), 0};
}

EthernetFrame arp_frame(MacAddr src, MacAddr dst, const ArpMessage& message)
{
  return EthernetFrame{dst, src, kEtherTypeArp, encode(message), 0};
}

}  // namespace cpt::net
