#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cpt/cosim.h"

/// Emulated flat Ethernet/IPv4 segment: addresses, wire codecs, a learning
/// switch, host stacks with ARP caches, and the relay that moves frames
/// between hosts through the scheduler.
namespace cpt::net {

using Bytes = cosim::Bytes;

class MacAddr {
 public:
  constexpr MacAddr() = default;
  constexpr explicit MacAddr(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

  /// Accepts "aa:bb:cc:dd:ee:ff" (case-insensitive).
  static MacAddr parse(std::string_view text);
  static constexpr MacAddr broadcast() { return MacAddr({0xff, 0xff, 0xff, 0xff, 0xff, 0xff}); }

  const std::array<std::uint8_t, 6>& octets() const { return octets_; }
  bool is_broadcast() const { return *this == broadcast(); }
  bool is_multicast() const { return (octets_[0] & 0x01) != 0; }
  bool is_zero() const { return *this == MacAddr{}; }
  std::string str() const;

  auto operator<=>(const MacAddr&) const = default;

 private:
  std::array<std::uint8_t, 6> octets_{};
};

class Ipv4Addr {
 public:
  constexpr Ipv4Addr() = default;
  constexpr explicit Ipv4Addr(std::uint32_t value) : value_(value) {}

  static Ipv4Addr parse(std::string_view text);

  std::uint32_t value() const { return value_; }
  std::string str() const;

  auto operator<=>(const Ipv4Addr&) const = default;

 private:
  std::uint32_t value_ = 0;
};

struct Subnet {
  Ipv4Addr network;
  int prefix = 24;

  /// "a.b.c.d/nn"
  static Subnet parse(std::string_view text);
  bool contains(Ipv4Addr ip) const;
  /// Usable host addresses (network and broadcast excluded), ascending.
  std::vector<Ipv4Addr> hosts() const;
  std::string str() const;
};

inline constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
inline constexpr std::uint16_t kEtherTypeArp = 0x0806;
inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kMinFrameSize = 60;  // without FCS
inline constexpr std::size_t kArpSize = 28;
inline constexpr std::size_t kIpv4HeaderSize = 20;
inline constexpr std::size_t kTcpHeaderSize = 20;

inline constexpr std::uint8_t kTcpFin = 0x01;
inline constexpr std::uint8_t kTcpPsh = 0x08;
inline constexpr std::uint8_t kTcpAck = 0x10;

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EthernetFrame {
  MacAddr dst;
  MacAddr src;
  std::uint16_t ethertype = kEtherTypeIpv4;
  Bytes payload;
  std::int64_t ts = 0;  ///< step index; not part of the wire bytes
};

/// Zero-pads to the 60-byte Ethernet minimum. Throws FrameError when the
/// payload is shorter than the declared ethertype requires.
Bytes encode(const EthernetFrame& frame);
EthernetFrame decode_frame(std::span<const std::uint8_t> bytes);

enum class ArpOp : std::uint16_t { request = 1, reply = 2 };

struct ArpMessage {
  ArpOp op = ArpOp::request;
  MacAddr sender_mac;
  Ipv4Addr sender_ip;
  MacAddr target_mac;  ///< all-zero in requests
  Ipv4Addr target_ip;

  bool operator==(const ArpMessage&) const = default;
};

Bytes encode(const ArpMessage& message);
ArpMessage decode_arp(std::span<const std::uint8_t> bytes);

/// One TCP segment inside an IPv4 packet. Sessions are not modelled beyond
/// sequence/ack bookkeeping: no handshake, no retransmission.
struct TcpSegment {
  Ipv4Addr src_ip;
  Ipv4Addr dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = kTcpPsh | kTcpAck;
  std::uint16_t ip_id = 0;
  Bytes payload;

  bool operator==(const TcpSegment&) const = default;
};

/// IPv4 header + TCP header + payload, both checksums filled in.
Bytes encode(const TcpSegment& segment);
/// Throws FrameError for anything that is not a well-formed IPv4/TCP packet.
TcpSegment decode_ipv4_tcp(std::span<const std::uint8_t> bytes);

std::uint16_t internet_checksum(std::span<const std::uint8_t> bytes, std::uint32_t initial = 0);

/// Builds a complete Ethernet frame carrying the segment.
EthernetFrame ipv4_frame(MacAddr src, MacAddr dst, const TcpSegment& segment);
EthernetFrame arp_frame(MacAddr src, MacAddr dst, const ArpMessage& message);

// ---------------------------------------------------------------------------

enum class Disposition { unicast, flooded, dropped };

struct Forwarding {
  Disposition disposition = Disposition::dropped;
  std::vector<int> ports;
  std::string drop_reason;
};

/// MAC-learning switch. Keeps only a MAC -> port table.
class LearningSwitch {
 public:
  explicit LearningSwitch(int port_count);

  Forwarding forward(MacAddr src, MacAddr dst, int ingress);
  std::optional<int> lookup(MacAddr mac) const;
  int port_count() const { return port_count_; }

 private:
  int port_count_;
  std::map<MacAddr, int> table_;
};

// ---------------------------------------------------------------------------

class ResolutionError : public std::runtime_error {
 public:
  ResolutionError(Ipv4Addr ip, const std::string& what) : std::runtime_error(what), ip_(ip) {}
  Ipv4Addr ip() const { return ip_; }

 private:
  Ipv4Addr ip_;
};

struct ArpEntry {
  MacAddr mac;
  std::int64_t learned_at = 0;
};

struct HostOptions {
  std::int64_t resolve_timeout_steps = 3;
  std::optional<std::int64_t> arp_expiry_steps;  ///< none = entries live until overwritten
  std::uint64_t seed = 0;                        ///< feeds TCP initial sequence numbers
};

struct Received {
  std::vector<TcpSegment> segments;      ///< TCP addressed to this host's IP
  std::vector<EthernetFrame> transit;    ///< IPv4 to this MAC but another IP
  std::vector<ArpMessage> arp;           ///< every ARP message seen
  std::size_t malformed = 0;
};

/// A host's network stack: ARP cache, pending resolutions, TCP bookkeeping and
/// an outbox drained once per step.
class Host {
 public:
  Host(std::string id, MacAddr mac, Ipv4Addr ip, Subnet subnet, HostOptions options = {});

  const std::string& id() const { return id_; }
  MacAddr mac() const { return mac_; }
  Ipv4Addr ip() const { return ip_; }
  const Subnet& subnet() const { return subnet_; }

  /// Processes delivered frames: answers ARP requests for our IP, lets any
  /// ARP reply overwrite the cache, flushes packets waiting for a resolution.
  Received receive(const cosim::FrameBatch& frames, std::int64_t step);

  /// Cached binding, or nullopt after emitting an ARP request (once per
  /// pending resolution). Throws ResolutionError outside the subnet.
  std::optional<MacAddr> resolve(Ipv4Addr ip, std::int64_t step);

  /// Sends payload over the session (src_port -> dst_ip:dst_port). Empty
  /// payloads are rejected with std::invalid_argument.
  void send_ip(Ipv4Addr dst_ip, std::uint16_t src_port, std::uint16_t dst_port,
               std::span<const std::uint8_t> payload, std::int64_t step);
  void send_frame(const EthernetFrame& frame);
  void send_arp(const ArpMessage& message, MacAddr dst);

  /// Drops packets whose resolution timed out; returns the unresolved IPs.
  std::vector<Ipv4Addr> expire(std::int64_t step);

  cosim::FrameBatch take_outbox();

  const std::map<Ipv4Addr, ArpEntry>& arp_cache() const { return arp_cache_; }
  std::uint64_t frames_sent() const { return frames_sent_; }

 private:
  struct SessionKey {
    std::uint16_t local_port;
    Ipv4Addr remote_ip;
    std::uint16_t remote_port;
    auto operator<=>(const SessionKey&) const = default;
  };
  struct Session {
    std::uint32_t next_seq = 0;
    std::uint32_t rcv_next = 0;
  };
  struct Pending {
    std::int64_t requested_at = 0;
    std::vector<TcpSegment> packets;
  };

  Session& session(const SessionKey& key);
  void learn(Ipv4Addr ip, MacAddr mac, std::int64_t step);
  void emit_segment(const TcpSegment& segment, MacAddr dst);

  std::string id_;
  MacAddr mac_;
  Ipv4Addr ip_;
  Subnet subnet_;
  HostOptions options_;
  std::map<Ipv4Addr, ArpEntry> arp_cache_;
  std::map<Ipv4Addr, Pending> pending_;
  std::map<SessionKey, Session> sessions_;
  std::uint16_t next_ip_id_ = 1;
  cosim::FrameBatch outbox_;
  std::uint64_t frames_sent_ = 0;
};

// ---------------------------------------------------------------------------

std::string tx_signal(const std::string& endpoint_id);
std::string rx_signal(const std::string& endpoint_id);
inline constexpr const char* kWireSignal = "net.wire";

struct NetStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;  ///< unicast frames
  std::uint64_t flooded = 0;
  std::uint64_t dropped = 0;
  std::map<std::string, std::uint64_t> drop_reasons;

  std::uint64_t on_wire() const { return delivered + flooded; }
};

/// The shared medium. Each endpoint sits on one switch port. Frames staged in
/// tx.<id> are switched in the same publication and appear in rx.<id> at the
/// next step; net.wire carries every frame that left the switch, in delivery
/// order (sender id, then send sequence).
class Network {
 public:
  explicit Network(std::vector<std::string> endpoint_ids);

  cosim::SimulatorHandle handle() const;
  void relay(cosim::StepContext& ctx);

  const NetStats& stats() const { return stats_; }
  const LearningSwitch& fabric() const { return switch_; }
  int port_of(const std::string& endpoint_id) const;

 private:
  std::vector<std::string> ids_;  // sorted; index = port
  LearningSwitch switch_;
  NetStats stats_;
};

}  // namespace cpt::net
