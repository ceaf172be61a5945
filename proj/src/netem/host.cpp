#include <algorithm>

#include "cpt/netem.h"

namespace cpt::net {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

Host::Host(std::string id, MacAddr mac, Ipv4Addr ip, Subnet subnet, HostOptions options)
    : id_(std::move(id)), mac_(mac), ip_(ip), subnet_(subnet), options_(options)
{
  if (!subnet_.contains(ip_)) {
    throw std::invalid_argument("host '" + id_ + "' address " + ip_.str() + " outside " +
                                subnet_.str());
  }
}

Host::Session& Host::session(const SessionKey& key)
{
  auto it = sessions_.find(key);
  if (it == sessions_.end()) {
    // Initial sequence numbers depend only on the seed and the 4-tuple.
    std::uint64_t h = splitmix64(options_.seed);
    h = splitmix64(h ^ ip_.value());
    h = splitmix64(h ^ (static_cast<std::uint64_t>(key.local_port) << 32 | key.remote_port));
    h = splitmix64(h ^ key.remote_ip.value());
    it = sessions_.emplace(key, Session{static_cast<std::uint32_t>(h), 0}).first;
  }
  return it->second;
}

void Host::learn(Ipv4Addr ip, MacAddr mac, std::int64_t step)
{
  arp_cache_[ip] = ArpEntry{mac, step};
  auto it = pending_.find(ip);
  if (it != pending_.end()) {
    for (const auto& seg : it->second.packets) {
      emit_segment(seg, mac);
    }
    pending_.erase(it);
  }
}

Received Host::receive(const cosim::FrameBatch& frames, std::int64_t step)
{
  Received r;
  for (const auto& raw : frames) {
    EthernetFrame frame;
    try {
      frame = decode_frame(raw);
    } catch (const FrameError&) {
      ++r.malformed;
      continue;
    }
    if (frame.dst != mac_ && !frame.dst.is_broadcast()) {
      continue;
    }
    if (frame.ethertype == kEtherTypeArp) {
      ArpMessage msg;
      try {
        msg = decode_arp(frame.payload);
      } catch (const FrameError&) {
        ++r.malformed;
        continue;
      }
      r.arp.push_back(msg);
      if (msg.sender_ip == ip_) {
        continue;
      }
      if (msg.op == ArpOp::request) {
        if (msg.target_ip == ip_) {
          learn(msg.sender_ip, msg.sender_mac, step);
          send_arp(ArpMessage{ArpOp::reply, mac_, ip_, msg.sender_mac, msg.sender_ip},
                   msg.sender_mac);
        }
      } else {
        // Any reply overwrites the cache, solicited or not.
        learn(msg.sender_ip, msg.sender_mac, step);
      }
    } else if (frame.ethertype == kEtherTypeIpv4) {
      TcpSegment seg;
      try {
        seg = decode_ipv4_tcp(frame.payload);
      } catch (const FrameError&) {
        ++r.malformed;
        continue;
      }
      if (seg.dst_ip != ip_) {
        frame.ts = step;
        r.transit.push_back(std::move(frame));
        continue;
      }
      auto& s = session(SessionKey{seg.dst_port, seg.src_ip, seg.src_port});
      s.rcv_next = seg.seq + static_cast<std::uint32_t>(seg.payload.size());
      r.segments.push_back(std::move(seg));
    }
  }
  return r;
}

std::optional<MacAddr> Host::resolve(Ipv4Addr ip, std::int64_t step)
{
  if (!subnet_.contains(ip)) {
    throw ResolutionError(ip, "cannot resolve " + ip.str() + ": outside " + subnet_.str());
  }
  if (ip == ip_) {
    return mac_;
  }
  auto it = arp_cache_.find(ip);
  if (it != arp_cache_.end()) {
    if (!options_.arp_expiry_steps || step - it->second.learned_at < *options_.arp_expiry_steps) {
      return it->second.mac;
    }
    arp_cache_.erase(it);
  }
  if (!pending_.contains(ip)) {
    pending_.emplace(ip, Pending{step, {}});
    send_arp(ArpMessage{ArpOp::request, mac_, ip_, MacAddr{}, ip}, MacAddr::broadcast());
  }
  return std::nullopt;
}

void Host::send_ip(Ipv4Addr dst_ip, std::uint16_t src_port, std::uint16_t dst_port,
                   std::span<const std::uint8_t> payload, std::int64_t step)
{
  if (payload.empty()) {
    throw std::invalid_argument("refusing to send an empty payload");
  }
  auto& s = session(SessionKey{src_port, dst_ip, dst_port});
  TcpSegment seg;
  seg.src_ip = ip_;
  seg.dst_ip = dst_ip;
  seg.src_port = src_port;
  seg.dst_port = dst_port;
  seg.seq = s.next_seq;
  seg.ack = s.rcv_next;
  seg.ip_id = next_ip_id_++;
  seg.payload.assign(payload.begin(), payload.end());
  s.next_seq += static_cast<std::uint32_t>(payload.size());

  if (auto mac = resolve(dst_ip, step)) {
    emit_segment(seg, *mac);
  } else {
    pending_[dst_ip].packets.push_back(std::move(seg));
  }
}

void Host::emit_segment(const TcpSegment& segment, MacAddr dst)
{
  send_frame(ipv4_frame(mac_, dst, segment));
}

void Host::send_frame(const EthernetFrame& frame)
{
  outbox_.push_back(encode(frame));
  ++frames_sent_;
}

void Host::send_arp(const ArpMessage& message, MacAddr dst)
{
  send_frame(arp_frame(mac_, dst, message));
}

std::vector<Ipv4Addr> Host::expire(std::int64_t step)
{
  std::vector<Ipv4Addr> failed;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (step - it->second.requested_at >= options_.resolve_timeout_steps) {
      failed.push_back(it->first);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  return failed;
}

cosim::FrameBatch Host::take_outbox()
{
  cosim::FrameBatch out;
  out.swap(outbox_);
  return out;
}

}  // namespace cpt::net
