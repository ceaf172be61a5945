#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpt/modbus.h"
#include "cpt/netem.h"

namespace cpt::modbus {

struct PendingRequest {
  net::Ipv4Addr server;
  Adu request;
  std::int64_t sent_at = 0;
  std::string tag;
};

struct Completed {
  PendingRequest request;
  Adu response;
};

struct ClientStats {
  std::uint64_t requests = 0;
  std::uint64_t responses = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t unmatched = 0;
};

/// Request/response bookkeeping over a host's TCP sessions: one local port
/// per server, transaction ids from a single counter.
class Client {
 public:
  Client(std::uint16_t first_local_port, std::int64_t timeout_steps);

  /// Stamps a fresh transaction id on request and sends it. Returns the id.
  std::uint16_t send(net::Host& host, net::Ipv4Addr server, Adu request, std::int64_t step,
                     std::string tag);

  /// Matches Modbus responses among the received segments.
  std::vector<Completed> accept(const std::vector<net::TcpSegment>& segments);
  /// Requests unanswered for timeout_steps or more.
  std::vector<PendingRequest> expire(std::int64_t step);

  const ClientStats& stats() const { return stats_; }
  std::size_t outstanding() const { return pending_.size(); }

 private:
  std::uint16_t port_for(net::Ipv4Addr server);

  std::uint16_t next_port_;
  std::int64_t timeout_steps_;
  std::uint16_t next_tid_ = 1;
  std::map<net::Ipv4Addr, std::uint16_t> ports_;
  std::map<std::pair<net::Ipv4Addr, std::uint16_t>, PendingRequest> pending_;
  ClientStats stats_;
};

}  // namespace cpt::modbus
