#include "cpt/modbus_client.h"

namespace cpt::modbus {

Client::Client(std::uint16_t first_local_port, std::int64_t timeout_steps)
    : next_port_(first_local_port), timeout_steps_(timeout_steps)
{
}

std::uint16_t Client::port_for(net::Ipv4Addr server)
{
  auto [it, inserted] = ports_.try_emplace(server, next_port_);
  if (inserted) {
    ++next_port_;
  }
  return it->second;
}

std::uint16_t Client::send(net::Host& host, net::Ipv4Addr server, Adu request, std::int64_t step,
                           std::string tag)
{
  const std::uint16_t tid = next_tid_++;
  request.header.transaction_id = tid;
  const auto bytes = encode(request);
  host.send_ip(server, port_for(server), kTcpPort, bytes, step);
  pending_[{server, tid}] = PendingRequest{server, std::move(request), step, std::move(tag)};
  ++stats_.requests;
  return tid;
}

std::vector<Completed> Client::accept(const std::vector<net::TcpSegment>& segments)
{
  std::vector<Completed> done;
  for (const auto& seg : segments) {
    if (seg.src_port != kTcpPort) {
      continue;
    }
    Adu response;
    try {
      response = decode(seg.payload);
    } catch (const FrameError&) {
      ++stats_.unmatched;
      continue;
    }
    auto it = pending_.find({seg.src_ip, response.header.transaction_id});
    if (it == pending_.end()) {
      ++stats_.unmatched;
      continue;
    }
    ++stats_.responses;
    done.push_back(Completed{std::move(it->second), std::move(response)});
    pending_.erase(it);
  }
  return done;
}

std::vector<PendingRequest> Client::expire(std::int64_t step)
{
  std::vector<PendingRequest> expired;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (step - it->second.sent_at >= timeout_steps_) {
      ++stats_.timeouts;
      expired.push_back(std::move(it->second));
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  return expired;
}

}  // namespace cpt::modbus
