#include <algorithm>

#include "cpt/netem.h"

namespace cpt::net {

std::string tx_signal(const std::string& endpoint_id)
{
  return "tx." + endpoint_id;
}

std::string rx_signal(const std::string& endpoint_id)
{
  return "rx." + endpoint_id;
}

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> ids)
{
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw std::invalid_argument("duplicate endpoint id on the network");
  }
  return ids;
}

}  // namespace

Network::Network(std::vector<std::string> endpoint_ids)
    : ids_(sorted_unique(std::move(endpoint_ids))), switch_(static_cast<int>(ids_.size()))
{
}

int Network::port_of(const std::string& endpoint_id) const
{
  auto it = std::lower_bound(ids_.begin(), ids_.end(), endpoint_id);
  if (it == ids_.end() || *it != endpoint_id) {
    throw std::out_of_range("no endpoint '" + endpoint_id + "'");
  }
  return static_cast<int>(it - ids_.begin());
}

cosim::SimulatorHandle Network::handle() const
{
  cosim::SimulatorHandle h{"netem", {}, {}};
  for (const auto& id : ids_) {
    h.inputs.push_back(tx_signal(id));
    h.outputs.push_back(rx_signal(id));
  }
  h.outputs.push_back(kWireSignal);
  return h;
}

void Network::relay(cosim::StepContext& ctx)
{
  std::vector<cosim::FrameBatch> rx(ids_.size());
  cosim::FrameBatch wire;
  for (std::size_t port = 0; port < ids_.size(); ++port) {
    for (const auto& bytes : ctx.input_frames(tx_signal(ids_[port]))) {
      ++stats_.sent;
      if (bytes.size() < kEthernetHeaderSize) {
        ++stats_.dropped;
        ++stats_.drop_reasons["runt frame"];
        continue;
      }
      const auto frame = decode_frame(std::span(bytes).subspan(0, kEthernetHeaderSize));
      auto fwd = switch_.forward(frame.src, frame.dst, static_cast<int>(port));
      switch (fwd.disposition) {
        case Disposition::dropped:
          ++stats_.dropped;
          ++stats_.drop_reasons[fwd.drop_reason];
          continue;
        case Disposition::unicast:
          ++stats_.delivered;
          break;
        case Disposition::flooded:
          ++stats_.flooded;
          break;
      }
      for (int out : fwd.ports) {
        rx[static_cast<std::size_t>(out)].push_back(bytes);
      }
      wire.push_back(bytes);
    }
  }
  for (std::size_t port = 0; port < ids_.size(); ++port) {
    ctx.publish(rx_signal(ids_[port]), std::move(rx[port]));
  }
  ctx.publish(kWireSignal, std::move(wire));
}

}  // namespace cpt::net
