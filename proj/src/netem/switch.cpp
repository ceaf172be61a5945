#include "cpt/netem.h"

namespace cpt::net {

LearningSwitch::LearningSwitch(int port_count) : port_count_(port_count)
{
  if (port_count < 0) {
    throw std::invalid_argument("negative port count");
  }
}

Forwarding LearningSwitch::forward(MacAddr src, MacAddr dst, int ingress)
{
  if (ingress < 0 || ingress >= port_count_) {
    return Forwarding{Disposition::dropped, {}, "unknown ingress port"};
  }
  if (!src.is_multicast()) {
    table_[src] = ingress;
  }
  auto flood = [&] {
    Forwarding f{Disposition::flooded, {}, {}};
    for (int p = 0; p < port_count_; ++p) {
      if (p != ingress) {
        f.ports.push_back(p);
      }
    }
    return f;
  };
  if (dst.is_multicast()) {
    return flood();
  }
  auto it = table_.find(dst);
  if (it == table_.end()) {
    return flood();
  }
  if (it->second == ingress) {
    return Forwarding{Disposition::dropped, {}, "destination on ingress port"};
  }
  return Forwarding{Disposition::unicast, {it->second}, {}};
}

std::optional<int> LearningSwitch::lookup(MacAddr mac) const
{
  auto it = table_.find(mac);
  if (it == table_.end()) {
    return std::nullopt;
  }
  return it->second;
}

}  // namespace cpt::net
