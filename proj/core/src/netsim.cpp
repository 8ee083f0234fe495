#include "ers/netsim.hpp"

#include <sstream>
#include <stdexcept>

#include "ers/digest.hpp"

namespace ers::net {

void Impairment::validate() const {
  if (one_way_latency_ms < 0)
    throw std::invalid_argument("latency must be non-negative");
  for (double p : {loss_prob, corruption_prob, duplication_prob, reorder_prob})
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("impairment probabilities must be in [0,1]");
}

std::string TraceRecord::to_line() const {
  std::ostringstream os;
  os << time_ms << ',' << kind << ',' << src << ',' << dst << ',' << link << ','
     << digest << ',' << outcome;
  return os.str();
}

Simulation::Simulation(std::uint64_t seed) : seed_(seed) {}

void Simulation::schedule_at(SimTime t, std::function<void()> fn) {
  if (t < now_) t = now_;
  queue_.push(Event{t, order_counter_++, std::move(fn)});
}

void Simulation::schedule_after(SimTime delay, std::function<void()> fn) {
  schedule_at(now_ + delay, std::move(fn));
}

std::size_t Simulation::advance_until(SimTime t) {
  std::size_t fired = 0;
  while (!queue_.empty() && queue_.top().t <= t) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
    ++fired;
  }
  if (now_ < t) now_ = t;
  return fired;
}

std::size_t Simulation::advance_until_idle() {
  std::size_t fired = 0;
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
    ++fired;
  }
  return fired;
}

void Simulation::add_network(const NetworkId& network) {
  networks_.insert(network);
}

bool Simulation::has_network(const NetworkId& network) const {
  return networks_.count(network) > 0;
}

void Simulation::set_membership(const NodeId& node,
                                const std::optional<NetworkId>& network) {
  if (network && !networks_.count(*network))
    throw std::invalid_argument("unknown network: " + *network);
  std::optional<NetworkId> old;
  auto it = membership_.find(node);
  if (it != membership_.end()) old = it->second;
  if (old == network) return;
  if (network)
    membership_[node] = *network;
  else
    membership_.erase(node);
  record({now_, "membership", node, "-", "-", "-",
          network ? *network : std::string("offline")});
  if (membership_hook_) membership_hook_(node, old, network);
}

std::optional<NetworkId> Simulation::membership(const NodeId& node) const {
  auto it = membership_.find(node);
  if (it == membership_.end()) return std::nullopt;
  return it->second;
}

void Simulation::set_network_impairment(const NetworkId& network,
                                        const Impairment& imp) {
  imp.validate();
  network_impairment_[network] = imp;
  record({now_, "impairment", "-", "-", network, "-", "network"});
}

void Simulation::set_pair_impairment(const NodeId& src, const NodeId& dst,
                                     const std::optional<Impairment>& imp) {
  if (imp) {
    imp->validate();
    pair_impairment_[{src, dst}] = *imp;
  } else {
    pair_impairment_.erase({src, dst});
  }
  record({now_, "impairment", src, dst, "-", "-", "pair"});
}

Impairment Simulation::effective_impairment(const NodeId& src,
                                            const NodeId& dst) const {
  auto pit = pair_impairment_.find({src, dst});
  if (pit != pair_impairment_.end()) return pit->second;
  auto net = membership(src);
  if (net) {
    auto nit = network_impairment_.find(*net);
    if (nit != network_impairment_.end()) return nit->second;
  }
  return {};
}

Impairment Simulation::effective_impairment_for_network(
    const NetworkId& network) const {
  auto it = network_impairment_.find(network);
  return it != network_impairment_.end() ? it->second : Impairment{};
}

void Simulation::set_membership_hook(
    std::function<void(const NodeId&, const std::optional<NetworkId>&,
                       const std::optional<NetworkId>&)> hook) {
  membership_hook_ = std::move(hook);
}

void Simulation::register_handler(
    const NodeId& node, std::function<void(const wire::Message&)> handler) {
  handlers_[node] = std::move(handler);
}

void Simulation::unregister_handler(const NodeId& node) {
  handlers_.erase(node);
}

void Simulation::set_send_hook(std::function<void(const wire::Message&)> hook) {
  send_hook_ = std::move(hook);
}

Rng& Simulation::stream(const std::string& key) {
  auto it = streams_.find(key);
  if (it == streams_.end()) {
    std::uint64_t s = fnv1a64(key) ^ (seed_ * 0x9e3779b97f4a7c15ull);
    it = streams_.emplace(key, Rng(s)).first;
  }
  return it->second;
}

void Simulation::record(TraceRecord rec) { trace_.push_back(std::move(rec)); }

std::string Simulation::trace_text() const {
  std::string out;
  for (const auto& rec : trace_) {
    out += rec.to_line();
    out.push_back('\n');
  }
  return out;
}

void Simulation::deliver(const NodeId& to, wire::Message msg, bool corrupted,
                         const NetworkId& network_at_send, const char* kind) {
  --in_flight_;
  std::string digest16 = msg.digest.substr(0, 16);
  auto net = membership(to);
  if (!net || *net != network_at_send) {
    ++traffic_.dropped_offline;
    record({now_, kind, msg.src, to, msg.link, digest16, "dropped_offline"});
    return;
  }
  if (corrupted) {
    // Mangle the payload digest so the receiver's integrity check fails;
    // the handler is still invoked, mirroring a damaged datagram arriving.
    msg.digest[0] = msg.digest[0] == 'x' ? 'y' : 'x';
    ++traffic_.corrupted;
    record({now_, kind, msg.src, to, msg.link, digest16, "corrupted"});
  } else {
    ++traffic_.delivered;
    record({now_, kind, msg.src, to, msg.link, digest16, "delivered"});
  }
  auto it = handlers_.find(to);
  if (it != handlers_.end()) it->second(msg);
}

void Simulation::schedule_delivery(const NodeId& /*from*/, const NodeId& to,
                                   wire::Message msg, bool corrupted, SimTime at,
                                   const NetworkId& network, const char* kind) {
  ++in_flight_;
  schedule_at(at, [this, to, msg = std::move(msg), corrupted, network, kind]() {
    deliver(to, msg, corrupted, network, kind);
  });
}

void Simulation::send(const NodeId& from, const NodeId& to, wire::Message msg) {
  msg.src = from;
  msg.dst = to;
  if (msg.digest.empty()) msg.seal();
  if (send_hook_) send_hook_(msg);

  ++traffic_.sent;
  std::string digest16 = msg.digest.substr(0, 16);

  auto src_net = membership(from);
  auto dst_net = membership(to);
  if (!src_net || !dst_net || *src_net != *dst_net) {
    ++traffic_.unroutable;
    record({now_, "send", from, to, msg.link, digest16, "unroutable"});
    return;
  }

  Impairment imp = effective_impairment(from, to);
  Rng& rng = stream("link/" + from + "/" + to);
  // Draw all four uniforms unconditionally so the stream stays aligned
  // across runs that differ only in impairment values.
  double u_loss = rng.uniform01();
  double u_corrupt = rng.uniform01();
  double u_dup = rng.uniform01();
  double u_reorder = rng.uniform01();

  record({now_, "send", from, to, msg.link, digest16, "sent"});

  if (u_loss < imp.loss_prob) {
    ++traffic_.lost;
    record({now_, "drop", from, to, msg.link, digest16, "lost"});
    return;
  }

  bool corrupted = u_corrupt < imp.corruption_prob;
  SimTime deliver_at = now_ + imp.one_way_latency_ms;
  NetworkId network = *src_net;
  auto link_key = std::make_pair(from, to);

  bool duplicated = u_dup < imp.duplication_prob;
  bool reordered = u_reorder < imp.reorder_prob;

  if (reordered) {
    ++traffic_.reordered;
    std::uint64_t token = ++hold_token_;
    held_[link_key].push_back({msg, corrupted, network, token});
    ++in_flight_;
    // Safety valve: release even if the link goes quiet.
    schedule_after(kReorderHoldCapMs, [this, link_key, token]() {
      auto& dq = held_[link_key];
      for (auto it = dq.begin(); it != dq.end(); ++it) {
        if (it->token == token) {
          HeldMessage held = *it;
          dq.erase(it);
          --in_flight_;
          schedule_delivery(link_key.first, link_key.second, std::move(held.msg),
                            held.corrupted, now_, held.network, "deliver");
          break;
        }
      }
    });
  } else {
    schedule_delivery(from, to, msg, corrupted, deliver_at, network, "deliver");
    // Messages held for reordering go out right behind this one.
    auto hit = held_.find(link_key);
    if (hit != held_.end()) {
      while (!hit->second.empty()) {
        HeldMessage held = hit->second.front();
        hit->second.pop_front();
        --in_flight_;
        schedule_delivery(from, to, std::move(held.msg), held.corrupted,
                          deliver_at, held.network, "deliver");
      }
    }
  }

  if (duplicated) {
    ++traffic_.duplicated;
    schedule_delivery(from, to, msg, corrupted, deliver_at, network, "deliver_dup");
  }
}

}  // namespace ers::net
