#include "ers/discovery.hpp"

#include <stdexcept>

namespace ers {

std::string_view to_string(Role role) {
  return role == Role::Bridge ? "bridge" : "contributor";
}

Role role_from_string(std::string_view s) {
  if (s == "bridge") return Role::Bridge;
  if (s == "contributor") return Role::Contributor;
  throw std::invalid_argument("unknown role: " + std::string(s));
}

namespace discovery {

DiscoveryService::DiscoveryService(net::Simulation& sim, Config config)
    : sim_(sim), config_(config) {}

std::string DiscoveryService::fresh_service_name(const std::string& hostname) {
  static constexpr char alnum[] =
      "abcdefghijklmnopqrstuvwxyz0123456789";
  auto& rng = sim_.stream("discovery/names");
  for (;;) {
    std::string suffix;
    for (int i = 0; i < config_.suffix_len; ++i)
      suffix.push_back(alnum[rng.uniform_int(0, sizeof(alnum) - 2)]);
    std::string name = hostname + "-" + suffix;
    if (used_names_.insert(name).second) return name;
  }
}

ServiceRecord DiscoveryService::node_started(const net::NodeId& node, Role role,
                                             const std::string& hostname) {
  ObserverState& obs = observers_[node];
  obs.running = true;
  obs.role = role;
  obs.hostname = hostname;
  obs.pipeline_next_free = sim_.now();

  ServiceRecord rec;
  auto network = sim_.membership(node);
  if (network) {
    rec = announce(node, role, hostname, *network);
    // A joining node discovers the records already on the network, one at a
    // time, in announcement order.
    for (std::uint64_t id : by_network_[*network]) {
      if (records_.at(id).rec.node == node) continue;
      enqueue_visibility(node, id);
    }
  }
  return rec;
}

void DiscoveryService::node_stopped(const net::NodeId& node) {
  auto it = observers_.find(node);
  if (it == observers_.end()) return;
  it->second.running = false;
  clear_observer_view(node);
  // Its records linger until the TTL runs out.
  std::vector<std::uint64_t> owned;
  for (auto& [id, state] : records_)
    if (state.rec.node == node) owned.push_back(id);
  for (std::uint64_t id : owned) begin_expiry(id);
}

bool DiscoveryService::running(const net::NodeId& node) const {
  auto it = observers_.find(node);
  return it != observers_.end() && it->second.running;
}

void DiscoveryService::set_peer_callback(const net::NodeId& observer,
                                         PeerCallback cb) {
  observers_[observer].cb = std::move(cb);
}

std::vector<ServiceRecord> DiscoveryService::browse(
    const net::NodeId& observer) const {
  std::vector<ServiceRecord> out;
  auto it = observers_.find(observer);
  if (it == observers_.end()) return out;
  for (const auto& [id, rec] : it->second.visible) out.push_back(rec);
  return out;
}

std::map<net::NodeId, Role> DiscoveryService::visible_peers(
    const net::NodeId& observer) const {
  std::map<net::NodeId, Role> out;
  auto it = observers_.find(observer);
  if (it == observers_.end()) return out;
  for (const auto& [id, rec] : it->second.visible) out[rec.node] = rec.role;
  return out;
}

void DiscoveryService::on_membership_change(
    const net::NodeId& node, const std::optional<net::NetworkId>& from,
    const std::optional<net::NetworkId>& to) {
  auto it = observers_.find(node);
  if (it == observers_.end() || !it->second.running) return;

  // Records on the old network stay in peer caches until the TTL runs out.
  if (from) {
    std::vector<std::uint64_t> owned;
    for (auto& [id, state] : records_)
      if (state.rec.node == node && state.rec.network == *from)
        owned.push_back(id);
    for (std::uint64_t id : owned) begin_expiry(id);
  }

  clear_observer_view(node);

  if (to) {
    announce(node, it->second.role, it->second.hostname, *to);
    it->second.pipeline_next_free = sim_.now();
    for (std::uint64_t id : by_network_[*to]) {
      if (records_.at(id).rec.node == node) continue;
      enqueue_visibility(node, id);
    }
  }
}

ServiceRecord DiscoveryService::announce(const net::NodeId& node, Role role,
                                         const std::string& hostname,
                                         const net::NetworkId& network) {
  RecordState state;
  state.rec.id = next_record_id_++;
  state.rec.service_name = fresh_service_name(hostname);
  state.rec.node = node;
  state.rec.role = role;
  state.rec.network = network;
  std::uint64_t id = state.rec.id;
  ServiceRecord rec = state.rec;
  records_[id] = std::move(state);
  by_network_[network].insert(id);

  sim_.record({sim_.now(), "announce", node, "-", network, "-",
               rec.service_name});

  for (auto& [observer, obs] : observers_) {
    if (observer == node || !obs.running) continue;
    if (sim_.membership(observer) != std::optional<net::NetworkId>(network))
      continue;
    enqueue_visibility(observer, id);
  }
  return rec;
}

void DiscoveryService::enqueue_visibility(const net::NodeId& observer,
                                          std::uint64_t record_id) {
  ObserverState& obs = observers_[observer];
  net::SimTime visible_at =
      std::max(sim_.now(), obs.pipeline_next_free) + config_.per_peer_delay_ms;
  obs.pipeline_next_free = visible_at;
  net::NetworkId network = records_.at(record_id).rec.network;
  sim_.schedule_at(visible_at, [this, observer, record_id, network]() {
    fire_visibility(observer, record_id, network);
  });
}

void DiscoveryService::fire_visibility(const net::NodeId& observer,
                                       std::uint64_t record_id,
                                       const net::NetworkId& network) {
  auto oit = observers_.find(observer);
  if (oit == observers_.end() || !oit->second.running) return;
  if (sim_.membership(observer) != std::optional<net::NetworkId>(network)) return;
  auto rit = records_.find(record_id);
  if (rit == records_.end()) return;
  const RecordState& state = rit->second;
  if (state.rec.network != network) return;
  if (state.expiring && sim_.now() >= state.expire_at) return;
  add_visible(oit->second, observer, state.rec);
}

void DiscoveryService::add_visible(ObserverState& obs,
                                   const net::NodeId& observer,
                                   const ServiceRecord& rec) {
  if (obs.visible.count(rec.id)) return;
  obs.visible[rec.id] = rec;
  if (++obs.peer_refs[rec.node] == 1) {
    sim_.record({sim_.now(), "peer_appeared", observer, rec.node, "-", "-",
                 std::string(to_string(rec.role))});
    if (obs.cb) obs.cb(rec.node, rec.role, true);
  }
}

void DiscoveryService::begin_expiry(std::uint64_t record_id) {
  auto it = records_.find(record_id);
  if (it == records_.end() || it->second.expiring) return;
  it->second.expiring = true;
  it->second.expire_at = sim_.now() + config_.ttl_ms;
  sim_.schedule_at(it->second.expire_at,
                   [this, record_id]() { expire_record(record_id); });
}

void DiscoveryService::expire_record(std::uint64_t record_id) {
  auto it = records_.find(record_id);
  if (it == records_.end()) return;
  ServiceRecord rec = it->second.rec;
  by_network_[rec.network].erase(record_id);
  records_.erase(it);

  for (auto& [observer, obs] : observers_) {
    auto vit = obs.visible.find(record_id);
    if (vit == obs.visible.end()) continue;
    obs.visible.erase(vit);
    if (--obs.peer_refs[rec.node] == 0) {
      obs.peer_refs.erase(rec.node);
      sim_.record({sim_.now(), "peer_vanished", observer, rec.node, "-", "-",
                   std::string(to_string(rec.role))});
      if (obs.cb) obs.cb(rec.node, rec.role, false);
    }
  }
}

void DiscoveryService::clear_observer_view(const net::NodeId& observer) {
  ObserverState& obs = observers_[observer];
  std::vector<std::pair<net::NodeId, Role>> vanished;
  for (const auto& [peer, refs] : obs.peer_refs) {
    Role role = Role::Contributor;
    for (const auto& [id, rec] : obs.visible)
      if (rec.node == peer) role = rec.role;
    vanished.emplace_back(peer, role);
  }
  obs.visible.clear();
  obs.peer_refs.clear();
  for (const auto& [peer, role] : vanished) {
    sim_.record({sim_.now(), "peer_vanished", observer, peer, "-", "-",
                 std::string(to_string(role))});
    if (obs.cb) obs.cb(peer, role, false);
  }
}

}  // namespace discovery
}  // namespace ers
