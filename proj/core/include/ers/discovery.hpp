#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ers/netsim.hpp"

namespace ers {

enum class Role { Contributor, Bridge };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

namespace discovery {

/// One published zeroconf service. Service names are the host name plus a
/// random suffix so that same-named hosts never shadow each other.
struct ServiceRecord {
  std::uint64_t id = 0;
  std::string service_name;
  net::NodeId node;
  Role role = Role::Contributor;
  net::NetworkId network;
};

/// Simulated zeroconf: announcements, staggered per-record discovery delay
/// (time to a full peer list grows linearly with the peer count) and TTL
/// expiry after departure. Peer appeared/vanished events feed the sync
/// layer.
class DiscoveryService {
 public:
  struct Config {
    net::SimTime per_peer_delay_ms = 75;
    net::SimTime ttl_ms = 2000;
    int suffix_len = 6;
  };

  DiscoveryService(net::Simulation& sim, Config config);

  /// Starts the node's daemon: publishes a service record on its current
  /// network and begins observing peers.
  ServiceRecord node_started(const net::NodeId& node, Role role,
                             const std::string& hostname);

  /// Abrupt stop (power loss or shutdown): no goodbye, records linger until
  /// the TTL runs out.
  void node_stopped(const net::NodeId& node);

  bool running(const net::NodeId& node) const;

  /// appeared=true on first visibility of a peer, false when its last
  /// record expires.
  using PeerCallback =
      std::function<void(const net::NodeId& peer, Role role, bool appeared)>;
  void set_peer_callback(const net::NodeId& observer, PeerCallback cb);

  /// Records currently visible to the observer, excluding its own.
  std::vector<ServiceRecord> browse(const net::NodeId& observer) const;

  /// Peers with at least one visible record.
  std::map<net::NodeId, Role> visible_peers(const net::NodeId& observer) const;

  /// Wired to Simulation::set_membership_hook by the owner of both objects.
  void on_membership_change(const net::NodeId& node,
                            const std::optional<net::NetworkId>& from,
                            const std::optional<net::NetworkId>& to);

  const Config& config() const { return config_; }

 private:
  struct RecordState {
    ServiceRecord rec;
    bool expiring = false;
    net::SimTime expire_at = 0;  // meaningful when expiring
  };

  struct ObserverState {
    bool running = false;
    Role role = Role::Contributor;
    std::string hostname;
    net::SimTime pipeline_next_free = 0;
    std::map<std::uint64_t, ServiceRecord> visible;
    std::map<net::NodeId, int> peer_refs;
    PeerCallback cb;
  };

  ServiceRecord announce(const net::NodeId& node, Role role,
                         const std::string& hostname,
                         const net::NetworkId& network);
  void enqueue_visibility(const net::NodeId& observer, std::uint64_t record_id);
  void fire_visibility(const net::NodeId& observer, std::uint64_t record_id,
                       const net::NetworkId& network);
  void begin_expiry(std::uint64_t record_id);
  void expire_record(std::uint64_t record_id);
  void clear_observer_view(const net::NodeId& observer);
  void add_visible(ObserverState& obs, const net::NodeId& observer,
                   const ServiceRecord& rec);
  std::string fresh_service_name(const std::string& hostname);

  net::Simulation& sim_;
  Config config_;
  std::uint64_t next_record_id_ = 1;
  std::map<std::uint64_t, RecordState> records_;
  std::map<net::NetworkId, std::set<std::uint64_t>> by_network_;
  std::map<net::NodeId, ObserverState> observers_;
  std::set<std::string> used_names_;
};

}  // namespace discovery
}  // namespace ers
