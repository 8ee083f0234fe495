#pragma once

#include <functional>
#include <memory>
#include <string>

#include "ers/discovery.hpp"
#include "ers/netsim.hpp"
#include "ers/registry.hpp"
#include "ers/store.hpp"
#include "ers/sync.hpp"

namespace ers {

struct NodeConfig {
  sync::SyncConfig sync;
  net::SimTime remote_search_timeout_ms = 2000;
};

/// One running ERS instance: the durable tri-store plus the volatile
/// runtime (registry API, sync engine, discovery presence). Construction
/// wires the pieces; start() publishes the node on its current network.
/// Destroying the node models an abrupt stop: the store (and the interest
/// set, which is derived from durable cache content) can be carried into a
/// replacement instance via snapshot()/restore().
class Node {
 public:
  Node(net::Simulation& sim, discovery::DiscoveryService& discovery,
       net::NodeId id, Role role, std::string hostname, NodeConfig config);

  /// Restart path: rebuilds the runtime around previously persisted state.
  Node(net::Simulation& sim, discovery::DiscoveryService& discovery,
       net::NodeId id, Role role, std::string hostname, NodeConfig config,
       TriStore store, std::set<EntityName> interest);

  ~Node();

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void start();

  const net::NodeId& id() const { return id_; }
  Role role() const { return role_; }
  const std::string& hostname() const { return hostname_; }

  Registry& api() { return registry_; }
  const Registry& api() const { return registry_; }
  TriStore& store() { return store_; }
  const TriStore& store() const { return store_; }
  sync::SyncEngine& sync() { return sync_; }
  const sync::SyncEngine& sync() const { return sync_; }

  /// Everything that survives a power loss.
  nlohmann::json snapshot() const;

  /// Extra observer of local commits (the harness ledger).
  void set_commit_listener(std::function<void(Scope, const ChangeEntry&)> fn);

 private:
  void wire_up();
  void handle_message(const wire::Message& msg);

  net::Simulation& sim_;
  discovery::DiscoveryService& discovery_;
  net::NodeId id_;
  Role role_;
  std::string hostname_;
  TriStore store_;
  Registry registry_;
  sync::SyncEngine sync_;
  std::function<void(Scope, const ChangeEntry&)> commit_listener_;
};

}  // namespace ers
