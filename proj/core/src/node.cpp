#include "ers/node.hpp"

namespace ers {

Node::Node(net::Simulation& sim, discovery::DiscoveryService& discovery,
           net::NodeId id, Role role, std::string hostname, NodeConfig config)
    : sim_(sim),
      discovery_(discovery),
      id_(id),
      role_(role),
      hostname_(std::move(hostname)),
      store_(GraphId(id)),
      registry_(sim, id, store_, config.remote_search_timeout_ms),
      sync_(sim, id, role, store_, config.sync,
            {.interest = [this]() -> const std::set<EntityName>& {
              return registry_.interest();
            }}) {
  wire_up();
}

Node::Node(net::Simulation& sim, discovery::DiscoveryService& discovery,
           net::NodeId id, Role role, std::string hostname, NodeConfig config,
           TriStore store, std::set<EntityName> interest)
    : sim_(sim),
      discovery_(discovery),
      id_(id),
      role_(role),
      hostname_(std::move(hostname)),
      store_(std::move(store)),
      registry_(sim, id, store_, config.remote_search_timeout_ms),
      sync_(sim, id, role, store_, config.sync,
            {.interest = [this]() -> const std::set<EntityName>& {
              return registry_.interest();
            }}) {
  registry_.set_interest(std::move(interest));
  wire_up();
}

void Node::wire_up() {
  registry_.set_hooks({
      .interest_added =
          [this](const EntityName& e) { sync_.on_interest_added(e); },
      .link_peers = [this]() { return sync_.link_peers(); },
  });
  store_.set_commit_hook([this](Scope scope, const ChangeEntry& entry) {
    sync_.on_local_commit(scope, entry);
    if (commit_listener_) commit_listener_(scope, entry);
  });
}

Node::~Node() {
  sim_.unregister_handler(id_);
  discovery_.set_peer_callback(id_, nullptr);
}

void Node::start() {
  sim_.register_handler(id_,
                        [this](const wire::Message& msg) { handle_message(msg); });
  discovery_.set_peer_callback(
      id_, [this](const net::NodeId& peer, Role role, bool appeared) {
        sync_.on_peer(peer, role, appeared);
      });
  discovery_.node_started(id_, role_, hostname_);
}

void Node::handle_message(const wire::Message& msg) {
  switch (msg.kind) {
    case wire::Kind::SearchRequest:
    case wire::Kind::SearchResponse:
      registry_.handle_message(msg);
      return;
    default:
      sync_.handle_message(msg);
      return;
  }
}

nlohmann::json Node::snapshot() const {
  nlohmann::json j;
  j["store"] = store_.snapshot();
  nlohmann::json interest = nlohmann::json::array();
  for (const auto& e : registry_.interest()) interest.push_back(e.value);
  j["interest"] = interest;
  return j;
}

void Node::set_commit_listener(
    std::function<void(Scope, const ChangeEntry&)> fn) {
  commit_listener_ = std::move(fn);
}

}  // namespace ers
