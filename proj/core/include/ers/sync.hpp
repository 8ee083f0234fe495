#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ers/discovery.hpp"
#include "ers/netsim.hpp"
#include "ers/store.hpp"
#include "ers/wire.hpp"

namespace ers::sync {

using net::NodeId;
using net::SimTime;

/// The three in-scope synchronization types. CB_up is unfiltered; CC is
/// document-filtered; CB_down and BB are entity-filtered.
enum class LinkKind { CC, CBUp, CBDown, BB };

std::string_view to_string(LinkKind kind);

/// Canonical link identity, identical from both endpoints' perspective.
/// CC/BB store endpoints in ascending order; CB links store (contributor,
/// bridge).
struct LinkId {
  LinkKind kind = LinkKind::CC;
  NodeId a;
  NodeId b;

  auto operator<=>(const LinkId&) const = default;

  std::string str() const;
  static LinkId parse(const std::string& text);

  static LinkId cc(const NodeId& x, const NodeId& y);
  static LinkId bb(const NodeId& x, const NodeId& y);
  static LinkId cb_up(const NodeId& contributor, const NodeId& bridge);
  static LinkId cb_down(const NodeId& contributor, const NodeId& bridge);

  /// The endpoint that initiates replication rounds: the contributor for CB
  /// links, the lexicographically smaller node for CC/BB.
  const NodeId& owner() const;
  const NodeId& peer_of(const NodeId& self) const;
};

enum class FilterKind {
  None,                      // CB_up
  DocsInTargetCache,         // CC
  EntitiesInTargetInterest,  // CB_down
  EntitiesInTargetCache,     // BB
};

/// One directed replication stream within a link, with its own checkpoint.
struct Flow {
  int index = 0;
  NodeId source_node;
  Scope source_scope = Scope::Public;
  NodeId target_node;
  Scope target_scope = Scope::Cache;
  FilterKind filter = FilterKind::None;
};

/// The replicator entries a link expands to. Pure function of the link id,
/// so both endpoints agree on flow indexes.
std::vector<Flow> flows_for(const LinkId& link);

/// Desired link set for a node given the peers it currently sees. A
/// contributor that sees at least one bridge drops every CC link and keeps
/// exactly one CB_up and one CB_down per visible bridge.
std::set<LinkId> plan_links(const NodeId& self, Role self_role,
                            const std::map<NodeId, Role>& peers);

/// Target-side state a filter consults.
struct TargetView {
  std::set<std::string> cache_doc_ids;
  std::set<EntityName> interest;
  std::set<EntityName> cache_entities;
};

/// Keeps the entries the link kind lets through. New documents about
/// interesting entities pass entity filters; the CC document filter only
/// passes documents the target already holds.
std::vector<ChangeEntry> apply_filter(FilterKind kind,
                                      const std::vector<ChangeEntry>& entries,
                                      const TargetView& view);

struct SyncConfig {
  int batch_size = 10;
  int worker_count = 4;
  SimTime retry_timeout_ms = 500;
  int handshake_rounds = 3;
  /// Transport wait before a round attempt is abandoned. Also the
  /// replication latency cutoff: links with a round-trip above this value
  /// never complete an exchange.
  SimTime response_timeout_ms = 230;
  /// Idle pull flows re-poll at this cadence as a safety net for lost
  /// change notifications.
  SimTime idle_poll_interval_ms = 2500;

  void validate() const;
};

struct FlowStats {
  std::uint64_t rounds_completed = 0;
  std::uint64_t transfer_rounds = 0;
  std::uint64_t docs_transferred = 0;
  std::uint64_t timeouts = 0;
};

/// Per-node replication engine: plans links from discovery events, runs
/// rounds on the links it owns and serves the passive side of its peers'
/// rounds. A replication round is three request/response exchanges on the
/// wire (changes, diff, bulk). Checkpoints advance only after the target
/// acknowledges writes, survive link teardown and are lost on node restart
/// (the store is the durable part; a rescan is always safe).
class SyncEngine {
 public:
  struct Hooks {
    std::function<const std::set<EntityName>&()> interest;
  };

  SyncEngine(net::Simulation& sim, NodeId self, Role role, TriStore& store,
             SyncConfig config, Hooks hooks);
  ~SyncEngine();

  SyncEngine(const SyncEngine&) = delete;
  SyncEngine& operator=(const SyncEngine&) = delete;

  // -- inputs ----------------------------------------------------------------
  void on_peer(const NodeId& peer, Role role, bool appeared);
  void on_local_commit(Scope scope, const ChangeEntry& entry);
  void on_interest_added(const EntityName& entity);
  void handle_message(const wire::Message& msg);

  // -- introspection -----------------------------------------------------
  const std::set<LinkId>& planned_links() const { return planned_; }
  std::set<NodeId> link_peers() const;
  std::uint64_t checkpoint(const LinkId& link, int flow) const;
  const FlowStats& stats(const LinkId& link, int flow) const;
  std::uint64_t total_docs_transferred() const;

  const SyncConfig& config() const { return config_; }

 private:
  struct RoundState {
    bool running = false;
    std::uint64_t attempt = 0;
    SimTime started_at = 0;
    ChangeBatch batch;
    std::vector<ChangeEntry> filtered;
    std::vector<std::pair<std::string, Revision>> wanted;
  };

  struct FlowState {
    Flow flow;
    std::uint64_t checkpoint = 0;
    bool queued = false;
    bool dirty = true;
    bool subscribed = false;
    bool reset_requested = false;
    std::uint64_t poll_epoch = 0;
    RoundState round;
    FlowStats stats;
  };

  struct OwnedLink {
    LinkId id;
    std::vector<FlowState> flows;
  };

  struct Pending {
    std::string flow_key;
    LinkId link;
    int flow_index = -1;
    std::uint64_t attempt = 0;
    std::function<void(const nlohmann::json&)> on_response;
  };

  struct Subscription {
    NodeId subscriber;
    Scope scope = Scope::Public;
    bool armed = true;
  };

  // link management
  void recompute_links();
  void adopt_link(const LinkId& link);
  void teardown_link(const LinkId& link);
  void send_bootstrap_fetch(const LinkId& link,
                            const std::vector<EntityName>& entities);

  // round driver (owner side)
  void enqueue_runnable(const std::string& flow_key);
  void schedule_work();
  void start_round(const std::string& flow_key);
  void round_step_changes(const std::string& flow_key);
  void round_have_batch(const std::string& flow_key);
  void round_step_diff(const std::string& flow_key);
  void round_step_bulk(const std::string& flow_key);
  void round_finish_transfer(const std::string& flow_key, std::uint64_t docs);
  void round_step_commit(const std::string& flow_key, std::uint64_t docs,
                         int remaining);
  void finish_round(const std::string& flow_key, bool progress,
                    std::uint64_t docs);
  void fail_round(const std::string& flow_key, std::uint64_t attempt);
  void flow_idle(const std::string& flow_key);
  void ensure_subscribed(const std::string& flow_key);

  // messaging
  void send_request(const std::string& flow_key, wire::Kind kind,
                    nlohmann::json body,
                    std::function<void(const nlohmann::json&)> on_response);
  void respond(const wire::Message& req, wire::Kind kind, nlohmann::json body);

  // passive handlers
  void handle_changes_request(const wire::Message& msg);
  void handle_diff_request(const wire::Message& msg);
  void handle_bulk_request(const wire::Message& msg);
  void handle_subscribe(const wire::Message& msg);
  void handle_notify(const wire::Message& msg);
  void handle_entity_fetch(const wire::Message& msg);
  void handle_entity_fetch_response(const wire::Message& msg);

  TargetView own_target_view() const;
  FlowState* find_flow(const std::string& flow_key);
  const FlowState* find_flow(const std::string& flow_key) const;

  /// Schedules a callback that silently expires if this engine is
  /// destroyed first (node kill).
  void schedule(SimTime delay, std::function<void()> fn);

  net::Simulation& sim_;
  NodeId self_;
  Role role_;
  TriStore& store_;
  SyncConfig config_;
  Hooks hooks_;

  std::map<NodeId, Role> peers_;
  std::set<LinkId> planned_;
  std::map<LinkId, OwnedLink> owned_;
  std::map<std::string, std::uint64_t> retained_checkpoints_;

  std::deque<std::string> runnable_;
  int active_rounds_ = 0;

  std::uint64_t next_req_id_ = 1;
  std::map<std::uint64_t, Pending> pending_;

  std::map<std::string, Subscription> subscriptions_;  // passive side

  std::uint64_t total_docs_ = 0;
  std::shared_ptr<bool> alive_;
  FlowStats dummy_stats_;
};

std::string flow_key(const LinkId& link, int flow_index);

}  // namespace ers::sync
