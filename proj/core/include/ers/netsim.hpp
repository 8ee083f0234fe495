#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ers/wire.hpp"

namespace ers::net {

using SimTime = std::int64_t;  // milliseconds
using NodeId = std::string;
using NetworkId = std::string;

/// Per-link degradation parameters applied to every sent message.
struct Impairment {
  SimTime one_way_latency_ms = 0;
  double loss_prob = 0.0;
  double corruption_prob = 0.0;
  double duplication_prob = 0.0;
  double reorder_prob = 0.0;

  void validate() const;
  bool operator==(const Impairment&) const = default;
};

/// Deterministic uniform draws on top of mt19937_64. The mapping from raw
/// engine output to doubles is fixed here so traces do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    // hi inclusive; modulo bias is irrelevant at simulation scales
    return lo + engine_() % (hi - lo + 1);
  }

 private:
  std::mt19937_64 engine_;
};

/// One line of the simulation trace. Serialized as
/// `time_ms,event_kind,src,dst,link,payload_digest,outcome` so two runs can
/// be compared byte for byte.
struct TraceRecord {
  SimTime time_ms = 0;
  std::string kind;
  std::string src = "-";
  std::string dst = "-";
  std::string link = "-";
  std::string digest = "-";
  std::string outcome = "-";

  std::string to_line() const;
};

struct TrafficCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t corrupted = 0;
  std::uint64_t duplicated = 0;
  std::uint64_t dropped_offline = 0;
  std::uint64_t unroutable = 0;
  std::uint64_t reordered = 0;
};

/// Deterministic discrete-event network: simulated clock, networks with
/// per-link impairments, and an event queue. (scenario, seed) fully
/// determines the trace; the whole simulation is single-threaded.
class Simulation {
 public:
  explicit Simulation(std::uint64_t seed);

  SimTime now() const { return now_; }
  std::uint64_t seed() const { return seed_; }

  void schedule_at(SimTime t, std::function<void()> fn);
  void schedule_after(SimTime delay, std::function<void()> fn);

  /// Fires events up to and including time t. Returns the count fired.
  std::size_t advance_until(SimTime t);

  /// Drains the queue. Returns the count fired.
  std::size_t advance_until_idle();

  // -- topology ------------------------------------------------------------
  void add_network(const NetworkId& network);
  bool has_network(const NetworkId& network) const;

  /// Moves a node onto a network (or offline with nullopt). A node belongs
  /// to at most one network at a time. In-flight messages addressed to it
  /// are dropped at delivery time.
  void set_membership(const NodeId& node, const std::optional<NetworkId>& network);
  std::optional<NetworkId> membership(const NodeId& node) const;

  void set_network_impairment(const NetworkId& network, const Impairment& imp);
  void set_pair_impairment(const NodeId& src, const NodeId& dst,
                           const std::optional<Impairment>& imp);
  Impairment effective_impairment(const NodeId& src, const NodeId& dst) const;
  Impairment effective_impairment_for_network(const NetworkId& network) const;

  /// Hook invoked whenever membership changes; the discovery layer uses it.
  void set_membership_hook(
      std::function<void(const NodeId&, const std::optional<NetworkId>&,
                         const std::optional<NetworkId>&)> hook);

  // -- messaging -----------------------------------------------------------
  void register_handler(const NodeId& node,
                        std::function<void(const wire::Message&)> handler);
  void unregister_handler(const NodeId& node);

  /// Applies the link impairments and schedules delivery. Undeliverable and
  /// lost messages fail silently; callers observe failures as timeouts.
  void send(const NodeId& from, const NodeId& to, wire::Message msg);

  /// Inspection hook fired for every send before impairments; the harness
  /// uses it for privacy audits and message accounting.
  void set_send_hook(std::function<void(const wire::Message&)> hook);

  /// Named deterministic RNG stream, lazily created from (seed, key).
  Rng& stream(const std::string& key);

  void record(TraceRecord rec);
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::string trace_text() const;

  const TrafficCounters& traffic() const { return traffic_; }

  /// Messages scheduled but not yet delivered or dropped.
  std::size_t in_flight() const { return in_flight_; }

 private:
  struct Event {
    SimTime t;
    std::uint64_t order;
    std::function<void()> fn;
  };
  struct EventCompare {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.order > b.order;
    }
  };

  void deliver(const NodeId& to, wire::Message msg, bool corrupted,
               const NetworkId& network_at_send, const char* kind);
  void schedule_delivery(const NodeId& from, const NodeId& to, wire::Message msg,
                         bool corrupted, SimTime at, const NetworkId& network,
                         const char* kind);

  std::uint64_t seed_;
  SimTime now_ = 0;
  std::uint64_t order_counter_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventCompare> queue_;

  std::set<NetworkId> networks_;
  std::map<NodeId, NetworkId> membership_;
  std::map<NetworkId, Impairment> network_impairment_;
  std::map<std::pair<NodeId, NodeId>, Impairment> pair_impairment_;

  std::map<NodeId, std::function<void(const wire::Message&)>> handlers_;
  std::map<std::string, Rng> streams_;

  // Reordered messages wait here until the next send on the same directed
  // link; a timed release caps the wait when the link goes quiet.
  struct HeldMessage {
    wire::Message msg;
    bool corrupted;
    NetworkId network;
    std::uint64_t token;
  };
  std::map<std::pair<NodeId, NodeId>, std::deque<HeldMessage>> held_;
  std::uint64_t hold_token_ = 0;

  std::function<void(const wire::Message&)> send_hook_;
  std::function<void(const NodeId&, const std::optional<NetworkId>&,
                     const std::optional<NetworkId>&)> membership_hook_;

  std::vector<TraceRecord> trace_;
  TrafficCounters traffic_;
  std::size_t in_flight_ = 0;

  static constexpr SimTime kReorderHoldCapMs = 1000;
};

}  // namespace ers::net
