#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ers/netsim.hpp"

namespace ers::faults {

/// Random abrupt node termination: every interval, each eligible live node
/// is killed with kill_prob and restarted after a uniform down time.
/// Deterministic under a fixed seed stream.
struct ChaosPolicy {
  bool enabled = false;
  net::SimTime interval_ms = 10000;
  double kill_prob = 0.0;
  net::SimTime min_down_ms = 5000;
  net::SimTime max_down_ms = 20000;
  std::set<net::NodeId> eligible;
  net::SimTime start_ms = 0;
  net::SimTime end_ms = 0;

  void validate() const;
};

struct ChaosAction {
  net::NodeId node;
  net::SimTime kill_at = 0;
  net::SimTime restart_at = 0;
};

/// One scheduler tick: decides which eligible live nodes die now and when
/// they come back. Exposed for direct testing.
std::vector<ChaosAction> chaos_tick(const ChaosPolicy& policy,
                                    const std::set<net::NodeId>& alive,
                                    net::SimTime now, net::Rng& rng);

class ChaosMonkey {
 public:
  struct Hooks {
    std::function<std::set<net::NodeId>()> alive_nodes;
    std::function<void(const net::NodeId&)> kill;
    std::function<void(const net::NodeId&)> restart;
  };

  ChaosMonkey(net::Simulation& sim, ChaosPolicy policy, Hooks hooks);
  void start();

 private:
  void tick();

  net::Simulation& sim_;
  ChaosPolicy policy_;
  Hooks hooks_;
};

/// Scheduled impairment windows. Overlapping windows resolve to the last
/// entry in schedule order; outside any window the scenario baseline
/// applies.
struct LatencyWindow {
  net::SimTime start_ms = 0;
  net::SimTime end_ms = 0;
  std::set<net::NetworkId> networks;  // empty = every network
  net::Impairment impairment;
};

struct LatencyPolicy {
  std::vector<LatencyWindow> schedule;

  void validate() const;
};

class LatencyMonkey {
 public:
  LatencyMonkey(net::Simulation& sim, LatencyPolicy policy,
                std::map<net::NetworkId, net::Impairment> baseline,
                std::set<net::NetworkId> networks);
  void start();

 private:
  void apply_now();

  net::Simulation& sim_;
  LatencyPolicy policy_;
  std::map<net::NetworkId, net::Impairment> baseline_;
  std::set<net::NetworkId> networks_;
};

}  // namespace ers::faults
