#include "ers/faults.hpp"

#include <stdexcept>

namespace ers::faults {

void ChaosPolicy::validate() const {
  if (!enabled) return;
  if (interval_ms <= 0) throw std::invalid_argument("chaos interval must be positive");
  if (kill_prob < 0.0 || kill_prob > 1.0)
    throw std::invalid_argument("kill_prob must be in [0,1]");
  if (min_down_ms < 0 || max_down_ms < min_down_ms)
    throw std::invalid_argument("chaos down-time range is malformed");
  if (end_ms < start_ms) throw std::invalid_argument("chaos window is malformed");
}

std::vector<ChaosAction> chaos_tick(const ChaosPolicy& policy,
                                    const std::set<net::NodeId>& alive,
                                    net::SimTime now, net::Rng& rng) {
  std::vector<ChaosAction> actions;
  for (const auto& node : policy.eligible) {
    if (!alive.count(node)) continue;
    if (rng.uniform01() >= policy.kill_prob) continue;
    ChaosAction action;
    action.node = node;
    action.kill_at = now;
    action.restart_at =
        now + static_cast<net::SimTime>(rng.uniform_int(
                  static_cast<std::uint64_t>(policy.min_down_ms),
                  static_cast<std::uint64_t>(policy.max_down_ms)));
    actions.push_back(std::move(action));
  }
  return actions;
}

ChaosMonkey::ChaosMonkey(net::Simulation& sim, ChaosPolicy policy, Hooks hooks)
    : sim_(sim), policy_(std::move(policy)), hooks_(std::move(hooks)) {
  policy_.validate();
}

void ChaosMonkey::start() {
  if (!policy_.enabled) return;
  sim_.schedule_at(policy_.start_ms + policy_.interval_ms, [this]() { tick(); });
}

void ChaosMonkey::tick() {
  if (sim_.now() > policy_.end_ms) return;

  auto actions = chaos_tick(policy_, hooks_.alive_nodes(), sim_.now(),
                            sim_.stream("chaos"));
  for (const auto& action : actions) {
    sim_.record({sim_.now(), "chaos_kill", action.node, "-", "-", "-",
                 "down_until_" + std::to_string(action.restart_at)});
    hooks_.kill(action.node);
    sim_.schedule_at(action.restart_at, [this, node = action.node]() {
      sim_.record({sim_.now(), "chaos_restart", node, "-", "-", "-", "-"});
      hooks_.restart(node);
    });
  }
  sim_.schedule_after(policy_.interval_ms, [this]() { tick(); });
}

void LatencyPolicy::validate() const {
  for (const auto& window : schedule) {
    if (window.end_ms < window.start_ms)
      throw std::invalid_argument("latency window is malformed");
    window.impairment.validate();
  }
}

LatencyMonkey::LatencyMonkey(net::Simulation& sim, LatencyPolicy policy,
                             std::map<net::NetworkId, net::Impairment> baseline,
                             std::set<net::NetworkId> networks)
    : sim_(sim),
      policy_(std::move(policy)),
      baseline_(std::move(baseline)),
      networks_(std::move(networks)) {
  policy_.validate();
}

void LatencyMonkey::start() {
  if (policy_.schedule.empty()) return;
  std::set<net::SimTime> boundaries;
  for (const auto& window : policy_.schedule) {
    boundaries.insert(window.start_ms);
    boundaries.insert(window.end_ms);
  }
  for (net::SimTime t : boundaries)
    sim_.schedule_at(t, [this]() { apply_now(); });
}

void LatencyMonkey::apply_now() {
  net::SimTime t = sim_.now();
  for (const auto& network : networks_) {
    net::Impairment effective;
    auto bit = baseline_.find(network);
    if (bit != baseline_.end()) effective = bit->second;
    // Last matching window in schedule order wins.
    for (const auto& window : policy_.schedule) {
      if (t < window.start_ms || t >= window.end_ms) continue;
      if (!window.networks.empty() && !window.networks.count(network)) continue;
      effective = window.impairment;
    }
    if (sim_.effective_impairment_for_network(network) == effective) continue;
    sim_.set_network_impairment(network, effective);
  }
}

}  // namespace ers::faults
