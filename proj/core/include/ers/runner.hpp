#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ers/scenario.hpp"
#include "ers/sync.hpp"

namespace ers::harness {

struct AssertionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Run output: per-node completion time series, link census, scenario
/// assertions and traffic counters. Byte-identical across same-seed runs;
/// the completion and assertion sections are additionally independent of
/// duplication impairments.
struct Report {
  nlohmann::json json;

  bool all_assertions_pass() const;
  double min_final_completion() const;
  bool converged() const;
  std::string dump() const;
  /// The sections compared across duplication sweeps.
  nlohmann::json comparable_sections() const;
};

/// Executes one scenario deterministically: builds the simulated network,
/// seeds node data, schedules workload, timeline moves, fault policies and
/// metric sampling, then runs to the scenario duration.
class Runner {
 public:
  explicit Runner(Scenario scenario,
                  std::optional<std::uint64_t> seed_override = std::nullopt);
  ~Runner();

  Runner(const Runner&) = delete;
  Runner& operator=(const Runner&) = delete;

  Report run();

  net::Simulation& sim() { return *sim_; }
  const Scenario& scenario() const { return scenario_; }

  Node* node(const net::NodeId& id);
  bool node_alive(const net::NodeId& id) const;

  /// Distinct links currently planned anywhere in the system, by kind.
  std::map<sync::LinkKind, std::set<sync::LinkId>> link_census() const;

  /// (held, expected) cached-document counts for the node right now.
  std::pair<std::uint64_t, std::uint64_t> completion_counts(
      const net::NodeId& id) const;
  double completion_of(const net::NodeId& id) const;

  void kill_node(const net::NodeId& id);
  void restart_node(const net::NodeId& id);

  std::uint64_t privacy_violations() const { return privacy_violations_; }

  /// Trace with the scenario header line; the replay command re-executes
  /// from this alone.
  std::string trace_with_header() const;

 private:
  struct Slot {
    NodeSpec spec;
    std::unique_ptr<Node> runtime;
    nlohmann::json persisted;
    std::optional<TriStore> persisted_store;
    std::set<EntityName> persisted_interest;
    std::optional<net::NetworkId> network_at_down;
    bool alive = false;
  };

  void setup();
  void attach_runtime(Slot& slot, std::unique_ptr<Node> runtime);
  void apply_workload_op(const WorkloadOp& op);
  void sample_metrics();
  std::vector<AssertionResult> evaluate_assertions() const;
  const TriStore* store_of(const net::NodeId& id) const;
  const std::set<EntityName>* interest_of(const net::NodeId& id) const;

  Scenario scenario_;
  std::unique_ptr<net::Simulation> sim_;
  std::unique_ptr<discovery::DiscoveryService> discovery_;
  std::map<net::NodeId, Slot> slots_;
  std::unique_ptr<faults::ChaosMonkey> chaos_;
  std::unique_ptr<faults::LatencyMonkey> latency_;

  std::set<std::string> private_revs_;
  std::uint64_t privacy_violations_ = 0;
  std::map<net::NodeId, std::vector<std::pair<net::SimTime, double>>> series_;
  std::map<net::NodeId, double> last_completion_;
  nlohmann::json census_json_;
};

struct SweepRow {
  double value = 0.0;
  double min_completion = 0.0;
  bool converged = false;
  std::uint64_t privacy_violations = 0;
};

Scenario apply_axis(Scenario scenario, const std::string& axis, double value);
std::uint64_t derive_seed(std::uint64_t base, const std::string& axis,
                          double value);

/// One run per value with a derived seed; rows come back in value order.
std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& axis,
                                const std::vector<double>& values);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ReplayOutcome {
  bool ok = false;
  std::string detail;
};

/// Re-executes the scenario embedded in a trace header and verifies the
/// re-run reproduces the trace byte for byte.
ReplayOutcome verify_replay(const std::string& trace_content);

}  // namespace ers::harness
