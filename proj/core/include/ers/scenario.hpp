#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ers/discovery.hpp"
#include "ers/faults.hpp"
#include "ers/netsim.hpp"
#include "ers/node.hpp"
#include "ers/registry.hpp"

namespace ers::harness {

struct InitialStatement {
  Statement stmt;
  Scope scope = Scope::Public;
};

struct NodeSpec {
  net::NodeId id;
  Role role = Role::Contributor;
  std::string hostname;
  std::optional<net::NetworkId> initial_network;
  std::vector<InitialStatement> initial_statements;
  std::vector<EntityName> initial_cache;
};

struct MoveEvent {
  net::SimTime t = 0;
  net::NodeId node;
  std::optional<net::NetworkId> network;  // nullopt = offline
};

struct WorkloadOp {
  enum class Kind {
    CreateEntity,
    AddStatement,
    RemoveStatement,
    DeleteEntity,
    CacheEntity,
    UncacheEntity,
    SearchCacheAll,  // remote search, then cache every result
  };

  net::SimTime t = 0;
  net::NodeId node;
  Kind kind = Kind::AddStatement;
  std::string entity;
  std::string predicate;
  std::string value;
  Scope scope = Scope::Public;
  Query query;  // SearchCacheAll only
};

struct AssertionSpec {
  enum class Kind {
    AllCompletionEq,      // every node's final completion == expect
    NodeCompletionEq,     // one node's final completion == expect
    MinCompletionLt,      // min final completion < expect
    NoLiveCacheDocAbout,  // node's cache holds no live doc about entity
    CacheDocsAboutEq,     // node's cache holds exactly `count` live docs about entity
    PublicPairPresent,    // node's own public doc carries (predicate, value)
  };

  std::string name;
  Kind kind = Kind::AllCompletionEq;
  net::NodeId node;
  std::string entity;
  std::string predicate;
  std::string value;
  double expect = 1.0;
  int count = 0;
};

/// A complete, repeatable experiment: topology, per-node seed data, a
/// membership timeline, a timed workload of API calls, fault policies and
/// the assertions the run must satisfy.
struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  net::SimTime duration_ms = 10000;
  std::vector<net::NetworkId> networks;
  std::map<net::NetworkId, net::Impairment> baseline_impairments;
  std::vector<NodeSpec> nodes;
  std::vector<MoveEvent> timeline;
  std::vector<WorkloadOp> workload;
  faults::ChaosPolicy chaos;
  faults::LatencyPolicy latency;
  discovery::DiscoveryService::Config discovery;
  NodeConfig node_config;
  net::SimTime sample_interval_ms = 1000;
  net::SimTime link_census_at_ms = -1;  // negative disables the census
  std::vector<AssertionSpec> assertions;

  nlohmann::json to_json() const;
  static Scenario from_json(const nlohmann::json& j);

  /// Semantic checks (references, time bounds). Throws ValidationError with
  /// the offending location in the message.
  void validate() const;
};

net::Impairment impairment_from_json(const nlohmann::json& j);
nlohmann::json impairment_to_json(const net::Impairment& imp);
std::string_view op_kind_name(WorkloadOp::Kind kind);

}  // namespace ers::harness
