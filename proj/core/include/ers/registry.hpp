#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ers/netsim.hpp"
#include "ers/store.hpp"
#include "ers/wire.hpp"

namespace ers {

enum class RegistryStatus { Ok, AlreadyExists, NotFound, Conflict };

/// Read-side view of an entity: the merged statements of every live local
/// document about it, annotated with where each statement came from.
struct EntityView {
  struct AnnotatedStatement {
    Statement stmt;
    Scope origin = Scope::Public;
    GraphId graph;

    auto operator<=>(const AnnotatedStatement&) const = default;
  };

  EntityName entity;
  std::set<AnnotatedStatement> statements;
};

struct Query {
  enum class Kind { ByName, ByPropertyValue };

  Kind kind = Kind::ByName;
  std::string entity_pattern;  // exact name for ByName
  std::string predicate;
  std::string value;
  std::set<Scope> scope_mask = {Scope::Public, Scope::Private, Scope::Cache};
  bool remote = false;

  void validate() const;
  nlohmann::json to_json() const;
  static Query from_json(const nlohmann::json& j);
};

struct SearchResult {
  std::vector<EntityName> names;
  bool partial = false;
};

/// The user-facing API of a node: entity lifecycle, statements in the
/// public or private scope, merged retrieval, local and remote search, and
/// cache interest management. Invoked only from the owning node's
/// simulation context.
class Registry {
 public:
  struct Hooks {
    std::function<void(const EntityName&)> interest_added;
    std::function<std::set<net::NodeId>()> link_peers;
  };

  Registry(net::Simulation& sim, net::NodeId self, TriStore& store,
           net::SimTime remote_search_timeout_ms);
  ~Registry();

  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  void set_hooks(Hooks hooks);

  /// Creates an empty document about the entity in the public or private
  /// scope. AlreadyExists when a live local document is present.
  RegistryStatus create_entity(const EntityName& name, Scope scope);

  /// Adds one (predicate, value) pair; the scoped document is created
  /// automatically when absent. Set semantics: adding twice is a no-op.
  RegistryStatus add_statement(const Statement& stmt, Scope scope);

  RegistryStatus remove_statement(const Statement& stmt, Scope scope);

  /// Tombstones the local document so the deletion replicates to cachers.
  RegistryStatus delete_entity(const EntityName& name, Scope scope);

  /// Merge across the public, private and cache stores.
  EntityView get_entity(const EntityName& name) const;

  SearchResult search_local(const Query& q) const;

  /// Local scan plus, when q.remote, a fan-out over currently established
  /// links. The callback fires once, with partial=true when some peers did
  /// not answer within the timeout.
  void search(const Query& q, std::function<void(SearchResult)> done);

  /// Adds the entity to the node's cache interest set; documents arrive via
  /// replication (and keep arriving as authors update them).
  void cache_entity(const EntityName& name);

  /// Drops the interest and purges cached copies; updates stop.
  void uncache_entity(const EntityName& name);

  const std::set<EntityName>& interest() const { return interest_; }
  void set_interest(std::set<EntityName> interest);

  void handle_message(const wire::Message& msg);

 private:
  struct PendingSearch {
    std::set<net::NodeId> awaiting;
    std::set<EntityName> names;
    std::function<void(SearchResult)> done;
  };

  void finish_search(std::uint64_t id, bool timed_out);

  net::Simulation& sim_;
  net::NodeId self_;
  TriStore& store_;
  net::SimTime search_timeout_;
  Hooks hooks_;
  std::set<EntityName> interest_;
  std::map<std::uint64_t, PendingSearch> searches_;
  std::uint64_t next_search_id_ = 1;
  std::shared_ptr<bool> alive_;

  static constexpr int kPutRetries = 3;
};

}  // namespace ers
