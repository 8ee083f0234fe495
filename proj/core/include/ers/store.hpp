#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ers/model.hpp"

namespace ers {

/// The three logical databases every node owns.
enum class Scope { Public, Private, Cache };

std::string_view to_string(Scope scope);
Scope scope_from_string(std::string_view s);

/// One committed change: position in the scope's sequence plus the winning
/// revision at commit time.
struct ChangeEntry {
  std::uint64_t seq = 0;
  std::string doc_id;
  Revision rev;
  bool deleted = false;

  bool operator==(const ChangeEntry&) const = default;
};

/// A window of the change feed. Entries are strictly increasing in seq and
/// compacted to the latest entry per document. last_seq is the highest
/// sequence examined, so a consumer that resumes from it never re-reads
/// entries it has already seen (and never skips a document's latest entry).
struct ChangeBatch {
  std::uint64_t since = 0;
  std::vector<ChangeEntry> entries;
  std::uint64_t last_seq = 0;
};

enum class PutStatus { Ok, Conflict, NotFound, AlreadyExists };

struct PutResult {
  PutStatus status = PutStatus::Ok;
  Revision rev;

  bool ok() const { return status == PutStatus::Ok; }
};

/// Per-node versioned document store with public, private and cache scopes.
/// Writes are durable at commit; only head revisions (plus tombstones) are
/// retained. Single ownership: all access is serialized by the owning
/// node's event-loop context.
class TriStore {
 public:
  explicit TriStore(GraphId owner);

  const GraphId& owner() const { return owner_; }

  /// Optimistic-concurrency write of a locally authored document. For
  /// updates expected_parent must equal the current head; for creates the
  /// document must be absent or tombstoned. Assigns the new revision.
  PutResult put(Scope scope, EntityDocument body,
                const std::optional<Revision>& expected_parent);

  /// Replication write path: stores a document carrying a remote revision
  /// as an additional head; the current head is recomputed by revision
  /// order. Only the cache scope accepts replicated writes. Returns true
  /// when the write was accepted (it may still lose to a newer head).
  bool force_put(Scope scope, const EntityDocument& doc);

  /// Writes a tombstone head so the deletion replicates.
  PutResult delete_doc(Scope scope, const std::string& doc_id,
                       const std::optional<Revision>& expected_parent);

  /// Current non-deleted head, or nullopt for absent/tombstoned documents.
  std::optional<EntityDocument> get(Scope scope, const std::string& doc_id) const;

  /// Current head including tombstones; replication-internal.
  std::optional<EntityDocument> get_head(Scope scope,
                                         const std::string& doc_id) const;

  ChangeBatch changes_since(Scope scope, std::uint64_t since,
                            std::size_t limit) const;

  /// Subset of `offered` whose exact revision is not among the stored heads.
  std::vector<std::pair<std::string, Revision>> revs_diff(
      Scope scope,
      std::span<const std::pair<std::string, Revision>> offered) const;

  /// Local-only removal (no tombstone, nothing replicates). Used when a
  /// cached entity is dropped from the interest set.
  void purge(Scope scope, const std::string& doc_id);

  std::uint64_t seq(Scope scope) const;

  /// Live (non-deleted) heads, in doc_id order.
  std::vector<EntityDocument> live_docs(Scope scope) const;

  /// All heads including tombstones, in doc_id order.
  std::vector<EntityDocument> all_heads(Scope scope) const;

  /// The full head set of one document (same-generation siblings included).
  std::vector<EntityDocument> heads_of(Scope scope, const std::string& doc_id) const;

  bool contains(Scope scope, const std::string& doc_id) const;

  std::set<std::string> doc_ids(Scope scope) const;

  /// Entities having at least one head (live or tombstoned) in the scope.
  std::set<EntityName> entities(Scope scope) const;

  /// Fires after every committed change (put, delete, accepted force_put).
  void set_commit_hook(std::function<void(Scope, const ChangeEntry&)> hook);

  /// Cumulative read-operation counters per scope, for privacy audits.
  std::uint64_t reads(Scope scope) const;

  /// Byte-stable snapshot of every head plus the three sequence counters.
  /// The change log is persisted in compacted form (latest entry per doc),
  /// which is exactly what changes_since exposes.
  nlohmann::json snapshot() const;
  static TriStore from_snapshot(const nlohmann::json& j);

 private:
  struct DocRecord {
    // All heads share the maximum generation; sorted by digest ascending,
    // so the winner is heads.back().
    std::vector<EntityDocument> heads;
    std::uint64_t latest_seq = 0;
  };

  struct ScopeStore {
    std::map<std::string, DocRecord> docs;
    std::vector<ChangeEntry> log;  // ordered by seq
    std::uint64_t seq = 0;
    mutable std::uint64_t reads = 0;
  };

  ScopeStore& at(Scope scope);
  const ScopeStore& at(Scope scope) const;
  void commit(Scope scope, ScopeStore& s, const EntityDocument& winner);

  GraphId owner_;
  ScopeStore public_, private_, cache_;
  std::function<void(Scope, const ChangeEntry&)> commit_hook_;
};

}  // namespace ers
