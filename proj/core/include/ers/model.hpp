#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ers {

/// Thrown when a domain value violates its invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a statement is applied to a document about a different entity.
class EntityMismatchError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown when writing statements into a tombstoned document.
class TombstoneWriteError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// IRI-like name of a registry entity, e.g. "urn:ers:people/alice".
/// Non-empty and free of control characters.
struct EntityName {
  std::string value;

  EntityName() = default;
  explicit EntityName(std::string v);

  auto operator<=>(const EntityName&) const = default;
};

/// Identifies the authoring node's graph. One graph per node instance.
struct GraphId {
  std::string value;

  GraphId() = default;
  explicit GraphId(std::string v);

  auto operator<=>(const GraphId&) const = default;
};

/// One RDF-style (entity, predicate, value) tuple.
struct Statement {
  EntityName entity;
  std::string predicate;
  std::string value;

  Statement() = default;
  Statement(EntityName e, std::string p, std::string v);

  auto operator<=>(const Statement&) const = default;
};

/// Document version: generation counter plus content fingerprint.
/// Total order: by generation, then lexicographically by digest.
struct Revision {
  std::uint64_t generation = 0;
  std::string digest;

  auto operator<=>(const Revision&) const = default;

  std::string to_string() const;  // "generation-digest"
  static Revision parse(std::string_view text);
};

/// One author's statements about one entity; the unit of storage and
/// replication. properties maps predicate -> values (set semantics, value
/// insertion order preserved). A tombstone has deleted=true and no
/// properties.
struct EntityDocument {
  std::string doc_id;
  EntityName entity;
  GraphId graph;
  std::map<std::string, std::vector<std::string>> properties;
  std::optional<Revision> revision;
  bool deleted = false;

  bool has_pair(const std::string& predicate, const std::string& value) const;

  bool operator==(const EntityDocument&) const = default;
};

/// Top-level keys of the canonical serialization; not usable as predicates.
bool is_reserved_predicate(std::string_view predicate);

/// Deterministic, injective join of (graph, entity). Separator characters in
/// the inputs are escaped so distinct pairs can never collide.
std::string make_doc_id(const GraphId& graph, const EntityName& entity);

/// Inverse of make_doc_id. Throws ValidationError on malformed ids.
std::pair<GraphId, EntityName> split_doc_id(const std::string& doc_id);

enum class ApplyMode { Add, Remove };

/// Returns a copy of `doc` with the (predicate, value) pair inserted or
/// removed under set semantics. The revision is left untouched; assigning
/// revisions is the store's job.
EntityDocument apply_statement(const EntityDocument& doc, const Statement& stmt,
                               ApplyMode mode);

/// Union of all (predicate, value) pairs across documents about one entity.
/// Tombstones contribute nothing. Throws EntityMismatchError when live
/// documents disagree on the entity.
std::set<Statement> merge_statements(std::span<const EntityDocument> docs);

/// Canonical JSON for the document body (everything except `rev`). Keys are
/// sorted lexicographically; value arrays keep insertion order.
nlohmann::json canonical_body_json(const EntityDocument& doc);

/// Canonical JSON including `rev`; the bit-exact form used for wire
/// transfer, snapshots and traces.
nlohmann::json canonical_json(const EntityDocument& doc);

/// Compact dump of canonical_json; byte-stable for identical documents.
std::string canonical_serialize(const EntityDocument& doc);

/// Parses a document from its canonical JSON form.
EntityDocument document_from_json(const nlohmann::json& j);

/// Content fingerprint over the canonical body serialization and the parent
/// revision. Pure: identical bodies with identical parents yield identical
/// digests on any platform.
std::string compute_digest(const EntityDocument& body,
                           const std::optional<Revision>& parent);

}  // namespace ers
