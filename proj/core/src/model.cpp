#include "ers/model.hpp"

#include <algorithm>
#include <array>

#include "ers/digest.hpp"

namespace ers {

namespace {

bool has_control_char(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return c < 0x20; });
}

constexpr char kSeparator = '|';
constexpr char kEscape = '\\';

void append_escaped(std::string& out, std::string_view in) {
  for (char c : in) {
    if (c == kSeparator || c == kEscape) out.push_back(kEscape);
    out.push_back(c);
  }
}

const std::array<std::string_view, 5> kReservedKeys = {"_id", "deleted",
                                                       "entity", "graph", "rev"};

}  // namespace

EntityName::EntityName(std::string v) : value(std::move(v)) {
  if (value.empty()) throw ValidationError("entity name must be non-empty");
  if (has_control_char(value))
    throw ValidationError("entity name contains control characters: " + value);
}

GraphId::GraphId(std::string v) : value(std::move(v)) {
  if (value.empty()) throw ValidationError("graph id must be non-empty");
  if (has_control_char(value))
    throw ValidationError("graph id contains control characters: " + value);
}

Statement::Statement(EntityName e, std::string p, std::string v)
    : entity(std::move(e)), predicate(std::move(p)), value(std::move(v)) {
  if (predicate.empty()) throw ValidationError("predicate must be non-empty");
  if (is_reserved_predicate(predicate))
    throw ValidationError("predicate collides with a reserved document key: " +
                          predicate);
}

std::string Revision::to_string() const {
  return std::to_string(generation) + "-" + digest;
}

Revision Revision::parse(std::string_view text) {
  auto dash = text.find('-');
  if (dash == std::string_view::npos || dash == 0)
    throw ValidationError("malformed revision: " + std::string(text));
  Revision rev;
  rev.generation = std::stoull(std::string(text.substr(0, dash)));
  rev.digest = std::string(text.substr(dash + 1));
  if (rev.generation == 0 || rev.digest.empty())
    throw ValidationError("malformed revision: " + std::string(text));
  return rev;
}

bool EntityDocument::has_pair(const std::string& predicate,
                              const std::string& value) const {
  auto it = properties.find(predicate);
  if (it == properties.end()) return false;
  return std::find(it->second.begin(), it->second.end(), value) !=
         it->second.end();
}

bool is_reserved_predicate(std::string_view predicate) {
  return std::find(kReservedKeys.begin(), kReservedKeys.end(), predicate) !=
         kReservedKeys.end();
}

std::string make_doc_id(const GraphId& graph, const EntityName& entity) {
  std::string out;
  out.reserve(graph.value.size() + entity.value.size() + 1);
  append_escaped(out, graph.value);
  out.push_back(kSeparator);
  append_escaped(out, entity.value);
  return out;
}

std::pair<GraphId, EntityName> split_doc_id(const std::string& doc_id) {
  std::string graph, entity;
  std::string* current = &graph;
  bool escaped = false;
  bool seen_separator = false;
  for (char c : doc_id) {
    if (escaped) {
      current->push_back(c);
      escaped = false;
    } else if (c == kEscape) {
      escaped = true;
    } else if (c == kSeparator) {
      if (seen_separator)
        throw ValidationError("malformed doc id: " + doc_id);
      seen_separator = true;
      current = &entity;
    } else {
      current->push_back(c);
    }
  }
  if (escaped || !seen_separator)
    throw ValidationError("malformed doc id: " + doc_id);
  return {GraphId(std::move(graph)), EntityName(std::move(entity))};
}

EntityDocument apply_statement(const EntityDocument& doc, const Statement& stmt,
                               ApplyMode mode) {
  if (stmt.entity != doc.entity)
    throw EntityMismatchError("statement about " + stmt.entity.value +
                              " applied to document about " + doc.entity.value);
  if (doc.deleted)
    throw TombstoneWriteError("cannot modify tombstoned document " + doc.doc_id);

  EntityDocument out = doc;
  auto& values = out.properties[stmt.predicate];
  auto it = std::find(values.begin(), values.end(), stmt.value);
  if (mode == ApplyMode::Add) {
    if (it == values.end()) values.push_back(stmt.value);
  } else {
    if (it != values.end()) values.erase(it);
    if (values.empty()) out.properties.erase(stmt.predicate);
  }
  return out;
}

std::set<Statement> merge_statements(std::span<const EntityDocument> docs) {
  std::set<Statement> out;
  const EntityName* entity = nullptr;
  for (const auto& doc : docs) {
    if (doc.deleted) continue;
    if (entity && doc.entity != *entity)
      throw EntityMismatchError("cannot merge documents about " + entity->value +
                                " and " + doc.entity.value);
    entity = &doc.entity;
    for (const auto& [predicate, values] : doc.properties)
      for (const auto& value : values)
        out.insert(Statement(doc.entity, predicate, value));
  }
  return out;
}

nlohmann::json canonical_body_json(const EntityDocument& doc) {
  nlohmann::json j;  // object keys are kept sorted lexicographically
  j["_id"] = doc.doc_id;
  j["entity"] = doc.entity.value;
  j["graph"] = doc.graph.value;
  j["deleted"] = doc.deleted;
  for (const auto& [predicate, values] : doc.properties) {
    if (is_reserved_predicate(predicate))
      throw ValidationError("reserved key used as predicate: " + predicate);
    j[predicate] = values;
  }
  return j;
}

nlohmann::json canonical_json(const EntityDocument& doc) {
  nlohmann::json j = canonical_body_json(doc);
  j["rev"] = doc.revision ? doc.revision->to_string() : "";
  return j;
}

std::string canonical_serialize(const EntityDocument& doc) {
  return canonical_json(doc).dump();
}

EntityDocument document_from_json(const nlohmann::json& j) {
  EntityDocument doc;
  doc.doc_id = j.at("_id").get<std::string>();
  doc.entity = EntityName(j.at("entity").get<std::string>());
  doc.graph = GraphId(j.at("graph").get<std::string>());
  doc.deleted = j.at("deleted").get<bool>();
  if (j.contains("rev")) {
    auto rev = j.at("rev").get<std::string>();
    if (!rev.empty()) doc.revision = Revision::parse(rev);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (is_reserved_predicate(it.key())) continue;
    doc.properties[it.key()] = it.value().get<std::vector<std::string>>();
  }
  if (doc.deleted && !doc.properties.empty())
    throw ValidationError("tombstone with properties: " + doc.doc_id);
  return doc;
}

std::string compute_digest(const EntityDocument& body,
                           const std::optional<Revision>& parent) {
  std::string input = canonical_body_json(body).dump();
  input.push_back('\n');
  input += parent ? parent->to_string() : "none";
  return fingerprint_hex(input);
}

}  // namespace ers
