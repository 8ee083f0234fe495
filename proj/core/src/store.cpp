#include "ers/store.hpp"

#include <algorithm>
#include <stdexcept>

namespace ers {

std::string_view to_string(Scope scope) {
  switch (scope) {
    case Scope::Public: return "public";
    case Scope::Private: return "private";
    case Scope::Cache: return "cache";
  }
  throw std::logic_error("bad scope");
}

Scope scope_from_string(std::string_view s) {
  if (s == "public") return Scope::Public;
  if (s == "private") return Scope::Private;
  if (s == "cache") return Scope::Cache;
  throw ValidationError("unknown scope: " + std::string(s));
}

TriStore::TriStore(GraphId owner) : owner_(std::move(owner)) {}

TriStore::ScopeStore& TriStore::at(Scope scope) {
  switch (scope) {
    case Scope::Public: return public_;
    case Scope::Private: return private_;
    case Scope::Cache: return cache_;
  }
  throw std::logic_error("bad scope");
}

const TriStore::ScopeStore& TriStore::at(Scope scope) const {
  return const_cast<TriStore*>(this)->at(scope);
}

void TriStore::commit(Scope scope, ScopeStore& s, const EntityDocument& winner) {
  ChangeEntry entry;
  entry.seq = ++s.seq;
  entry.doc_id = winner.doc_id;
  entry.rev = *winner.revision;
  entry.deleted = winner.deleted;
  s.log.push_back(entry);
  s.docs[winner.doc_id].latest_seq = entry.seq;
  if (commit_hook_) commit_hook_(scope, entry);
}

PutResult TriStore::put(Scope scope, EntityDocument body,
                        const std::optional<Revision>& expected_parent) {
  if (body.doc_id != make_doc_id(body.graph, body.entity))
    throw ValidationError("doc_id does not match (graph, entity): " + body.doc_id);
  if (body.deleted && !body.properties.empty())
    throw ValidationError("tombstone with properties: " + body.doc_id);

  ScopeStore& s = at(scope);
  auto it = s.docs.find(body.doc_id);
  const EntityDocument* current =
      (it != s.docs.end() && !it->second.heads.empty()) ? &it->second.heads.back()
                                                        : nullptr;

  if (expected_parent) {
    if (!current || current->deleted) return {PutStatus::NotFound, {}};
    if (*current->revision != *expected_parent) return {PutStatus::Conflict, {}};
  } else {
    if (current && !current->deleted) return {PutStatus::AlreadyExists, {}};
  }

  // A create over a tombstone still descends from it, so the new revision
  // outranks the tombstone everywhere.
  std::optional<Revision> parent =
      current ? std::optional<Revision>(*current->revision) : std::nullopt;
  Revision rev;
  rev.generation = (parent ? parent->generation : 0) + 1;
  rev.digest = compute_digest(body, parent);
  body.revision = rev;

  auto& record = s.docs[body.doc_id];
  record.heads.clear();
  record.heads.push_back(std::move(body));
  commit(scope, s, record.heads.back());
  return {PutStatus::Ok, rev};
}

bool TriStore::force_put(Scope scope, const EntityDocument& doc) {
  if (scope != Scope::Cache)
    throw std::invalid_argument("force_put is a replication write; only the cache scope accepts it");
  if (!doc.revision) throw ValidationError("force_put requires a revision");
  if (doc.doc_id != make_doc_id(doc.graph, doc.entity))
    throw ValidationError("doc_id does not match (graph, entity): " + doc.doc_id);

  ScopeStore& s = at(scope);
  auto& record = s.docs[doc.doc_id];

  bool changed = false;
  if (record.heads.empty()) {
    record.heads.push_back(doc);
    changed = true;
  } else {
    std::uint64_t max_gen = record.heads.back().revision->generation;
    if (doc.revision->generation > max_gen) {
      record.heads.clear();
      record.heads.push_back(doc);
      changed = true;
    } else if (doc.revision->generation == max_gen) {
      auto pos = std::find_if(record.heads.begin(), record.heads.end(),
                              [&](const EntityDocument& h) {
                                return h.revision->digest == doc.revision->digest;
                              });
      if (pos == record.heads.end()) {
        auto insert_at = std::find_if(
            record.heads.begin(), record.heads.end(),
            [&](const EntityDocument& h) {
              return h.revision->digest > doc.revision->digest;
            });
        record.heads.insert(insert_at, doc);
        changed = true;
      }
    }
    // Lower generations are dominated by the existing heads: accepted, no-op.
  }

  if (changed) commit(scope, s, record.heads.back());
  return true;
}

PutResult TriStore::delete_doc(Scope scope, const std::string& doc_id,
                               const std::optional<Revision>& expected_parent) {
  ScopeStore& s = at(scope);
  auto it = s.docs.find(doc_id);
  if (it == s.docs.end() || it->second.heads.empty() ||
      it->second.heads.back().deleted)
    return {PutStatus::NotFound, {}};

  const EntityDocument& current = it->second.heads.back();
  if (expected_parent && *current.revision != *expected_parent)
    return {PutStatus::Conflict, {}};

  EntityDocument tombstone;
  tombstone.doc_id = current.doc_id;
  tombstone.entity = current.entity;
  tombstone.graph = current.graph;
  tombstone.deleted = true;
  Revision rev;
  rev.generation = current.revision->generation + 1;
  rev.digest = compute_digest(tombstone, current.revision);
  tombstone.revision = rev;

  it->second.heads.clear();
  it->second.heads.push_back(std::move(tombstone));
  commit(scope, s, it->second.heads.back());
  return {PutStatus::Ok, rev};
}

std::optional<EntityDocument> TriStore::get(Scope scope,
                                            const std::string& doc_id) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  auto it = s.docs.find(doc_id);
  if (it == s.docs.end() || it->second.heads.empty() ||
      it->second.heads.back().deleted)
    return std::nullopt;
  return it->second.heads.back();
}

std::optional<EntityDocument> TriStore::get_head(Scope scope,
                                                 const std::string& doc_id) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  auto it = s.docs.find(doc_id);
  if (it == s.docs.end() || it->second.heads.empty()) return std::nullopt;
  return it->second.heads.back();
}

ChangeBatch TriStore::changes_since(Scope scope, std::uint64_t since,
                                    std::size_t limit) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  ChangeBatch batch;
  batch.since = since;
  batch.last_seq = since;

  auto it = std::upper_bound(s.log.begin(), s.log.end(), since,
                             [](std::uint64_t v, const ChangeEntry& e) {
                               return v < e.seq;
                             });
  for (; it != s.log.end(); ++it) {
    const ChangeEntry& entry = *it;
    batch.last_seq = entry.seq;
    auto doc_it = s.docs.find(entry.doc_id);
    if (doc_it == s.docs.end()) continue;              // purged
    if (doc_it->second.latest_seq != entry.seq) continue;  // superseded
    batch.entries.push_back(entry);
    if (batch.entries.size() >= limit) break;
  }
  return batch;
}

std::vector<std::pair<std::string, Revision>> TriStore::revs_diff(
    Scope scope,
    std::span<const std::pair<std::string, Revision>> offered) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  std::vector<std::pair<std::string, Revision>> missing;
  for (const auto& [doc_id, rev] : offered) {
    auto it = s.docs.find(doc_id);
    bool present = false;
    if (it != s.docs.end()) {
      for (const auto& head : it->second.heads) {
        if (*head.revision == rev) {
          present = true;
          break;
        }
      }
    }
    if (!present) missing.emplace_back(doc_id, rev);
  }
  return missing;
}

void TriStore::purge(Scope scope, const std::string& doc_id) {
  at(scope).docs.erase(doc_id);
}

std::uint64_t TriStore::seq(Scope scope) const { return at(scope).seq; }

std::vector<EntityDocument> TriStore::live_docs(Scope scope) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  std::vector<EntityDocument> out;
  for (const auto& [id, record] : s.docs) {
    if (!record.heads.empty() && !record.heads.back().deleted)
      out.push_back(record.heads.back());
  }
  return out;
}

std::vector<EntityDocument> TriStore::all_heads(Scope scope) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  std::vector<EntityDocument> out;
  for (const auto& [id, record] : s.docs)
    if (!record.heads.empty()) out.push_back(record.heads.back());
  return out;
}

std::vector<EntityDocument> TriStore::heads_of(Scope scope,
                                               const std::string& doc_id) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  auto it = s.docs.find(doc_id);
  if (it == s.docs.end()) return {};
  return it->second.heads;
}

bool TriStore::contains(Scope scope, const std::string& doc_id) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  auto it = s.docs.find(doc_id);
  return it != s.docs.end() && !it->second.heads.empty();
}

std::set<std::string> TriStore::doc_ids(Scope scope) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  std::set<std::string> out;
  for (const auto& [id, record] : s.docs)
    if (!record.heads.empty()) out.insert(id);
  return out;
}

std::set<EntityName> TriStore::entities(Scope scope) const {
  const ScopeStore& s = at(scope);
  ++s.reads;
  std::set<EntityName> out;
  for (const auto& [id, record] : s.docs)
    if (!record.heads.empty()) out.insert(record.heads.back().entity);
  return out;
}

void TriStore::set_commit_hook(
    std::function<void(Scope, const ChangeEntry&)> hook) {
  commit_hook_ = std::move(hook);
}

std::uint64_t TriStore::reads(Scope scope) const { return at(scope).reads; }

nlohmann::json TriStore::snapshot() const {
  nlohmann::json j;
  j["owner"] = owner_.value;
  for (Scope scope : {Scope::Public, Scope::Private, Scope::Cache}) {
    const ScopeStore& s = at(scope);
    nlohmann::json sj;
    sj["seq"] = s.seq;
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& [id, record] : s.docs) {
      if (record.heads.empty()) continue;
      nlohmann::json dj;
      dj["doc_id"] = id;
      dj["latest_seq"] = record.latest_seq;
      nlohmann::json heads = nlohmann::json::array();
      for (const auto& head : record.heads) heads.push_back(canonical_json(head));
      dj["heads"] = heads;
      docs.push_back(dj);
    }
    sj["docs"] = docs;
    j[std::string(to_string(scope))] = sj;
  }
  return j;
}

TriStore TriStore::from_snapshot(const nlohmann::json& j) {
  TriStore store{GraphId(j.at("owner").get<std::string>())};
  for (Scope scope : {Scope::Public, Scope::Private, Scope::Cache}) {
    ScopeStore& s = store.at(scope);
    const auto& sj = j.at(std::string(to_string(scope)));
    s.seq = sj.at("seq").get<std::uint64_t>();
    for (const auto& dj : sj.at("docs")) {
      DocRecord record;
      record.latest_seq = dj.at("latest_seq").get<std::uint64_t>();
      for (const auto& hj : dj.at("heads"))
        record.heads.push_back(document_from_json(hj));
      std::string doc_id = dj.at("doc_id").get<std::string>();
      ChangeEntry entry;
      entry.seq = record.latest_seq;
      entry.doc_id = doc_id;
      entry.rev = *record.heads.back().revision;
      entry.deleted = record.heads.back().deleted;
      s.docs[doc_id] = std::move(record);
      s.log.push_back(entry);
    }
    std::sort(s.log.begin(), s.log.end(),
              [](const ChangeEntry& a, const ChangeEntry& b) { return a.seq < b.seq; });
  }
  return store;
}

}  // namespace ers
