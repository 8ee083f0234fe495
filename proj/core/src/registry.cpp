#include "ers/registry.hpp"

#include <algorithm>

namespace ers {

void Query::validate() const {
  if (kind == Kind::ByPropertyValue && predicate.empty())
    throw ValidationError("property-value query requires a predicate");
  if (kind == Kind::ByName && entity_pattern.empty())
    throw ValidationError("name query requires a name");
  if (scope_mask.empty()) throw ValidationError("empty scope mask");
}

nlohmann::json Query::to_json() const {
  nlohmann::json j;
  j["kind"] = kind == Kind::ByName ? "by_name" : "by_property_value";
  j["pattern"] = entity_pattern;
  j["predicate"] = predicate;
  j["value"] = value;
  nlohmann::json scopes = nlohmann::json::array();
  for (Scope s : scope_mask) scopes.push_back(std::string(to_string(s)));
  j["scopes"] = scopes;
  return j;
}

Query Query::from_json(const nlohmann::json& j) {
  Query q;
  q.kind = j.at("kind").get<std::string>() == "by_name"
               ? Kind::ByName
               : Kind::ByPropertyValue;
  q.entity_pattern = j.at("pattern").get<std::string>();
  q.predicate = j.at("predicate").get<std::string>();
  q.value = j.at("value").get<std::string>();
  q.scope_mask.clear();
  for (const auto& s : j.at("scopes"))
    q.scope_mask.insert(scope_from_string(s.get<std::string>()));
  return q;
}

Registry::Registry(net::Simulation& sim, net::NodeId self, TriStore& store,
                   net::SimTime remote_search_timeout_ms)
    : sim_(sim),
      self_(std::move(self)),
      store_(store),
      search_timeout_(remote_search_timeout_ms),
      alive_(std::make_shared<bool>(true)) {}

Registry::~Registry() { *alive_ = false; }

void Registry::set_hooks(Hooks hooks) { hooks_ = std::move(hooks); }

namespace {

void require_writable(Scope scope) {
  if (scope == Scope::Cache)
    throw std::invalid_argument(
        "the cache scope is written by replication, not by the API");
}

}  // namespace

RegistryStatus Registry::create_entity(const EntityName& name, Scope scope) {
  require_writable(scope);
  std::string doc_id = make_doc_id(store_.owner(), name);
  if (store_.get(scope, doc_id)) return RegistryStatus::AlreadyExists;

  EntityDocument doc;
  doc.doc_id = doc_id;
  doc.entity = name;
  doc.graph = store_.owner();
  auto result = store_.put(scope, std::move(doc), std::nullopt);
  return result.ok() ? RegistryStatus::Ok : RegistryStatus::Conflict;
}

RegistryStatus Registry::add_statement(const Statement& stmt, Scope scope) {
  require_writable(scope);
  std::string doc_id = make_doc_id(store_.owner(), stmt.entity);
  for (int i = 0; i < kPutRetries; ++i) {
    auto current = store_.get(scope, doc_id);
    EntityDocument base;
    if (current) {
      base = *current;
    } else {
      base.doc_id = doc_id;
      base.entity = stmt.entity;
      base.graph = store_.owner();
    }
    EntityDocument updated = apply_statement(base, stmt, ApplyMode::Add);
    auto result = store_.put(
        scope, std::move(updated),
        current ? std::optional<Revision>(*current->revision) : std::nullopt);
    if (result.ok()) return RegistryStatus::Ok;
  }
  return RegistryStatus::Conflict;
}

RegistryStatus Registry::remove_statement(const Statement& stmt, Scope scope) {
  require_writable(scope);
  std::string doc_id = make_doc_id(store_.owner(), stmt.entity);
  for (int i = 0; i < kPutRetries; ++i) {
    auto current = store_.get(scope, doc_id);
    if (!current || !current->has_pair(stmt.predicate, stmt.value))
      return RegistryStatus::NotFound;
    EntityDocument updated = apply_statement(*current, stmt, ApplyMode::Remove);
    auto result =
        store_.put(scope, std::move(updated), *current->revision);
    if (result.ok()) return RegistryStatus::Ok;
  }
  return RegistryStatus::Conflict;
}

RegistryStatus Registry::delete_entity(const EntityName& name, Scope scope) {
  require_writable(scope);
  std::string doc_id = make_doc_id(store_.owner(), name);
  auto result = store_.delete_doc(scope, doc_id, std::nullopt);
  switch (result.status) {
    case PutStatus::Ok: return RegistryStatus::Ok;
    case PutStatus::NotFound: return RegistryStatus::NotFound;
    default: return RegistryStatus::Conflict;
  }
}

EntityView Registry::get_entity(const EntityName& name) const {
  EntityView view;
  view.entity = name;
  for (Scope scope : {Scope::Public, Scope::Private, Scope::Cache}) {
    for (const auto& doc : store_.live_docs(scope)) {
      if (doc.entity != name) continue;
      for (const auto& [predicate, values] : doc.properties)
        for (const auto& value : values)
          view.statements.insert(
              {Statement(name, predicate, value), scope, doc.graph});
    }
  }
  return view;
}

SearchResult Registry::search_local(const Query& q) const {
  q.validate();
  SearchResult result;
  std::set<EntityName> names;
  for (Scope scope : q.scope_mask) {
    for (const auto& doc : store_.live_docs(scope)) {
      if (q.kind == Query::Kind::ByName) {
        if (doc.entity.value == q.entity_pattern) names.insert(doc.entity);
      } else {
        if (doc.has_pair(q.predicate, q.value)) names.insert(doc.entity);
      }
    }
  }
  result.names.assign(names.begin(), names.end());
  return result;
}

void Registry::search(const Query& q, std::function<void(SearchResult)> done) {
  SearchResult local = search_local(q);
  if (!q.remote) {
    done(std::move(local));
    return;
  }

  std::set<net::NodeId> peers =
      hooks_.link_peers ? hooks_.link_peers() : std::set<net::NodeId>{};
  if (peers.empty()) {
    done(std::move(local));
    return;
  }

  std::uint64_t id = next_search_id_++;
  PendingSearch pending;
  pending.awaiting = peers;
  pending.names.insert(local.names.begin(), local.names.end());
  pending.done = std::move(done);
  searches_[id] = std::move(pending);

  Query remote_q = q;
  remote_q.remote = false;
  // Peers only ever serve their public and cache stores.
  remote_q.scope_mask.erase(Scope::Private);
  if (remote_q.scope_mask.empty())
    remote_q.scope_mask = {Scope::Public, Scope::Cache};

  for (const auto& peer : peers) {
    wire::Message msg;
    msg.kind = wire::Kind::SearchRequest;
    msg.req_id = id;
    msg.body = remote_q.to_json();
    sim_.send(self_, peer, std::move(msg));
  }

  sim_.schedule_after(search_timeout_, [this, alive = alive_, id]() {
    if (!*alive) return;
    finish_search(id, true);
  });
}

void Registry::finish_search(std::uint64_t id, bool timed_out) {
  auto it = searches_.find(id);
  if (it == searches_.end()) return;
  if (!timed_out && !it->second.awaiting.empty()) return;

  SearchResult result;
  result.partial = !it->second.awaiting.empty();
  result.names.assign(it->second.names.begin(), it->second.names.end());
  auto done = std::move(it->second.done);
  searches_.erase(it);
  done(std::move(result));
}

void Registry::cache_entity(const EntityName& name) {
  if (!interest_.insert(name).second) return;
  if (hooks_.interest_added) hooks_.interest_added(name);
}

void Registry::uncache_entity(const EntityName& name) {
  interest_.erase(name);
  for (const auto& doc_id : store_.doc_ids(Scope::Cache)) {
    if (split_doc_id(doc_id).second == name) store_.purge(Scope::Cache, doc_id);
  }
}

void Registry::set_interest(std::set<EntityName> interest) {
  interest_ = std::move(interest);
}

void Registry::handle_message(const wire::Message& msg) {
  if (!msg.digest_ok()) return;

  if (msg.kind == wire::Kind::SearchRequest) {
    Query q = Query::from_json(msg.body);
    q.scope_mask.erase(Scope::Private);  // never served to peers
    if (q.scope_mask.empty()) q.scope_mask = {Scope::Public, Scope::Cache};
    SearchResult local = search_local(q);
    wire::Message resp;
    resp.kind = wire::Kind::SearchResponse;
    resp.req_id = msg.req_id;
    nlohmann::json names = nlohmann::json::array();
    for (const auto& n : local.names) names.push_back(n.value);
    resp.body["names"] = names;
    sim_.send(self_, msg.src, std::move(resp));
    return;
  }

  if (msg.kind == wire::Kind::SearchResponse) {
    auto it = searches_.find(msg.req_id);
    if (it == searches_.end()) return;
    if (!it->second.awaiting.erase(msg.src)) return;  // duplicate response
    for (const auto& n : msg.body.at("names"))
      it->second.names.insert(EntityName(n.get<std::string>()));
    if (it->second.awaiting.empty()) finish_search(msg.req_id, false);
  }
}

}  // namespace ers
