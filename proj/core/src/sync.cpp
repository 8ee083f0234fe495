#include "ers/sync.hpp"

#include <algorithm>
#include <stdexcept>

namespace ers::sync {

namespace {

nlohmann::json entry_to_json(const ChangeEntry& e) {
  nlohmann::json j;
  j["seq"] = e.seq;
  j["doc"] = e.doc_id;
  j["rev"] = e.rev.to_string();
  j["deleted"] = e.deleted;
  return j;
}

ChangeEntry entry_from_json(const nlohmann::json& j) {
  ChangeEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.doc_id = j.at("doc").get<std::string>();
  e.rev = Revision::parse(j.at("rev").get<std::string>());
  e.deleted = j.at("deleted").get<bool>();
  return e;
}

nlohmann::json entries_to_json(const std::vector<ChangeEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back(entry_to_json(e));
  return arr;
}

std::vector<ChangeEntry> entries_from_json(const nlohmann::json& arr) {
  std::vector<ChangeEntry> out;
  for (const auto& j : arr) out.push_back(entry_from_json(j));
  return out;
}

nlohmann::json revs_to_json(
    const std::vector<std::pair<std::string, Revision>>& revs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [doc, rev] : revs) {
    nlohmann::json j;
    j["doc"] = doc;
    j["rev"] = rev.to_string();
    arr.push_back(j);
  }
  return arr;
}

std::vector<std::pair<std::string, Revision>> revs_from_json(
    const nlohmann::json& arr) {
  std::vector<std::pair<std::string, Revision>> out;
  for (const auto& j : arr)
    out.emplace_back(j.at("doc").get<std::string>(),
                     Revision::parse(j.at("rev").get<std::string>()));
  return out;
}

}  // namespace

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::CC: return "cc";
    case LinkKind::CBUp: return "cbup";
    case LinkKind::CBDown: return "cbdown";
    case LinkKind::BB: return "bb";
  }
  return "?";
}

std::string LinkId::str() const {
  return std::string(to_string(kind)) + ":" + a + "~" + b;
}

LinkId LinkId::parse(const std::string& text) {
  auto colon = text.find(':');
  auto tilde = text.find('~');
  if (colon == std::string::npos || tilde == std::string::npos || tilde < colon)
    throw std::invalid_argument("malformed link id: " + text);
  LinkId id;
  std::string kind = text.substr(0, colon);
  if (kind == "cc") id.kind = LinkKind::CC;
  else if (kind == "cbup") id.kind = LinkKind::CBUp;
  else if (kind == "cbdown") id.kind = LinkKind::CBDown;
  else if (kind == "bb") id.kind = LinkKind::BB;
  else throw std::invalid_argument("malformed link id: " + text);
  id.a = text.substr(colon + 1, tilde - colon - 1);
  id.b = text.substr(tilde + 1);
  return id;
}

LinkId LinkId::cc(const NodeId& x, const NodeId& y) {
  return {LinkKind::CC, std::min(x, y), std::max(x, y)};
}
LinkId LinkId::bb(const NodeId& x, const NodeId& y) {
  return {LinkKind::BB, std::min(x, y), std::max(x, y)};
}
LinkId LinkId::cb_up(const NodeId& contributor, const NodeId& bridge) {
  return {LinkKind::CBUp, contributor, bridge};
}
LinkId LinkId::cb_down(const NodeId& contributor, const NodeId& bridge) {
  return {LinkKind::CBDown, contributor, bridge};
}

const NodeId& LinkId::owner() const { return a; }

const NodeId& LinkId::peer_of(const NodeId& self) const {
  return self == a ? b : a;
}

std::vector<Flow> flows_for(const LinkId& link) {
  std::vector<Flow> flows;
  switch (link.kind) {
    case LinkKind::CC:
      flows.push_back({0, link.b, Scope::Public, link.a, Scope::Cache,
                       FilterKind::DocsInTargetCache});
      flows.push_back({1, link.b, Scope::Cache, link.a, Scope::Cache,
                       FilterKind::DocsInTargetCache});
      flows.push_back({2, link.a, Scope::Public, link.b, Scope::Cache,
                       FilterKind::DocsInTargetCache});
      flows.push_back({3, link.a, Scope::Cache, link.b, Scope::Cache,
                       FilterKind::DocsInTargetCache});
      break;
    case LinkKind::CBUp:
      flows.push_back(
          {0, link.a, Scope::Public, link.b, Scope::Cache, FilterKind::None});
      break;
    case LinkKind::CBDown:
      flows.push_back({0, link.b, Scope::Cache, link.a, Scope::Cache,
                       FilterKind::EntitiesInTargetInterest});
      break;
    case LinkKind::BB:
      flows.push_back({0, link.b, Scope::Cache, link.a, Scope::Cache,
                       FilterKind::EntitiesInTargetCache});
      flows.push_back({1, link.a, Scope::Cache, link.b, Scope::Cache,
                       FilterKind::EntitiesInTargetCache});
      break;
  }
  return flows;
}

std::set<LinkId> plan_links(const NodeId& self, Role self_role,
                            const std::map<NodeId, Role>& peers) {
  std::set<LinkId> links;
  if (self_role == Role::Contributor) {
    bool bridge_visible = false;
    for (const auto& [peer, role] : peers)
      if (role == Role::Bridge) bridge_visible = true;
    if (bridge_visible) {
      for (const auto& [peer, role] : peers) {
        if (role != Role::Bridge) continue;
        links.insert(LinkId::cb_up(self, peer));
        links.insert(LinkId::cb_down(self, peer));
      }
    } else {
      for (const auto& [peer, role] : peers)
        if (role == Role::Contributor) links.insert(LinkId::cc(self, peer));
    }
  } else {
    for (const auto& [peer, role] : peers) {
      if (role == Role::Contributor) {
        links.insert(LinkId::cb_up(peer, self));
        links.insert(LinkId::cb_down(peer, self));
      } else {
        links.insert(LinkId::bb(self, peer));
      }
    }
  }
  return links;
}

std::vector<ChangeEntry> apply_filter(FilterKind kind,
                                      const std::vector<ChangeEntry>& entries,
                                      const TargetView& view) {
  if (kind == FilterKind::None) return entries;
  std::vector<ChangeEntry> out;
  for (const auto& e : entries) {
    switch (kind) {
      case FilterKind::DocsInTargetCache:
        if (view.cache_doc_ids.count(e.doc_id)) out.push_back(e);
        break;
      case FilterKind::EntitiesInTargetInterest:
        if (view.interest.count(split_doc_id(e.doc_id).second)) out.push_back(e);
        break;
      case FilterKind::EntitiesInTargetCache:
        if (view.cache_entities.count(split_doc_id(e.doc_id).second))
          out.push_back(e);
        break;
      case FilterKind::None:
        break;
    }
  }
  return out;
}

void SyncConfig::validate() const {
  if (batch_size <= 0 || worker_count <= 0 || handshake_rounds <= 0 ||
      retry_timeout_ms <= 0 || response_timeout_ms <= 0 ||
      idle_poll_interval_ms <= 0)
    throw std::invalid_argument("sync config values must be positive");
}

std::string flow_key(const LinkId& link, int flow_index) {
  return link.str() + "#" + std::to_string(flow_index);
}

SyncEngine::SyncEngine(net::Simulation& sim, NodeId self, Role role,
                       TriStore& store, SyncConfig config, Hooks hooks)
    : sim_(sim),
      self_(std::move(self)),
      role_(role),
      store_(store),
      config_(config),
      hooks_(std::move(hooks)),
      alive_(std::make_shared<bool>(true)) {
  config_.validate();
}

SyncEngine::~SyncEngine() { *alive_ = false; }

void SyncEngine::schedule(SimTime delay, std::function<void()> fn) {
  sim_.schedule_after(delay, [alive = alive_, fn = std::move(fn)]() {
    if (*alive) fn();
  });
}

void SyncEngine::on_peer(const NodeId& peer, Role role, bool appeared) {
  if (appeared)
    peers_[peer] = role;
  else
    peers_.erase(peer);
  recompute_links();
}

void SyncEngine::recompute_links() {
  std::set<LinkId> desired = plan_links(self_, role_, peers_);

  std::vector<LinkId> removed;
  for (const auto& link : planned_)
    if (!desired.count(link)) removed.push_back(link);
  for (const auto& link : removed) teardown_link(link);

  std::vector<LinkId> added;
  for (const auto& link : desired)
    if (!planned_.count(link)) added.push_back(link);

  planned_ = desired;

  for (const auto& link : added) {
    if (link.owner() == self_) adopt_link(link);
    if (link.kind == LinkKind::CC) {
      // Bootstrap: the document filter can never deliver a first copy, so
      // interest entities with no cached document are fetched directly.
      std::vector<EntityName> wanted;
      auto cached = store_.entities(Scope::Cache);
      for (const auto& e : hooks_.interest())
        if (!cached.count(e)) wanted.push_back(e);
      if (!wanted.empty()) send_bootstrap_fetch(link, wanted);
    }
  }
  schedule_work();
}

void SyncEngine::adopt_link(const LinkId& link) {
  OwnedLink owned;
  owned.id = link;
  for (const Flow& flow : flows_for(link)) {
    FlowState fs;
    fs.flow = flow;
    auto it = retained_checkpoints_.find(flow_key(link, flow.index));
    fs.checkpoint = it != retained_checkpoints_.end() ? it->second : 0;
    fs.dirty = true;
    owned.flows.push_back(std::move(fs));
  }
  owned_[link] = std::move(owned);
  for (const Flow& flow : flows_for(link))
    enqueue_runnable(flow_key(link, flow.index));
}

void SyncEngine::teardown_link(const LinkId& link) {
  auto it = owned_.find(link);
  if (it != owned_.end()) {
    for (const FlowState& fs : it->second.flows) {
      retained_checkpoints_[flow_key(link, fs.flow.index)] = fs.checkpoint;
      if (fs.round.running) --active_rounds_;
    }
    owned_.erase(it);
  }
  // Drop in-flight request tracking; late responses and timeout guards
  // resolve to nothing.
  for (auto pit = pending_.begin(); pit != pending_.end();) {
    if (pit->second.link == link)
      pit = pending_.erase(pit);
    else
      ++pit;
  }
  // Passive-side subscriptions for this link.
  std::string prefix = link.str() + "#";
  for (auto sit = subscriptions_.begin(); sit != subscriptions_.end();) {
    if (sit->first.rfind(prefix, 0) == 0)
      sit = subscriptions_.erase(sit);
    else
      ++sit;
  }
}

void SyncEngine::send_bootstrap_fetch(const LinkId& link,
                                      const std::vector<EntityName>& entities) {
  wire::Message msg;
  msg.kind = wire::Kind::EntityFetchRequest;
  msg.link = link.str();
  msg.flow = -1;
  nlohmann::json names = nlohmann::json::array();
  for (const auto& e : entities) names.push_back(e.value);
  msg.body["entities"] = names;
  sim_.send(self_, link.peer_of(self_), std::move(msg));
}

SyncEngine::FlowState* SyncEngine::find_flow(const std::string& key) {
  auto hash = key.rfind('#');
  if (hash == std::string::npos) return nullptr;
  LinkId link = LinkId::parse(key.substr(0, hash));
  int index = std::stoi(key.substr(hash + 1));
  auto it = owned_.find(link);
  if (it == owned_.end()) return nullptr;
  if (index < 0 || index >= static_cast<int>(it->second.flows.size()))
    return nullptr;
  return &it->second.flows[index];
}

const SyncEngine::FlowState* SyncEngine::find_flow(
    const std::string& key) const {
  return const_cast<SyncEngine*>(this)->find_flow(key);
}

void SyncEngine::enqueue_runnable(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs || fs->queued || fs->round.running) return;
  fs->queued = true;
  runnable_.push_back(key);
}

void SyncEngine::schedule_work() {
  while (active_rounds_ < config_.worker_count && !runnable_.empty()) {
    std::string key = runnable_.front();
    runnable_.pop_front();
    FlowState* fs = find_flow(key);
    if (!fs) continue;
    fs->queued = false;
    if (fs->round.running) continue;
    start_round(key);
  }
}

void SyncEngine::start_round(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs || fs->round.running) return;
  if (fs->reset_requested) {
    fs->checkpoint = 0;
    fs->reset_requested = false;
  }
  std::uint64_t attempt = fs->round.attempt + 1;
  fs->round = RoundState{};
  fs->round.attempt = attempt;
  fs->round.running = true;
  fs->round.started_at = sim_.now();
  fs->dirty = false;
  ++active_rounds_;
  round_step_changes(key);
}

void SyncEngine::round_step_changes(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  const Flow& flow = fs->flow;
  bool push = flow.source_node == self_;

  if (push) {
    fs->round.batch = store_.changes_since(flow.source_scope, fs->checkpoint,
                                           config_.batch_size);
    if (fs->round.batch.entries.empty() &&
        fs->round.batch.last_seq == fs->checkpoint) {
      finish_round(key, false, 0);
      return;
    }
    nlohmann::json body;
    body["mode"] = "offer";
    body["entries"] = entries_to_json(fs->round.batch.entries);
    body["last_seq"] = fs->round.batch.last_seq;
    send_request(key, wire::Kind::ChangesRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   fs->round.filtered = entries_from_json(resp.at("entries"));
                   round_have_batch(key);
                 });
  } else {
    nlohmann::json body;
    body["mode"] = "poll";
    body["since"] = fs->checkpoint;
    body["batch"] = config_.batch_size;
    send_request(key, wire::Kind::ChangesRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   fs->round.batch.since = fs->checkpoint;
                   fs->round.batch.entries = entries_from_json(resp.at("entries"));
                   fs->round.batch.last_seq = resp.at("last_seq").get<std::uint64_t>();
                   fs->round.filtered = apply_filter(
                       fs->flow.filter, fs->round.batch.entries, own_target_view());
                   round_have_batch(key);
                 });
  }
}

void SyncEngine::round_have_batch(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  if (fs->round.batch.entries.empty() &&
      fs->round.batch.last_seq == fs->checkpoint) {
    finish_round(key, false, 0);
    return;
  }
  if (fs->round.filtered.empty()) {
    // Window examined, nothing relevant; safe to move past it.
    bool progress = fs->round.batch.last_seq != fs->checkpoint;
    fs->checkpoint = fs->round.batch.last_seq;
    finish_round(key, progress, 0);
    return;
  }
  round_step_diff(key);
}

void SyncEngine::round_step_diff(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  bool push = fs->flow.source_node == self_;

  std::vector<std::pair<std::string, Revision>> revs;
  for (const auto& e : fs->round.filtered) revs.emplace_back(e.doc_id, e.rev);

  if (push) {
    nlohmann::json body;
    body["mode"] = "missing";
    body["revs"] = revs_to_json(revs);
    send_request(key, wire::Kind::DiffRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   fs->round.wanted = revs_from_json(resp.at("revs"));
                   if (fs->round.wanted.empty()) {
                     bool progress = fs->round.batch.last_seq != fs->checkpoint;
                     fs->checkpoint = fs->round.batch.last_seq;
                     finish_round(key, progress, 0);
                     return;
                   }
                   round_step_bulk(key);
                 });
  } else {
    auto wanted = store_.revs_diff(fs->flow.target_scope, revs);
    if (wanted.empty()) {
      bool progress = fs->round.batch.last_seq != fs->checkpoint;
      fs->checkpoint = fs->round.batch.last_seq;
      finish_round(key, progress, 0);
      return;
    }
    nlohmann::json body;
    body["mode"] = "want";
    body["revs"] = revs_to_json(wanted);
    send_request(key, wire::Kind::DiffRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   fs->round.wanted = revs_from_json(resp.at("revs"));
                   if (fs->round.wanted.empty()) {
                     // The source advanced past the offered revisions; the
                     // newer entries arrive through the feed.
                     bool progress = fs->round.batch.last_seq != fs->checkpoint;
                     fs->checkpoint = fs->round.batch.last_seq;
                     finish_round(key, progress, 0);
                     return;
                   }
                   round_step_bulk(key);
                 });
  }
}

void SyncEngine::round_step_bulk(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  bool push = fs->flow.source_node == self_;

  if (push) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& [doc_id, rev] : fs->round.wanted) {
      auto head = store_.get_head(fs->flow.source_scope, doc_id);
      if (head && head->revision && *head->revision == rev)
        docs.push_back(canonical_json(*head));
    }
    if (docs.empty()) {
      bool progress = fs->round.batch.last_seq != fs->checkpoint;
      fs->checkpoint = fs->round.batch.last_seq;
      finish_round(key, progress, 0);
      return;
    }
    nlohmann::json body;
    body["mode"] = "push";
    body["docs"] = std::move(docs);
    send_request(key, wire::Kind::BulkRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   std::uint64_t applied = resp.at("applied").get<std::uint64_t>();
                   fs->checkpoint = fs->round.batch.last_seq;
                   round_finish_transfer(key, applied);
                 });
  } else {
    nlohmann::json body;
    body["mode"] = "fetch";
    body["revs"] = revs_to_json(fs->round.wanted);
    send_request(key, wire::Kind::BulkRequest, std::move(body),
                 [this, key](const nlohmann::json& resp) {
                   FlowState* fs = find_flow(key);
                   if (!fs) return;
                   std::uint64_t applied = 0;
                   for (const auto& dj : resp.at("docs")) {
                     EntityDocument doc = document_from_json(dj);
                     store_.force_put(fs->flow.target_scope, doc);
                     ++applied;
                   }
                   fs->checkpoint = fs->round.batch.last_seq;
                   round_finish_transfer(key, applied);
                 });
  }
}

void SyncEngine::round_finish_transfer(const std::string& key,
                                       std::uint64_t docs) {
  // A transfer round costs handshake_rounds exchanges; beyond the three
  // semantic ones the remainder are checkpoint confirmations.
  int extra = config_.handshake_rounds - 3;
  if (extra > 0)
    round_step_commit(key, docs, extra);
  else
    finish_round(key, true, docs);
}

void SyncEngine::round_step_commit(const std::string& key, std::uint64_t docs,
                                   int remaining) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  if (remaining <= 0) {
    finish_round(key, true, docs);
    return;
  }
  nlohmann::json body;
  body["checkpoint"] = fs->checkpoint;
  send_request(key, wire::Kind::CommitRequest, std::move(body),
               [this, key, docs, remaining](const nlohmann::json&) {
                 round_step_commit(key, docs, remaining - 1);
               });
}

void SyncEngine::finish_round(const std::string& key, bool progress,
                              std::uint64_t docs) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  fs->round.running = false;
  --active_rounds_;
  ++fs->stats.rounds_completed;
  if (docs > 0) {
    ++fs->stats.transfer_rounds;
    fs->stats.docs_transferred += docs;
    total_docs_ += docs;
  }
  if (fs->reset_requested) {
    fs->checkpoint = 0;
    fs->reset_requested = false;
    fs->dirty = true;
  }
  if (progress || fs->dirty)
    enqueue_runnable(key);
  else
    flow_idle(key);
  schedule_work();
}

void SyncEngine::fail_round(const std::string& key, std::uint64_t attempt) {
  FlowState* fs = find_flow(key);
  if (!fs || !fs->round.running || fs->round.attempt != attempt) return;
  fs->round.running = false;
  --active_rounds_;
  ++fs->stats.timeouts;
  SimTime retry_at =
      std::max(sim_.now(), fs->round.started_at + config_.retry_timeout_ms);
  schedule(retry_at - sim_.now(), [this, key, attempt]() {
    FlowState* fs = find_flow(key);
    if (!fs || fs->round.running || fs->round.attempt != attempt) return;
    enqueue_runnable(key);
    schedule_work();
  });
  schedule_work();
}

void SyncEngine::flow_idle(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  if (fs->flow.source_node == self_) return;  // local commits wake push flows
  ensure_subscribed(key);
  std::uint64_t epoch = ++fs->poll_epoch;
  schedule(config_.idle_poll_interval_ms, [this, key, epoch]() {
    FlowState* fs = find_flow(key);
    if (!fs || fs->round.running || fs->queued || fs->poll_epoch != epoch)
      return;
    enqueue_runnable(key);
    schedule_work();
  });
}

void SyncEngine::ensure_subscribed(const std::string& key) {
  FlowState* fs = find_flow(key);
  if (!fs || fs->subscribed) return;
  fs->subscribed = true;
  auto hash = key.rfind('#');
  LinkId link = LinkId::parse(key.substr(0, hash));
  wire::Message msg;
  msg.kind = wire::Kind::SubscribeRequest;
  msg.link = link.str();
  msg.flow = fs->flow.index;
  msg.body["flow"] = key;
  sim_.send(self_, link.peer_of(self_), std::move(msg));
}

void SyncEngine::send_request(
    const std::string& key, wire::Kind kind, nlohmann::json body,
    std::function<void(const nlohmann::json&)> on_response) {
  FlowState* fs = find_flow(key);
  if (!fs) return;
  auto hash = key.rfind('#');
  LinkId link = LinkId::parse(key.substr(0, hash));

  std::uint64_t req_id = next_req_id_++;
  Pending pending;
  pending.flow_key = key;
  pending.link = link;
  pending.flow_index = fs->flow.index;
  pending.attempt = fs->round.attempt;
  pending.on_response = std::move(on_response);
  pending_[req_id] = std::move(pending);

  wire::Message msg;
  msg.kind = kind;
  msg.req_id = req_id;
  msg.link = link.str();
  msg.flow = fs->flow.index;
  msg.attempt = fs->round.attempt;
  msg.body = std::move(body);
  sim_.send(self_, link.peer_of(self_), std::move(msg));

  schedule(config_.response_timeout_ms, [this, req_id]() {
    auto it = pending_.find(req_id);
    if (it == pending_.end()) return;
    std::string key = it->second.flow_key;
    std::uint64_t attempt = it->second.attempt;
    pending_.erase(it);
    fail_round(key, attempt);
  });
}

void SyncEngine::respond(const wire::Message& req, wire::Kind kind,
                         nlohmann::json body) {
  wire::Message msg;
  msg.kind = kind;
  msg.req_id = req.req_id;
  msg.link = req.link;
  msg.flow = req.flow;
  msg.attempt = req.attempt;
  msg.body = std::move(body);
  sim_.send(self_, req.src, std::move(msg));
}

TargetView SyncEngine::own_target_view() const {
  TargetView view;
  view.cache_doc_ids = store_.doc_ids(Scope::Cache);
  view.interest = hooks_.interest();
  view.cache_entities = store_.entities(Scope::Cache);
  return view;
}

void SyncEngine::handle_message(const wire::Message& msg) {
  if (!msg.digest_ok()) return;  // corrupted in transit; same as lost

  switch (msg.kind) {
    case wire::Kind::ChangesRequest: handle_changes_request(msg); return;
    case wire::Kind::DiffRequest: handle_diff_request(msg); return;
    case wire::Kind::BulkRequest: handle_bulk_request(msg); return;
    case wire::Kind::SubscribeRequest: handle_subscribe(msg); return;
    case wire::Kind::ChangeNotify: handle_notify(msg); return;
    case wire::Kind::EntityFetchRequest: handle_entity_fetch(msg); return;
    case wire::Kind::EntityFetchResponse: handle_entity_fetch_response(msg); return;
    case wire::Kind::CommitRequest:
      respond(msg, wire::Kind::CommitResponse, nlohmann::json::object());
      return;
    case wire::Kind::SubscribeResponse: return;
    case wire::Kind::ChangesResponse:
    case wire::Kind::DiffResponse:
    case wire::Kind::BulkResponse:
    case wire::Kind::CommitResponse: {
      auto it = pending_.find(msg.req_id);
      if (it == pending_.end()) return;  // stale, duplicate or timed out
      Pending pending = std::move(it->second);
      pending_.erase(it);
      FlowState* fs = find_flow(pending.flow_key);
      if (!fs || !fs->round.running || fs->round.attempt != pending.attempt)
        return;
      pending.on_response(msg.body);
      return;
    }
    default:
      return;  // search traffic is routed to the registry by the node
  }
}

void SyncEngine::handle_changes_request(const wire::Message& msg) {
  LinkId link = LinkId::parse(msg.link);
  auto flows = flows_for(link);
  if (msg.flow < 0 || msg.flow >= static_cast<int>(flows.size())) return;
  const Flow& flow = flows[msg.flow];
  std::string mode = msg.body.at("mode").get<std::string>();

  if (mode == "poll") {
    if (flow.source_node != self_) return;
    auto batch = store_.changes_since(flow.source_scope,
                                      msg.body.at("since").get<std::uint64_t>(),
                                      msg.body.at("batch").get<std::size_t>());
    auto sit = subscriptions_.find(flow_key(link, flow.index));
    if (sit != subscriptions_.end()) sit->second.armed = true;
    nlohmann::json body;
    body["entries"] = entries_to_json(batch.entries);
    body["last_seq"] = batch.last_seq;
    respond(msg, wire::Kind::ChangesResponse, std::move(body));
  } else if (mode == "offer") {
    if (flow.target_node != self_) return;
    auto entries = entries_from_json(msg.body.at("entries"));
    auto filtered = apply_filter(flow.filter, entries, own_target_view());
    nlohmann::json body;
    body["entries"] = entries_to_json(filtered);
    respond(msg, wire::Kind::ChangesResponse, std::move(body));
  }
}

void SyncEngine::handle_diff_request(const wire::Message& msg) {
  LinkId link = LinkId::parse(msg.link);
  auto flows = flows_for(link);
  if (msg.flow < 0 || msg.flow >= static_cast<int>(flows.size())) return;
  const Flow& flow = flows[msg.flow];
  std::string mode = msg.body.at("mode").get<std::string>();
  auto revs = revs_from_json(msg.body.at("revs"));

  nlohmann::json body;
  if (mode == "missing") {
    if (flow.target_node != self_) return;
    body["revs"] = revs_to_json(store_.revs_diff(flow.target_scope, revs));
  } else if (mode == "want") {
    if (flow.source_node != self_) return;
    std::vector<std::pair<std::string, Revision>> available;
    for (const auto& [doc_id, rev] : revs) {
      auto head = store_.get_head(flow.source_scope, doc_id);
      if (head && head->revision && *head->revision == rev)
        available.emplace_back(doc_id, rev);
    }
    body["revs"] = revs_to_json(available);
  } else {
    return;
  }
  respond(msg, wire::Kind::DiffResponse, std::move(body));
}

void SyncEngine::handle_bulk_request(const wire::Message& msg) {
  LinkId link = LinkId::parse(msg.link);
  auto flows = flows_for(link);
  if (msg.flow < 0 || msg.flow >= static_cast<int>(flows.size())) return;
  const Flow& flow = flows[msg.flow];
  std::string mode = msg.body.at("mode").get<std::string>();

  nlohmann::json body;
  if (mode == "push") {
    if (flow.target_node != self_) return;
    std::uint64_t applied = 0;
    for (const auto& dj : msg.body.at("docs")) {
      EntityDocument doc = document_from_json(dj);
      store_.force_put(flow.target_scope, doc);
      ++applied;
    }
    body["applied"] = applied;
  } else if (mode == "fetch") {
    if (flow.source_node != self_) return;
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& [doc_id, rev] : revs_from_json(msg.body.at("revs"))) {
      auto head = store_.get_head(flow.source_scope, doc_id);
      if (head && head->revision && *head->revision == rev)
        docs.push_back(canonical_json(*head));
    }
    body["docs"] = std::move(docs);
  } else {
    return;
  }
  respond(msg, wire::Kind::BulkResponse, std::move(body));
}

void SyncEngine::handle_subscribe(const wire::Message& msg) {
  LinkId link = LinkId::parse(msg.link);
  auto flows = flows_for(link);
  if (msg.flow < 0 || msg.flow >= static_cast<int>(flows.size())) return;
  const Flow& flow = flows[msg.flow];
  if (flow.source_node != self_) return;
  Subscription sub;
  sub.subscriber = msg.src;
  sub.scope = flow.source_scope;
  sub.armed = true;
  subscriptions_[msg.body.at("flow").get<std::string>()] = sub;
  respond(msg, wire::Kind::SubscribeResponse, nlohmann::json::object());
}

void SyncEngine::handle_notify(const wire::Message& msg) {
  std::string key = msg.body.at("flow").get<std::string>();
  FlowState* fs = find_flow(key);
  if (!fs) return;
  fs->dirty = true;
  if (!fs->round.running && !fs->queued) {
    enqueue_runnable(key);
    schedule_work();
  }
}

void SyncEngine::handle_entity_fetch(const wire::Message& msg) {
  std::set<EntityName> wanted;
  for (const auto& name : msg.body.at("entities"))
    wanted.insert(EntityName(name.get<std::string>()));

  nlohmann::json docs = nlohmann::json::array();
  for (Scope scope : {Scope::Public, Scope::Cache}) {
    for (const auto& head : store_.all_heads(scope)) {
      if (wanted.count(head.entity)) docs.push_back(canonical_json(head));
    }
  }
  wire::Message resp;
  resp.kind = wire::Kind::EntityFetchResponse;
  resp.link = msg.link;
  resp.body["docs"] = std::move(docs);
  sim_.send(self_, msg.src, std::move(resp));
}

void SyncEngine::handle_entity_fetch_response(const wire::Message& msg) {
  const auto& interest = hooks_.interest();
  for (const auto& dj : msg.body.at("docs")) {
    EntityDocument doc = document_from_json(dj);
    if (!interest.count(doc.entity)) continue;  // uncached in the meantime
    if (doc.graph == store_.owner()) continue;  // never cache own documents
    store_.force_put(Scope::Cache, doc);
  }
}

void SyncEngine::on_local_commit(Scope scope, const ChangeEntry& entry) {
  (void)entry;
  if (scope == Scope::Private) return;  // private state never syncs

  // Wake owned push flows fed by this scope.
  for (auto& [link, owned] : owned_) {
    for (auto& fs : owned.flows) {
      if (fs.flow.source_node != self_ || fs.flow.source_scope != scope)
        continue;
      fs.dirty = true;
      if (!fs.round.running && !fs.queued)
        enqueue_runnable(flow_key(link, fs.flow.index));
    }
  }
  schedule_work();

  // Edge-triggered change notifications for subscribed pull flows.
  for (auto& [key, sub] : subscriptions_) {
    if (sub.scope != scope || !sub.armed) continue;
    sub.armed = false;
    auto hash = key.rfind('#');
    LinkId link = LinkId::parse(key.substr(0, hash));
    wire::Message msg;
    msg.kind = wire::Kind::ChangeNotify;
    msg.link = link.str();
    msg.body["flow"] = key;
    sim_.send(self_, sub.subscriber, std::move(msg));
  }
}

void SyncEngine::on_interest_added(const EntityName& entity) {
  // Entity-filtered pull flows rescan from zero so documents that passed
  // through the feed before the interest existed are picked up.
  for (auto& [link, owned] : owned_) {
    if (link.kind != LinkKind::CBDown) continue;
    for (auto& fs : owned.flows) {
      fs.reset_requested = true;
      fs.dirty = true;
      if (!fs.round.running && !fs.queued)
        enqueue_runnable(flow_key(link, fs.flow.index));
    }
  }
  schedule_work();

  // First copies over CC links come from a direct fetch; the document
  // filter would otherwise never let them through.
  for (const auto& link : planned_) {
    if (link.kind != LinkKind::CC) continue;
    send_bootstrap_fetch(link, {entity});
  }
}

std::set<NodeId> SyncEngine::link_peers() const {
  std::set<NodeId> peers;
  for (const auto& link : planned_) peers.insert(link.peer_of(self_));
  return peers;
}

std::uint64_t SyncEngine::checkpoint(const LinkId& link, int flow) const {
  auto it = owned_.find(link);
  if (it != owned_.end() && flow >= 0 &&
      flow < static_cast<int>(it->second.flows.size()))
    return it->second.flows[flow].checkpoint;
  auto rit = retained_checkpoints_.find(flow_key(link, flow));
  return rit != retained_checkpoints_.end() ? rit->second : 0;
}

const FlowStats& SyncEngine::stats(const LinkId& link, int flow) const {
  auto it = owned_.find(link);
  if (it != owned_.end() && flow >= 0 &&
      flow < static_cast<int>(it->second.flows.size()))
    return it->second.flows[flow].stats;
  return dummy_stats_;
}

std::uint64_t SyncEngine::total_docs_transferred() const { return total_docs_; }

}  // namespace ers::sync
