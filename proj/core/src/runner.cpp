#include "ers/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ers/digest.hpp"

namespace ers::harness {

namespace {

std::string format_completion(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

bool Report::all_assertions_pass() const {
  for (const auto& a : json.at("assertions"))
    if (!a.at("pass").get<bool>()) return false;
  return true;
}

double Report::min_final_completion() const {
  return json.at("completion").at("min_final").get<double>();
}

bool Report::converged() const {
  return json.at("completion").at("converged").get<bool>();
}

std::string Report::dump() const { return json.dump(2) + "\n"; }

nlohmann::json Report::comparable_sections() const {
  nlohmann::json j;
  j["completion"] = json.at("completion");
  j["assertions"] = json.at("assertions");
  return j;
}

Runner::Runner(Scenario scenario, std::optional<std::uint64_t> seed_override)
    : scenario_(std::move(scenario)) {
  if (seed_override) scenario_.seed = *seed_override;
  scenario_.validate();
  setup();
}

Runner::~Runner() {
  // Runtimes unregister from the simulation; order them before sim teardown.
  for (auto& [id, slot] : slots_) slot.runtime.reset();
}

void Runner::setup() {
  sim_ = std::make_unique<net::Simulation>(scenario_.seed);
  discovery_ =
      std::make_unique<discovery::DiscoveryService>(*sim_, scenario_.discovery);
  sim_->set_membership_hook(
      [this](const net::NodeId& node, const std::optional<net::NetworkId>& from,
             const std::optional<net::NetworkId>& to) {
        discovery_->on_membership_change(node, from, to);
      });
  sim_->set_send_hook([this](const wire::Message& msg) {
    if (!msg.body.contains("docs")) return;
    for (const auto& dj : msg.body.at("docs")) {
      std::string key = dj.at("_id").get<std::string>() + "@" +
                        dj.at("rev").get<std::string>();
      if (private_revs_.count(key)) ++privacy_violations_;
    }
  });

  for (const auto& network : scenario_.networks) sim_->add_network(network);
  for (const auto& [network, imp] : scenario_.baseline_impairments)
    sim_->set_network_impairment(network, imp);

  for (const auto& spec : scenario_.nodes) {
    Slot slot;
    slot.spec = spec;
    slots_.emplace(spec.id, std::move(slot));
  }

  // Memberships first so announcements see the topology.
  for (const auto& spec : scenario_.nodes)
    sim_->set_membership(spec.id, spec.initial_network);

  // Construct runtimes and seed initial data before any daemon starts.
  for (const auto& spec : scenario_.nodes) {
    Slot& slot = slots_.at(spec.id);
    attach_runtime(slot,
                   std::make_unique<Node>(*sim_, *discovery_, spec.id, spec.role,
                                          spec.hostname, scenario_.node_config));
    for (const auto& init : spec.initial_statements)
      slot.runtime->api().add_statement(init.stmt, init.scope);
    for (const auto& entity : spec.initial_cache)
      slot.runtime->api().cache_entity(entity);
  }

  // Daemon start in declaration order; announcement order follows it.
  for (const auto& spec : scenario_.nodes) {
    slots_.at(spec.id).runtime->start();
    slots_.at(spec.id).alive = true;
  }

  for (const auto& move : scenario_.timeline) {
    sim_->schedule_at(move.t, [this, move]() {
      sim_->set_membership(move.node, move.network);
    });
  }

  for (const auto& op : scenario_.workload) {
    sim_->schedule_at(op.t, [this, op]() { apply_workload_op(op); });
  }

  for (net::SimTime t = 0; t <= scenario_.duration_ms;
       t += scenario_.sample_interval_ms) {
    sim_->schedule_at(t, [this]() { sample_metrics(); });
  }
  if (scenario_.duration_ms % scenario_.sample_interval_ms != 0)
    sim_->schedule_at(scenario_.duration_ms, [this]() { sample_metrics(); });

  if (scenario_.link_census_at_ms >= 0) {
    sim_->schedule_at(scenario_.link_census_at_ms, [this]() {
      auto census = link_census();
      census_json_ = nlohmann::json::object();
      census_json_["at_ms"] = sim_->now();
      nlohmann::json counts;
      std::size_t total = 0;
      for (const auto& [kind, links] : census) {
        counts[std::string(sync::to_string(kind))] = links.size();
        total += links.size();
      }
      census_json_["counts"] = counts;
      census_json_["total"] = total;
    });
  }

  if (scenario_.chaos.enabled) {
    faults::ChaosPolicy policy = scenario_.chaos;
    chaos_ = std::make_unique<faults::ChaosMonkey>(
        *sim_, policy,
        faults::ChaosMonkey::Hooks{
            .alive_nodes =
                [this]() {
                  std::set<net::NodeId> alive;
                  for (const auto& [id, slot] : slots_)
                    if (slot.alive) alive.insert(id);
                  return alive;
                },
            .kill = [this](const net::NodeId& id) { kill_node(id); },
            .restart = [this](const net::NodeId& id) { restart_node(id); },
        });
    chaos_->start();
  }

  if (!scenario_.latency.schedule.empty()) {
    latency_ = std::make_unique<faults::LatencyMonkey>(
        *sim_, scenario_.latency, scenario_.baseline_impairments,
        std::set<net::NetworkId>(scenario_.networks.begin(),
                                 scenario_.networks.end()));
    latency_->start();
  }
}

void Runner::attach_runtime(Slot& slot, std::unique_ptr<Node> runtime) {
  slot.runtime = std::move(runtime);
  slot.runtime->set_commit_listener(
      [this, id = slot.spec.id](Scope scope, const ChangeEntry& entry) {
        if (scope == Scope::Private)
          private_revs_.insert(entry.doc_id + "@" + entry.rev.to_string());
      });
}

void Runner::apply_workload_op(const WorkloadOp& op) {
  Slot& slot = slots_.at(op.node);
  if (!slot.alive) {
    sim_->record({sim_->now(), "workload", op.node, "-", "-", "-", "skipped_down"});
    return;
  }
  Node* node = slot.runtime.get();
  std::string outcome = "ok";
  switch (op.kind) {
    case WorkloadOp::Kind::CreateEntity: {
      auto st = node->api().create_entity(EntityName(op.entity), op.scope);
      if (st != RegistryStatus::Ok) outcome = "rejected";
      break;
    }
    case WorkloadOp::Kind::AddStatement: {
      auto st = node->api().add_statement(
          Statement(EntityName(op.entity), op.predicate, op.value), op.scope);
      if (st != RegistryStatus::Ok) outcome = "rejected";
      break;
    }
    case WorkloadOp::Kind::RemoveStatement: {
      auto st = node->api().remove_statement(
          Statement(EntityName(op.entity), op.predicate, op.value), op.scope);
      if (st != RegistryStatus::Ok) outcome = "rejected";
      break;
    }
    case WorkloadOp::Kind::DeleteEntity: {
      auto st = node->api().delete_entity(EntityName(op.entity), op.scope);
      if (st != RegistryStatus::Ok) outcome = "rejected";
      break;
    }
    case WorkloadOp::Kind::CacheEntity:
      node->api().cache_entity(EntityName(op.entity));
      break;
    case WorkloadOp::Kind::UncacheEntity:
      node->api().uncache_entity(EntityName(op.entity));
      break;
    case WorkloadOp::Kind::SearchCacheAll: {
      Query q = op.query;
      q.remote = true;
      node->api().search(q, [node](SearchResult result) {
        for (const auto& name : result.names) node->api().cache_entity(name);
      });
      break;
    }
  }
  sim_->record({sim_->now(), "workload", op.node, "-", "-", "-",
                std::string(op_kind_name(op.kind)) + ":" + outcome});
}

const TriStore* Runner::store_of(const net::NodeId& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) return nullptr;
  if (it->second.runtime) return &it->second.runtime->store();
  if (it->second.persisted_store) return &*it->second.persisted_store;
  return nullptr;
}

const std::set<EntityName>* Runner::interest_of(const net::NodeId& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) return nullptr;
  if (it->second.runtime) return &it->second.runtime->api().interest();
  return &it->second.persisted_interest;
}

std::pair<std::uint64_t, std::uint64_t> Runner::completion_counts(
    const net::NodeId& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) return {0, 0};
  const Slot& slot = it->second;

  const TriStore* own = store_of(id);
  const std::set<EntityName>* interest = interest_of(id);
  if (!own || !interest) return {0, 0};

  bool is_bridge = slot.spec.role == Role::Bridge;
  std::uint64_t held = 0, expected = 0;
  for (const auto& [other_id, other_slot] : slots_) {
    if (other_id == id) continue;
    const TriStore* other = store_of(other_id);
    if (!other) continue;
    for (const auto& doc : other->live_docs(Scope::Public)) {
      if (!is_bridge && !interest->count(doc.entity)) continue;
      ++expected;
      auto cached = own->get(Scope::Cache, doc.doc_id);
      if (cached && cached->revision == doc.revision) ++held;
    }
  }
  return {held, expected};
}

double Runner::completion_of(const net::NodeId& id) const {
  auto [held, expected] = completion_counts(id);
  return expected == 0 ? 1.0 : static_cast<double>(held) / expected;
}

void Runner::sample_metrics() {
  for (const auto& [id, slot] : slots_) {
    double value;
    if (slot.alive) {
      value = completion_of(id);
      last_completion_[id] = value;
    } else {
      auto it = last_completion_.find(id);
      value = it != last_completion_.end() ? it->second : 1.0;
    }
    series_[id].emplace_back(sim_->now(), value);
  }
}

std::map<sync::LinkKind, std::set<sync::LinkId>> Runner::link_census() const {
  std::map<sync::LinkKind, std::set<sync::LinkId>> census;
  for (const auto& [id, slot] : slots_) {
    if (!slot.alive) continue;
    for (const auto& link : slot.runtime->sync().planned_links())
      census[link.kind].insert(link);
  }
  return census;
}

void Runner::kill_node(const net::NodeId& id) {
  Slot& slot = slots_.at(id);
  if (!slot.alive) return;
  slot.persisted = slot.runtime->snapshot();
  slot.persisted_store = TriStore::from_snapshot(slot.persisted.at("store"));
  slot.persisted_interest.clear();
  for (const auto& e : slot.persisted.at("interest"))
    slot.persisted_interest.insert(EntityName(e.get<std::string>()));
  slot.network_at_down = sim_->membership(id);
  slot.runtime.reset();
  discovery_->node_stopped(id);
  sim_->set_membership(id, std::nullopt);
  slot.alive = false;
}

void Runner::restart_node(const net::NodeId& id) {
  Slot& slot = slots_.at(id);
  if (slot.alive) return;
  if (!sim_->membership(id) && slot.network_at_down)
    sim_->set_membership(id, slot.network_at_down);

  attach_runtime(slot, std::make_unique<Node>(
                           *sim_, *discovery_, id, slot.spec.role,
                           slot.spec.hostname, scenario_.node_config,
                           TriStore::from_snapshot(slot.persisted.at("store")),
                           slot.persisted_interest));
  slot.runtime->start();
  slot.alive = true;
  slot.persisted_store.reset();
}

std::vector<AssertionResult> Runner::evaluate_assertions() const {
  std::vector<AssertionResult> results;
  for (const auto& spec : scenario_.assertions) {
    AssertionResult result;
    result.name = spec.name;
    switch (spec.kind) {
      case AssertionSpec::Kind::AllCompletionEq: {
        result.pass = true;
        std::ostringstream detail;
        for (const auto& [id, slot] : slots_) {
          auto [held, expected] = completion_counts(id);
          double v = expected == 0 ? 1.0 : double(held) / expected;
          bool ok = spec.expect == 1.0 ? held == expected : v == spec.expect;
          if (!ok) {
            result.pass = false;
            detail << id << "=" << held << "/" << expected << " ";
          }
        }
        result.detail = detail.str();
        break;
      }
      case AssertionSpec::Kind::NodeCompletionEq: {
        auto [held, expected] = completion_counts(spec.node);
        double v = expected == 0 ? 1.0 : double(held) / expected;
        result.pass = spec.expect == 1.0 ? held == expected : v == spec.expect;
        result.detail = std::to_string(held) + "/" + std::to_string(expected);
        break;
      }
      case AssertionSpec::Kind::MinCompletionLt: {
        double min_v = 1.0;
        for (const auto& [id, slot] : slots_)
          min_v = std::min(min_v, completion_of(id));
        result.pass = min_v < spec.expect;
        result.detail = "min=" + format_completion(min_v);
        break;
      }
      case AssertionSpec::Kind::NoLiveCacheDocAbout:
      case AssertionSpec::Kind::CacheDocsAboutEq: {
        const TriStore* store = store_of(spec.node);
        int count = 0;
        if (store) {
          for (const auto& doc : store->live_docs(Scope::Cache))
            if (doc.entity.value == spec.entity) ++count;
        }
        int want =
            spec.kind == AssertionSpec::Kind::NoLiveCacheDocAbout ? 0 : spec.count;
        result.pass = count == want;
        result.detail = "live_docs=" + std::to_string(count);
        break;
      }
      case AssertionSpec::Kind::PublicPairPresent: {
        const TriStore* store = store_of(spec.node);
        result.pass = false;
        if (store) {
          auto doc = store->get(
              Scope::Public, make_doc_id(GraphId(spec.node), EntityName(spec.entity)));
          result.pass = doc && doc->has_pair(spec.predicate, spec.value);
        }
        break;
      }
    }
    results.push_back(std::move(result));
  }
  return results;
}

Report Runner::run() {
  sim_->advance_until(scenario_.duration_ms);

  Report report;
  nlohmann::json& j = report.json;
  j["meta"]["scenario"] = scenario_.name;
  j["meta"]["seed"] = scenario_.seed;
  j["meta"]["duration_ms"] = scenario_.duration_ms;

  nlohmann::json final_json = nlohmann::json::object();
  bool converged = true;
  double min_final = 1.0;
  for (const auto& [id, slot] : slots_) {
    auto [held, expected] = completion_counts(id);
    double v = expected == 0 ? 1.0 : double(held) / expected;
    nlohmann::json nj;
    nj["held"] = held;
    nj["expected"] = expected;
    nj["value"] = format_completion(v);
    final_json[id] = nj;
    if (held != expected) converged = false;
    min_final = std::min(min_final, v);
  }
  j["completion"]["final"] = final_json;
  j["completion"]["min_final"] = min_final;
  j["completion"]["converged"] = converged;

  nlohmann::json series_json = nlohmann::json::object();
  for (const auto& [id, samples] : series_) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [t, v] : samples)
      arr.push_back({t, format_completion(v)});
    series_json[id] = arr;
  }
  j["completion"]["series"] = series_json;

  j["links"] = census_json_.is_null() ? nlohmann::json::object() : census_json_;

  nlohmann::json assertions_json = nlohmann::json::array();
  for (const auto& result : evaluate_assertions()) {
    nlohmann::json aj;
    aj["name"] = result.name;
    aj["pass"] = result.pass;
    aj["detail"] = result.detail;
    assertions_json.push_back(aj);
  }
  j["assertions"] = assertions_json;

  const auto& traffic = sim_->traffic();
  j["traffic"]["sent"] = traffic.sent;
  j["traffic"]["delivered"] = traffic.delivered;
  j["traffic"]["lost"] = traffic.lost;
  j["traffic"]["corrupted"] = traffic.corrupted;
  j["traffic"]["duplicated"] = traffic.duplicated;
  j["traffic"]["dropped_offline"] = traffic.dropped_offline;
  j["traffic"]["unroutable"] = traffic.unroutable;
  j["traffic"]["reordered"] = traffic.reordered;

  j["privacy"]["private_docs_on_wire"] = privacy_violations_;
  return report;
}

Node* Runner::node(const net::NodeId& id) {
  auto it = slots_.find(id);
  return it != slots_.end() ? it->second.runtime.get() : nullptr;
}

bool Runner::node_alive(const net::NodeId& id) const {
  auto it = slots_.find(id);
  return it != slots_.end() && it->second.alive;
}

std::string Runner::trace_with_header() const {
  std::string out = "#scenario " + scenario_.to_json().dump() + "\n";
  out += sim_->trace_text();
  return out;
}

Scenario apply_axis(Scenario scenario, const std::string& axis, double value) {
  for (const auto& network : scenario.networks) {
    net::Impairment& imp = scenario.baseline_impairments[network];
    if (axis == "latency")
      imp.one_way_latency_ms = static_cast<net::SimTime>(value);
    else if (axis == "loss")
      imp.loss_prob = value;
    else if (axis == "corruption")
      imp.corruption_prob = value;
    else if (axis == "duplication")
      imp.duplication_prob = value;
    else if (axis == "reorder")
      imp.reorder_prob = value;
    else
      throw std::invalid_argument("unknown sweep axis: " + axis);
    imp.validate();
  }
  return scenario;
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& axis,
                          double value) {
  std::ostringstream key;
  key << axis << "=" << value;
  return base ^ fnv1a64(key.str());
}

std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& axis,
                                const std::vector<double>& values) {
  std::vector<SweepRow> rows;
  for (double value : values) {
    Scenario scenario = apply_axis(base, axis, value);
    Runner runner(std::move(scenario), derive_seed(base.seed, axis, value));
    Report report = runner.run();
    SweepRow row;
    row.value = value;
    row.min_completion = report.min_final_completion();
    row.converged = report.converged();
    row.privacy_violations = runner.privacy_violations();
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "value,min_completion,converged\n";
  for (const auto& row : rows) {
    os << row.value << ',' << format_completion(row.min_completion) << ','
       << (row.converged ? "true" : "false") << '\n';
  }
  return os.str();
}

ReplayOutcome verify_replay(const std::string& trace_content) {
  ReplayOutcome outcome;
  if (trace_content.rfind("#scenario ", 0) != 0) {
    outcome.detail = "missing #scenario header";
    return outcome;
  }
  auto newline = trace_content.find('\n');
  std::string header = trace_content.substr(10, newline - 10);
  Scenario scenario;
  try {
    scenario = Scenario::from_json(nlohmann::json::parse(header));
  } catch (const std::exception& e) {
    outcome.detail = std::string("bad header: ") + e.what();
    return outcome;
  }
  Runner runner(std::move(scenario));
  runner.run();
  std::string replayed = runner.trace_with_header();
  if (replayed == trace_content) {
    outcome.ok = true;
    outcome.detail = "byte-identical";
  } else {
    outcome.detail = "re-execution diverged";
  }
  return outcome;
}

}  // namespace ers::harness
