#include "ers/scenario.hpp"

#include <algorithm>
#include <set>

namespace ers::harness {

std::string_view op_kind_name(WorkloadOp::Kind kind) {
  switch (kind) {
    case WorkloadOp::Kind::CreateEntity: return "create_entity";
    case WorkloadOp::Kind::AddStatement: return "add_statement";
    case WorkloadOp::Kind::RemoveStatement: return "remove_statement";
    case WorkloadOp::Kind::DeleteEntity: return "delete_entity";
    case WorkloadOp::Kind::CacheEntity: return "cache_entity";
    case WorkloadOp::Kind::UncacheEntity: return "uncache_entity";
    case WorkloadOp::Kind::SearchCacheAll: return "search_cache_all";
  }
  return "?";
}

namespace {

WorkloadOp::Kind op_kind_from(const std::string& s) {
  if (s == "create_entity") return WorkloadOp::Kind::CreateEntity;
  if (s == "add_statement") return WorkloadOp::Kind::AddStatement;
  if (s == "remove_statement") return WorkloadOp::Kind::RemoveStatement;
  if (s == "delete_entity") return WorkloadOp::Kind::DeleteEntity;
  if (s == "cache_entity") return WorkloadOp::Kind::CacheEntity;
  if (s == "uncache_entity") return WorkloadOp::Kind::UncacheEntity;
  if (s == "search_cache_all") return WorkloadOp::Kind::SearchCacheAll;
  throw ValidationError("unknown workload op kind: " + s);
}

std::string_view assertion_kind_name(AssertionSpec::Kind kind) {
  switch (kind) {
    case AssertionSpec::Kind::AllCompletionEq: return "all_completion_eq";
    case AssertionSpec::Kind::NodeCompletionEq: return "node_completion_eq";
    case AssertionSpec::Kind::MinCompletionLt: return "min_completion_lt";
    case AssertionSpec::Kind::NoLiveCacheDocAbout: return "no_live_cache_doc_about";
    case AssertionSpec::Kind::CacheDocsAboutEq: return "cache_docs_about_eq";
    case AssertionSpec::Kind::PublicPairPresent: return "public_pair_present";
  }
  return "?";
}

AssertionSpec::Kind assertion_kind_from(const std::string& s) {
  if (s == "all_completion_eq") return AssertionSpec::Kind::AllCompletionEq;
  if (s == "node_completion_eq") return AssertionSpec::Kind::NodeCompletionEq;
  if (s == "min_completion_lt") return AssertionSpec::Kind::MinCompletionLt;
  if (s == "no_live_cache_doc_about") return AssertionSpec::Kind::NoLiveCacheDocAbout;
  if (s == "cache_docs_about_eq") return AssertionSpec::Kind::CacheDocsAboutEq;
  if (s == "public_pair_present") return AssertionSpec::Kind::PublicPairPresent;
  throw ValidationError("unknown assertion kind: " + s);
}

}  // namespace

nlohmann::json impairment_to_json(const net::Impairment& imp) {
  nlohmann::json j;
  j["one_way_latency_ms"] = imp.one_way_latency_ms;
  j["loss_prob"] = imp.loss_prob;
  j["corruption_prob"] = imp.corruption_prob;
  j["duplication_prob"] = imp.duplication_prob;
  j["reorder_prob"] = imp.reorder_prob;
  return j;
}

net::Impairment impairment_from_json(const nlohmann::json& j) {
  net::Impairment imp;
  imp.one_way_latency_ms = j.value("one_way_latency_ms", net::SimTime(0));
  imp.loss_prob = j.value("loss_prob", 0.0);
  imp.corruption_prob = j.value("corruption_prob", 0.0);
  imp.duplication_prob = j.value("duplication_prob", 0.0);
  imp.reorder_prob = j.value("reorder_prob", 0.0);
  imp.validate();
  return imp;
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["seed"] = seed;
  j["duration_ms"] = duration_ms;
  j["networks"] = networks;

  nlohmann::json baseline = nlohmann::json::object();
  for (const auto& [network, imp] : baseline_impairments)
    baseline[network] = impairment_to_json(imp);
  j["baseline_impairments"] = baseline;

  nlohmann::json nodes_json = nlohmann::json::array();
  for (const auto& spec : nodes) {
    nlohmann::json nj;
    nj["id"] = spec.id;
    nj["role"] = std::string(to_string(spec.role));
    nj["hostname"] = spec.hostname;
    nj["network"] = spec.initial_network ? nlohmann::json(*spec.initial_network)
                                         : nlohmann::json(nullptr);
    nlohmann::json stmts = nlohmann::json::array();
    for (const auto& init : spec.initial_statements) {
      nlohmann::json sj;
      sj["entity"] = init.stmt.entity.value;
      sj["predicate"] = init.stmt.predicate;
      sj["value"] = init.stmt.value;
      sj["scope"] = std::string(to_string(init.scope));
      stmts.push_back(sj);
    }
    nj["initial_statements"] = stmts;
    nlohmann::json cache = nlohmann::json::array();
    for (const auto& e : spec.initial_cache) cache.push_back(e.value);
    nj["initial_cache"] = cache;
    nodes_json.push_back(nj);
  }
  j["nodes"] = nodes_json;

  nlohmann::json timeline_json = nlohmann::json::array();
  for (const auto& move : timeline) {
    nlohmann::json mj;
    mj["t"] = move.t;
    mj["node"] = move.node;
    mj["network"] =
        move.network ? nlohmann::json(*move.network) : nlohmann::json(nullptr);
    timeline_json.push_back(mj);
  }
  j["timeline"] = timeline_json;

  nlohmann::json workload_json = nlohmann::json::array();
  for (const auto& op : workload) {
    nlohmann::json oj;
    oj["t"] = op.t;
    oj["node"] = op.node;
    oj["op"] = std::string(op_kind_name(op.kind));
    if (op.kind == WorkloadOp::Kind::SearchCacheAll) {
      oj["query"] = op.query.to_json();
    } else {
      oj["entity"] = op.entity;
      if (op.kind == WorkloadOp::Kind::AddStatement ||
          op.kind == WorkloadOp::Kind::RemoveStatement) {
        oj["predicate"] = op.predicate;
        oj["value"] = op.value;
      }
      if (op.kind != WorkloadOp::Kind::CacheEntity &&
          op.kind != WorkloadOp::Kind::UncacheEntity)
        oj["scope"] = std::string(to_string(op.scope));
    }
    workload_json.push_back(oj);
  }
  j["workload"] = workload_json;

  nlohmann::json chaos_json;
  chaos_json["enabled"] = chaos.enabled;
  if (chaos.enabled) {
    chaos_json["interval_ms"] = chaos.interval_ms;
    chaos_json["kill_prob"] = chaos.kill_prob;
    chaos_json["min_down_ms"] = chaos.min_down_ms;
    chaos_json["max_down_ms"] = chaos.max_down_ms;
    chaos_json["eligible"] = chaos.eligible;
    chaos_json["start_ms"] = chaos.start_ms;
    chaos_json["end_ms"] = chaos.end_ms;
  }
  j["chaos"] = chaos_json;

  nlohmann::json latency_json = nlohmann::json::array();
  for (const auto& window : latency.schedule) {
    nlohmann::json wj;
    wj["start_ms"] = window.start_ms;
    wj["end_ms"] = window.end_ms;
    wj["networks"] = window.networks;
    wj["impairment"] = impairment_to_json(window.impairment);
    latency_json.push_back(wj);
  }
  j["latency_schedule"] = latency_json;

  nlohmann::json discovery_json;
  discovery_json["per_peer_delay_ms"] = discovery.per_peer_delay_ms;
  discovery_json["ttl_ms"] = discovery.ttl_ms;
  discovery_json["suffix_len"] = discovery.suffix_len;
  j["discovery"] = discovery_json;

  nlohmann::json sync_json;
  sync_json["batch_size"] = node_config.sync.batch_size;
  sync_json["worker_count"] = node_config.sync.worker_count;
  sync_json["retry_timeout_ms"] = node_config.sync.retry_timeout_ms;
  sync_json["handshake_rounds"] = node_config.sync.handshake_rounds;
  sync_json["response_timeout_ms"] = node_config.sync.response_timeout_ms;
  sync_json["idle_poll_interval_ms"] = node_config.sync.idle_poll_interval_ms;
  j["sync"] = sync_json;
  j["remote_search_timeout_ms"] = node_config.remote_search_timeout_ms;

  j["sample_interval_ms"] = sample_interval_ms;
  j["link_census_at_ms"] = link_census_at_ms;

  nlohmann::json assertions_json = nlohmann::json::array();
  for (const auto& spec : assertions) {
    nlohmann::json aj;
    aj["name"] = spec.name;
    aj["kind"] = std::string(assertion_kind_name(spec.kind));
    aj["node"] = spec.node;
    aj["entity"] = spec.entity;
    aj["predicate"] = spec.predicate;
    aj["value"] = spec.value;
    aj["expect"] = spec.expect;
    aj["count"] = spec.count;
    assertions_json.push_back(aj);
  }
  j["assertions"] = assertions_json;
  return j;
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.at("name").get<std::string>();
    s.seed = j.value("seed", std::uint64_t(1));
    s.duration_ms = j.at("duration_ms").get<net::SimTime>();
    s.networks = j.at("networks").get<std::vector<std::string>>();

    if (j.contains("baseline_impairments"))
      for (auto it = j["baseline_impairments"].begin();
           it != j["baseline_impairments"].end(); ++it)
        s.baseline_impairments[it.key()] = impairment_from_json(it.value());

    std::size_t index = 0;
    for (const auto& nj : j.at("nodes")) {
      try {
        NodeSpec spec;
        spec.id = nj.at("id").get<std::string>();
        spec.role = role_from_string(nj.at("role").get<std::string>());
        spec.hostname = nj.value("hostname", spec.id);
        if (!nj.at("network").is_null())
          spec.initial_network = nj.at("network").get<std::string>();
        for (const auto& sj : nj.value("initial_statements", nlohmann::json::array())) {
          InitialStatement init;
          init.stmt = Statement(EntityName(sj.at("entity").get<std::string>()),
                                sj.at("predicate").get<std::string>(),
                                sj.at("value").get<std::string>());
          init.scope = scope_from_string(sj.value("scope", "public"));
          spec.initial_statements.push_back(std::move(init));
        }
        for (const auto& e : nj.value("initial_cache", nlohmann::json::array()))
          spec.initial_cache.emplace_back(e.get<std::string>());
        s.nodes.push_back(std::move(spec));
      } catch (const std::exception& e) {
        throw ValidationError("nodes[" + std::to_string(index) + "]: " + e.what());
      }
      ++index;
    }

    index = 0;
    for (const auto& mj : j.value("timeline", nlohmann::json::array())) {
      try {
        MoveEvent move;
        move.t = mj.at("t").get<net::SimTime>();
        move.node = mj.at("node").get<std::string>();
        if (!mj.at("network").is_null())
          move.network = mj.at("network").get<std::string>();
        s.timeline.push_back(std::move(move));
      } catch (const std::exception& e) {
        throw ValidationError("timeline[" + std::to_string(index) + "]: " + e.what());
      }
      ++index;
    }

    index = 0;
    for (const auto& oj : j.value("workload", nlohmann::json::array())) {
      try {
        WorkloadOp op;
        op.t = oj.at("t").get<net::SimTime>();
        op.node = oj.at("node").get<std::string>();
        op.kind = op_kind_from(oj.at("op").get<std::string>());
        if (op.kind == WorkloadOp::Kind::SearchCacheAll) {
          op.query = Query::from_json(oj.at("query"));
          op.query.remote = true;
        } else {
          op.entity = oj.at("entity").get<std::string>();
          op.predicate = oj.value("predicate", "");
          op.value = oj.value("value", "");
          op.scope = scope_from_string(oj.value("scope", "public"));
        }
        s.workload.push_back(std::move(op));
      } catch (const std::exception& e) {
        throw ValidationError("workload[" + std::to_string(index) + "]: " + e.what());
      }
      ++index;
    }

    const auto& cj = j.value("chaos", nlohmann::json::object());
    s.chaos.enabled = cj.value("enabled", false);
    if (s.chaos.enabled) {
      s.chaos.interval_ms = cj.at("interval_ms").get<net::SimTime>();
      s.chaos.kill_prob = cj.at("kill_prob").get<double>();
      s.chaos.min_down_ms = cj.at("min_down_ms").get<net::SimTime>();
      s.chaos.max_down_ms = cj.at("max_down_ms").get<net::SimTime>();
      s.chaos.eligible = cj.at("eligible").get<std::set<std::string>>();
      s.chaos.start_ms = cj.value("start_ms", net::SimTime(0));
      s.chaos.end_ms = cj.value("end_ms", s.duration_ms);
    }

    index = 0;
    for (const auto& wj : j.value("latency_schedule", nlohmann::json::array())) {
      try {
        faults::LatencyWindow window;
        window.start_ms = wj.at("start_ms").get<net::SimTime>();
        window.end_ms = wj.at("end_ms").get<net::SimTime>();
        window.networks = wj.value("networks", std::set<std::string>{});
        window.impairment = impairment_from_json(wj.at("impairment"));
        s.latency.schedule.push_back(std::move(window));
      } catch (const std::exception& e) {
        throw ValidationError("latency_schedule[" + std::to_string(index) +
                              "]: " + e.what());
      }
      ++index;
    }

    const auto& dj = j.value("discovery", nlohmann::json::object());
    s.discovery.per_peer_delay_ms = dj.value("per_peer_delay_ms", net::SimTime(75));
    s.discovery.ttl_ms = dj.value("ttl_ms", net::SimTime(2000));
    s.discovery.suffix_len = dj.value("suffix_len", 6);

    const auto& yj = j.value("sync", nlohmann::json::object());
    s.node_config.sync.batch_size = yj.value("batch_size", 10);
    s.node_config.sync.worker_count = yj.value("worker_count", 4);
    s.node_config.sync.retry_timeout_ms = yj.value("retry_timeout_ms", net::SimTime(500));
    s.node_config.sync.handshake_rounds = yj.value("handshake_rounds", 3);
    s.node_config.sync.response_timeout_ms =
        yj.value("response_timeout_ms", net::SimTime(230));
    s.node_config.sync.idle_poll_interval_ms =
        yj.value("idle_poll_interval_ms", net::SimTime(2500));
    s.node_config.remote_search_timeout_ms =
        j.value("remote_search_timeout_ms", net::SimTime(2000));

    s.sample_interval_ms = j.value("sample_interval_ms", net::SimTime(1000));
    s.link_census_at_ms = j.value("link_census_at_ms", net::SimTime(-1));

    index = 0;
    for (const auto& aj : j.value("assertions", nlohmann::json::array())) {
      try {
        AssertionSpec spec;
        spec.name = aj.at("name").get<std::string>();
        spec.kind = assertion_kind_from(aj.at("kind").get<std::string>());
        spec.node = aj.value("node", "");
        spec.entity = aj.value("entity", "");
        spec.predicate = aj.value("predicate", "");
        spec.value = aj.value("value", "");
        spec.expect = aj.value("expect", 1.0);
        spec.count = aj.value("count", 0);
        s.assertions.push_back(std::move(spec));
      } catch (const std::exception& e) {
        throw ValidationError("assertions[" + std::to_string(index) + "]: " + e.what());
      }
      ++index;
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  return s;
}

void Scenario::validate() const {
  std::set<net::NetworkId> nets(networks.begin(), networks.end());
  if (nets.size() != networks.size())
    throw ValidationError("networks: duplicate network id");

  std::set<net::NodeId> ids;
  std::size_t index = 0;
  for (const auto& spec : nodes) {
    std::string where = "nodes[" + std::to_string(index) + "]";
    if (spec.id.empty()) throw ValidationError(where + ": empty node id");
    if (spec.id.find_first_of(",~#|") != std::string::npos)
      throw ValidationError(where + ": node id contains reserved characters");
    if (!ids.insert(spec.id).second)
      throw ValidationError(where + ": duplicate node id " + spec.id);
    if (spec.initial_network && !nets.count(*spec.initial_network))
      throw ValidationError(where + ": unknown network " + *spec.initial_network);
    ++index;
  }

  for (const auto& [network, imp] : baseline_impairments) {
    if (!nets.count(network))
      throw ValidationError("baseline_impairments: unknown network " + network);
    imp.validate();
  }

  index = 0;
  for (const auto& move : timeline) {
    std::string where = "timeline[" + std::to_string(index) + "]";
    if (!ids.count(move.node))
      throw ValidationError(where + ": unknown node " + move.node);
    if (move.network && !nets.count(*move.network))
      throw ValidationError(where + ": unknown network " + *move.network);
    if (move.t < 0 || move.t > duration_ms)
      throw ValidationError(where + ": time outside duration");
    ++index;
  }

  index = 0;
  for (const auto& op : workload) {
    std::string where = "workload[" + std::to_string(index) + "]";
    if (!ids.count(op.node))
      throw ValidationError(where + ": unknown node " + op.node);
    if (op.t < 0 || op.t > duration_ms)
      throw ValidationError(where + ": time outside duration");
    if (op.kind == WorkloadOp::Kind::SearchCacheAll)
      op.query.validate();
    else if (op.entity.empty())
      throw ValidationError(where + ": missing entity");
    if (op.scope == Scope::Cache &&
        (op.kind == WorkloadOp::Kind::CreateEntity ||
         op.kind == WorkloadOp::Kind::AddStatement ||
         op.kind == WorkloadOp::Kind::RemoveStatement ||
         op.kind == WorkloadOp::Kind::DeleteEntity))
      throw ValidationError(where + ": cache scope is not writable by the API");
    ++index;
  }

  if (chaos.enabled) {
    chaos.validate();
    for (const auto& node : chaos.eligible)
      if (!ids.count(node))
        throw ValidationError("chaos.eligible: unknown node " + node);
  }
  latency.validate();
  for (const auto& window : latency.schedule)
    for (const auto& network : window.networks)
      if (!nets.count(network))
        throw ValidationError("latency_schedule: unknown network " + network);

  node_config.sync.validate();
  if (sample_interval_ms <= 0)
    throw ValidationError("sample_interval_ms must be positive");
  if (duration_ms <= 0) throw ValidationError("duration_ms must be positive");

  index = 0;
  for (const auto& spec : assertions) {
    std::string where = "assertions[" + std::to_string(index) + "]";
    bool needs_node = spec.kind == AssertionSpec::Kind::NodeCompletionEq ||
                      spec.kind == AssertionSpec::Kind::NoLiveCacheDocAbout ||
                      spec.kind == AssertionSpec::Kind::CacheDocsAboutEq ||
                      spec.kind == AssertionSpec::Kind::PublicPairPresent;
    if (needs_node && !ids.count(spec.node))
      throw ValidationError(where + ": unknown node " + spec.node);
    ++index;
  }
}

}  // namespace ers::harness
