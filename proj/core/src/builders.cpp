#include "ers/builders.hpp"

#include <random>
#include <sstream>

#include "ers/runner.hpp"

namespace ers::harness {

namespace {

std::string two_digits(int i) {
  std::ostringstream os;
  if (i < 10) os << '0';
  os << i;
  return os.str();
}

WorkloadOp op_create(net::SimTime t, const net::NodeId& node,
                     const std::string& entity, Scope scope = Scope::Public) {
  WorkloadOp op;
  op.t = t;
  op.node = node;
  op.kind = WorkloadOp::Kind::CreateEntity;
  op.entity = entity;
  op.scope = scope;
  return op;
}

WorkloadOp op_add(net::SimTime t, const net::NodeId& node,
                  const std::string& entity, const std::string& predicate,
                  const std::string& value, Scope scope = Scope::Public) {
  WorkloadOp op;
  op.t = t;
  op.node = node;
  op.kind = WorkloadOp::Kind::AddStatement;
  op.entity = entity;
  op.predicate = predicate;
  op.value = value;
  op.scope = scope;
  return op;
}

WorkloadOp op_remove(net::SimTime t, const net::NodeId& node,
                     const std::string& entity, const std::string& predicate,
                     const std::string& value, Scope scope = Scope::Public) {
  WorkloadOp op = op_add(t, node, entity, predicate, value, scope);
  op.kind = WorkloadOp::Kind::RemoveStatement;
  return op;
}

WorkloadOp op_delete(net::SimTime t, const net::NodeId& node,
                     const std::string& entity, Scope scope = Scope::Public) {
  WorkloadOp op;
  op.t = t;
  op.node = node;
  op.kind = WorkloadOp::Kind::DeleteEntity;
  op.entity = entity;
  op.scope = scope;
  return op;
}

WorkloadOp op_cache(net::SimTime t, const net::NodeId& node,
                    const std::string& entity) {
  WorkloadOp op;
  op.t = t;
  op.node = node;
  op.kind = WorkloadOp::Kind::CacheEntity;
  op.entity = entity;
  return op;
}

WorkloadOp op_search_cache_all(net::SimTime t, const net::NodeId& node,
                               Query query) {
  WorkloadOp op;
  op.t = t;
  op.node = node;
  op.kind = WorkloadOp::Kind::SearchCacheAll;
  query.remote = true;
  op.query = std::move(query);
  return op;
}

}  // namespace

Scenario make_simple() {
  Scenario s;
  s.name = "simple";
  s.seed = 42;
  s.duration_ms = 10000;
  s.networks = {"lan"};

  NodeSpec node1;
  node1.id = "node1";
  node1.role = Role::Contributor;
  node1.hostname = "node1";
  node1.initial_network = "lan";
  NodeSpec node2 = node1;
  node2.id = "node2";
  node2.hostname = "node2";
  s.nodes = {node1, node2};

  const std::string widget = "urn:ers:demo/widget";
  const std::string journal = "urn:ers:demo/journal";

  s.workload.push_back(op_create(300, "node2", widget));
  s.workload.push_back(op_add(350, "node2", widget, "wiki:color", "blue"));
  s.workload.push_back(op_add(400, "node1", journal, "log:note", "day one"));
  s.workload.push_back(op_add(450, "node1", "urn:ers:demo/drafts", "log:draft",
                              "unpublished", Scope::Private));

  Query by_name;
  by_name.kind = Query::Kind::ByName;
  by_name.entity_pattern = widget;
  by_name.scope_mask = {Scope::Public, Scope::Cache};
  s.workload.push_back(op_search_cache_all(1500, "node1", by_name));

  s.workload.push_back(op_add(2200, "node2", widget, "wiki:size", "large"));
  s.timeline.push_back({3000, "node1", std::nullopt});
  s.workload.push_back(op_add(4000, "node2", widget, "wiki:price", "10"));
  s.workload.push_back(op_delete(5000, "node2", widget));
  s.timeline.push_back({7000, "node1", "lan"});

  AssertionSpec deletion;
  deletion.name = "deletion_propagated_to_cache";
  deletion.kind = AssertionSpec::Kind::NoLiveCacheDocAbout;
  deletion.node = "node1";
  deletion.entity = widget;
  s.assertions.push_back(deletion);

  AssertionSpec untouched;
  untouched.name = "own_public_statements_untouched";
  untouched.kind = AssertionSpec::Kind::PublicPairPresent;
  untouched.node = "node1";
  untouched.entity = journal;
  untouched.predicate = "log:note";
  untouched.value = "day one";
  s.assertions.push_back(untouched);

  AssertionSpec converged;
  converged.name = "converged";
  converged.kind = AssertionSpec::Kind::AllCompletionEq;
  converged.expect = 1.0;
  s.assertions.push_back(converged);

  s.sample_interval_ms = 500;
  return s;
}

Scenario make_conference(const ConferenceParams& params) {
  Scenario s;
  s.name = params.with_bridge ? (params.chaos ? "conference-chaos" : "conference")
                              : "conference-nobridge";
  s.seed = 11;
  s.networks = {"hall"};

  if (params.with_bridge) {
    NodeSpec bridge;
    bridge.id = "bridge1";
    bridge.role = Role::Bridge;
    bridge.hostname = "bridgepi";
    bridge.initial_network = "hall";
    s.nodes.push_back(bridge);
  }

  std::vector<std::string> entities;
  for (int i = 1; i <= params.attendees; ++i) {
    std::string nn = two_digits(i);
    NodeSpec laptop;
    laptop.id = "laptop" + nn;
    laptop.role = Role::Contributor;
    laptop.hostname = "laptop" + nn;
    laptop.initial_network = "hall";

    std::string entity = "urn:ers:people/attendee" + nn;
    entities.push_back(entity);
    laptop.initial_statements.push_back(
        {Statement(EntityName(entity), "rdf:type", "ers:ConferenceAttendee"),
         Scope::Public});
    laptop.initial_statements.push_back(
        {Statement(EntityName(entity), "foaf:name", "Attendee " + nn),
         Scope::Public});
    laptop.initial_statements.push_back(
        {Statement(EntityName(entity), "ers:skill", "skill" + std::to_string(i % 5)),
         Scope::Public});
    laptop.initial_statements.push_back(
        {Statement(EntityName("urn:ers:private/notes" + nn), "note:text",
                   "room pin " + nn),
         Scope::Private});
    s.nodes.push_back(laptop);
  }

  if (params.with_bridge) {
    net::SimTime search_base = 5000;
    for (int i = 1; i <= params.attendees; ++i) {
      Query q;
      q.kind = Query::Kind::ByPropertyValue;
      q.predicate = "rdf:type";
      q.value = "ers:ConferenceAttendee";
      q.scope_mask = {Scope::Public, Scope::Cache};
      s.workload.push_back(op_search_cache_all(search_base + i * 25,
                                               "laptop" + two_digits(i), q));
    }

    net::SimTime endorse_from = params.chaos ? 30000 : 10000;
    net::SimTime endorse_until = params.chaos ? 520000 : 48000;
    std::mt19937_64 rng(params.workload_seed);
    for (int i = 1; i <= params.attendees; ++i) {
      for (int k = 0; k < params.endorsements_per_node; ++k) {
        net::SimTime t =
            endorse_from + static_cast<net::SimTime>(
                               rng() % static_cast<std::uint64_t>(
                                           endorse_until - endorse_from));
        int target = 1 + static_cast<int>(rng() % params.attendees);
        if (target == i) target = 1 + target % params.attendees;
        s.workload.push_back(op_add(t, "laptop" + two_digits(i),
                                    entities[target - 1], "ers:endorsement",
                                    "skill" + std::to_string(target % 5) +
                                        " by attendee" + two_digits(i)));
      }
    }
    std::stable_sort(s.workload.begin(), s.workload.end(),
                     [](const WorkloadOp& x, const WorkloadOp& y) {
                       return x.t < y.t;
                     });
  }

  if (params.chaos) {
    s.duration_ms = 660000;
    s.chaos.enabled = true;
    s.chaos.interval_ms = 10000;
    s.chaos.kill_prob = 0.3;
    s.chaos.min_down_ms = 5000;
    s.chaos.max_down_ms = 20000;
    s.chaos.start_ms = 15000;
    s.chaos.end_ms = 600000;
    for (const auto& spec : s.nodes) s.chaos.eligible.insert(spec.id);
    s.sample_interval_ms = 2000;
  } else {
    s.duration_ms = params.with_bridge ? 80000 : 10000;
    s.sample_interval_ms = 1000;
    s.link_census_at_ms = params.with_bridge ? 60000 : 8000;
  }

  AssertionSpec converged;
  converged.name = "every_node_reports_full_completion";
  converged.kind = AssertionSpec::Kind::AllCompletionEq;
  converged.expect = 1.0;
  s.assertions.push_back(converged);
  return s;
}

Scenario make_truck(const TruckParams& params) {
  Scenario s;
  s.name = "truck";
  s.seed = 2;
  s.networks.push_back("road");
  for (int k = 1; k <= params.villages; ++k)
    s.networks.push_back("village" + std::to_string(k));

  std::vector<std::string> shop_entities, price_entities;
  for (int k = 1; k <= params.villages; ++k) {
    std::string ks = std::to_string(k);
    NodeSpec shop;
    shop.id = "shop" + ks;
    shop.role = Role::Contributor;
    shop.hostname = "shop" + ks;
    shop.initial_network = "village" + ks;

    std::string shop_entity = "urn:ers:village" + ks + "/shop";
    std::string price_entity = "urn:ers:village" + ks + "/prices";
    shop_entities.push_back(shop_entity);
    price_entities.push_back(price_entity);

    shop.initial_statements.push_back(
        {Statement(EntityName(shop_entity), "rdf:type", "ers:Shop"), Scope::Public});
    shop.initial_statements.push_back(
        {Statement(EntityName(shop_entity), "shop:village", "village" + ks),
         Scope::Public});
    shop.initial_statements.push_back(
        {Statement(EntityName(price_entity), "price:salt", "salt-v1-shop" + ks),
         Scope::Public});
    shop.initial_statements.push_back(
        {Statement(EntityName(price_entity), "price:rice", "rice-v1-shop" + ks),
         Scope::Public});
    shop.initial_statements.push_back(
        {Statement(EntityName(price_entity), "price:oil", "oil-v1-shop" + ks),
         Scope::Public});
    shop.initial_statements.push_back(
        {Statement(EntityName("urn:ers:private/ledger" + ks), "ledger:balance",
                   "confidential-" + ks),
         Scope::Private});
    s.nodes.push_back(shop);
  }

  NodeSpec truck;
  truck.id = "truck";
  truck.role = Role::Bridge;
  truck.hostname = "truck";
  truck.initial_network = "road";
  s.nodes.push_back(truck);

  // Every vendor is interested in every other vendor's shop and prices.
  for (int k = 1; k <= params.villages; ++k) {
    for (int j = 1; j <= params.villages; ++j) {
      if (j == k) continue;
      s.nodes[k - 1].initial_cache.emplace_back(shop_entities[j - 1]);
      s.nodes[k - 1].initial_cache.emplace_back(price_entities[j - 1]);
    }
  }

  const net::SimTime leg = params.dwell_ms + params.travel_ms;
  const net::SimTime lap = params.villages * leg;
  const net::SimTime t0 = 2000;
  for (int l = 0; l < params.laps; ++l) {
    for (int k = 1; k <= params.villages; ++k) {
      net::SimTime join = t0 + l * lap + (k - 1) * leg;
      s.timeline.push_back({join, "truck", "village" + std::to_string(k)});
      s.timeline.push_back({join + params.dwell_ms, "truck", "road"});
    }
  }
  s.duration_ms = t0 + params.laps * lap + 2000;

  // Price revision before the final lap; it reaches the other villages only
  // through that lap's stops.
  net::SimTime revision_at = t0 + (params.laps - 1) * lap - 2000;
  s.workload.push_back(op_remove(revision_at, "shop1", price_entities[0],
                                 "price:salt", "salt-v1-shop1"));
  s.workload.push_back(op_add(revision_at + 100, "shop1", price_entities[0],
                              "price:salt", "salt-v2-shop1"));

  AssertionSpec converged;
  converged.name = "all_cross_village_price_lists_converged";
  converged.kind = AssertionSpec::Kind::AllCompletionEq;
  converged.expect = 1.0;
  s.assertions.push_back(converged);

  s.sample_interval_ms = 1000;
  return s;
}

Scenario make_competing_writers() {
  Scenario s;
  s.name = "competing-writers";
  s.seed = 3;
  s.duration_ms = 8000;
  s.networks = {"meshnet", "bridgenet"};

  auto contributor = [](const std::string& id, const std::string& network) {
    NodeSpec spec;
    spec.id = id;
    spec.role = Role::Contributor;
    spec.hostname = id;
    spec.initial_network = network;
    return spec;
  };
  s.nodes.push_back(contributor("mesh-a", "meshnet"));
  s.nodes.push_back(contributor("mesh-b", "meshnet"));
  s.nodes.push_back(contributor("mesh-c", "meshnet"));
  s.nodes.push_back(contributor("hub-a", "bridgenet"));
  s.nodes.push_back(contributor("hub-b", "bridgenet"));
  s.nodes.push_back(contributor("hub-c", "bridgenet"));
  NodeSpec bridge;
  bridge.id = "hub-bridge";
  bridge.role = Role::Bridge;
  bridge.hostname = "hub-bridge";
  bridge.initial_network = "bridgenet";
  s.nodes.push_back(bridge);

  const std::string thing = "urn:ers:goods/thing";
  const std::string thing2 = "urn:ers:goods/thing2";

  s.workload.push_back(op_add(300, "mesh-b", thing, "st:claim", "original"));
  s.workload.push_back(op_add(300, "hub-b", thing2, "st:claim", "original"));
  s.workload.push_back(op_cache(1500, "mesh-a", thing));
  s.workload.push_back(op_cache(1500, "hub-a", thing2));
  s.workload.push_back(op_add(3000, "mesh-c", thing, "st:claim", "competitor"));
  s.workload.push_back(op_add(3000, "hub-c", thing2, "st:claim", "competitor"));

  AssertionSpec doc_level;
  doc_level.name = "doc_level_cacher_keeps_single_document";
  doc_level.kind = AssertionSpec::Kind::CacheDocsAboutEq;
  doc_level.node = "mesh-a";
  doc_level.entity = thing;
  doc_level.count = 1;
  s.assertions.push_back(doc_level);

  AssertionSpec entity_level;
  entity_level.name = "entity_level_cacher_receives_both_documents";
  entity_level.kind = AssertionSpec::Kind::CacheDocsAboutEq;
  entity_level.node = "hub-a";
  entity_level.entity = thing2;
  entity_level.count = 2;
  s.assertions.push_back(entity_level);

  AssertionSpec untouched;
  untouched.name = "original_authors_document_untouched";
  untouched.kind = AssertionSpec::Kind::PublicPairPresent;
  untouched.node = "mesh-b";
  untouched.entity = thing;
  untouched.predicate = "st:claim";
  untouched.value = "original";
  s.assertions.push_back(untouched);

  s.sample_interval_ms = 1000;
  return s;
}

CompetingWriterOutcome competing_writer_check() {
  Runner runner(make_competing_writers());
  Report report = runner.run();
  CompetingWriterOutcome outcome;
  outcome.pass = report.all_assertions_pass();
  std::ostringstream detail;
  for (const auto& a : report.json.at("assertions"))
    detail << a.at("name").get<std::string>() << "="
           << (a.at("pass").get<bool>() ? "pass" : "fail") << " ";
  outcome.detail = detail.str();
  return outcome;
}

}  // namespace ers::harness
