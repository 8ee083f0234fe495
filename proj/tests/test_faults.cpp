#include <doctest.h>

#include "ers/builders.hpp"
#include "ers/faults.hpp"
#include "ers/runner.hpp"

using namespace ers;
using namespace ers::net;
using namespace ers::faults;

TEST_SUITE("faults.chaos") {
  TEST_CASE("kill probability zero never produces actions") {
    Simulation sim(1);
    ChaosPolicy policy;
    policy.enabled = true;
    policy.kill_prob = 0.0;
    policy.eligible = {"a", "b", "c"};
    auto& rng = sim.stream("chaos");
    for (int i = 0; i < 100; ++i)
      CHECK(chaos_tick(policy, {"a", "b", "c"}, i * 1000, rng).empty());
  }

  TEST_CASE("actions respect eligibility, liveness and the down-time range") {
    Simulation sim(7);
    ChaosPolicy policy;
    policy.enabled = true;
    policy.kill_prob = 0.5;
    policy.min_down_ms = 100;
    policy.max_down_ms = 300;
    policy.eligible = {"a", "b"};
    auto& rng = sim.stream("chaos");
    int kills = 0;
    for (int i = 0; i < 200; ++i) {
      for (const auto& action : chaos_tick(policy, {"a", "c"}, 1000, rng)) {
        CHECK(action.node == "a");  // b is dead, c is not eligible
        CHECK(action.restart_at - action.kill_at >= 100);
        CHECK(action.restart_at - action.kill_at <= 300);
        ++kills;
      }
    }
    CHECK(kills > 50);
    CHECK(kills < 150);
  }

  TEST_CASE("schedules replay identically under a fixed seed") {
    auto run = [](std::uint64_t seed) {
      Simulation sim(seed);
      ChaosPolicy policy;
      policy.enabled = true;
      policy.kill_prob = 0.4;
      policy.min_down_ms = 50;
      policy.max_down_ms = 500;
      policy.eligible = {"a", "b", "c", "d"};
      auto& rng = sim.stream("chaos");
      std::vector<ChaosAction> all;
      for (int i = 0; i < 50; ++i) {
        auto actions = chaos_tick(policy, {"a", "b", "c", "d"}, i * 1000, rng);
        all.insert(all.end(), actions.begin(), actions.end());
      }
      return all;
    };
    auto a = run(9), b = run(9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].node == b[i].node);
      CHECK(a[i].restart_at == b[i].restart_at);
    }
  }

  TEST_CASE("malformed policies are rejected") {
    ChaosPolicy policy;
    policy.enabled = true;
    policy.kill_prob = 1.5;
    CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
    policy.kill_prob = 0.5;
    policy.min_down_ms = 500;
    policy.max_down_ms = 100;
    CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  }
}

TEST_SUITE("faults.latency") {
  TEST_CASE("an empty schedule changes nothing") {
    Simulation sim(1);
    sim.add_network("lan");
    LatencyMonkey monkey(sim, {}, {}, {"lan"});
    monkey.start();
    sim.advance_until_idle();
    CHECK(sim.effective_impairment_for_network("lan") == Impairment{});
  }

  TEST_CASE("impairments apply only inside their window") {
    Simulation sim(1);
    sim.add_network("lan");
    LatencyPolicy policy;
    Impairment slow;
    slow.one_way_latency_ms = 100;
    policy.schedule.push_back({1000, 2000, {}, slow});
    LatencyMonkey monkey(sim, policy, {}, {"lan"});
    monkey.start();

    sim.advance_until(500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 0);
    sim.advance_until(1500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 100);
    sim.advance_until(2500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 0);
  }

  TEST_CASE("overlapping windows resolve to the later entry") {
    Simulation sim(1);
    sim.add_network("lan");
    LatencyPolicy policy;
    Impairment a, b;
    a.one_way_latency_ms = 50;
    b.one_way_latency_ms = 200;
    policy.schedule.push_back({0, 3000, {}, a});
    policy.schedule.push_back({1000, 2000, {}, b});
    LatencyMonkey monkey(sim, policy, {}, {"lan"});
    monkey.start();

    sim.advance_until(500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 50);
    sim.advance_until(1500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 200);
    sim.advance_until(2500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 50);
    sim.advance_until(3500);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 0);
  }

  TEST_CASE("window boundaries restore the scenario baseline") {
    Simulation sim(1);
    sim.add_network("lan");
    Impairment baseline;
    baseline.one_way_latency_ms = 10;
    sim.set_network_impairment("lan", baseline);
    LatencyPolicy policy;
    Impairment burst;
    burst.one_way_latency_ms = 500;
    policy.schedule.push_back({100, 200, {}, burst});
    LatencyMonkey monkey(sim, policy, {{"lan", baseline}}, {"lan"});
    monkey.start();

    sim.advance_until(150);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 500);
    sim.advance_until(300);
    CHECK(sim.effective_impairment_for_network("lan").one_way_latency_ms == 10);
  }
}

TEST_SUITE("faults.kill_restart") {
  TEST_CASE("a killed node keeps its store and converges after restart") {
    // Two contributors and a bridge; one contributor dies mid-run, comes
    // back, and the system still reaches full completion.
    harness::Scenario s;
    s.name = "kill-restart";
    s.seed = 77;
    s.duration_ms = 60000;
    s.networks = {"lan"};
    for (const char* id : {"alpha", "beta"}) {
      harness::NodeSpec spec;
      spec.id = id;
      spec.role = Role::Contributor;
      spec.hostname = id;
      spec.initial_network = "lan";
      s.nodes.push_back(spec);
    }
    harness::NodeSpec bridge;
    bridge.id = "zbridge";
    bridge.role = Role::Bridge;
    bridge.hostname = "zbridge";
    bridge.initial_network = "lan";
    s.nodes.push_back(bridge);

    s.nodes[0].initial_statements.push_back(
        {Statement(EntityName("urn:e/a"), "p", "v1"), Scope::Public});
    s.nodes[1].initial_cache.push_back(EntityName("urn:e/a"));

    harness::WorkloadOp update;
    update.t = 20000;
    update.node = "alpha";
    update.kind = harness::WorkloadOp::Kind::AddStatement;
    update.entity = "urn:e/a";
    update.predicate = "p";
    update.value = "v2";
    s.workload.push_back(update);

    harness::AssertionSpec converged;
    converged.name = "converged";
    converged.kind = harness::AssertionSpec::Kind::AllCompletionEq;
    s.assertions.push_back(converged);

    harness::Runner runner(s);
    auto& sim = runner.sim();

    nlohmann::json store_at_kill;
    sim.schedule_at(10000, [&]() {
      store_at_kill = runner.node("beta")->store().snapshot();
      runner.kill_node("beta");
    });
    sim.schedule_at(30000, [&]() { runner.restart_node("beta"); });

    auto report = runner.run();
    CHECK(report.all_assertions_pass());
    CHECK(runner.node_alive("beta"));

    // The write made while beta was down arrived after the restart.
    auto cached = runner.node("beta")->store().get(Scope::Cache, "alpha|urn:e/a");
    REQUIRE(cached);
    CHECK(cached->has_pair("p", "v2"));
  }

  TEST_CASE("kill preserves the store bit for bit") {
    harness::Scenario s;
    s.name = "kill-preserve";
    s.seed = 3;
    s.duration_ms = 10000;
    s.networks = {"lan"};
    harness::NodeSpec spec;
    spec.id = "solo";
    spec.role = Role::Contributor;
    spec.hostname = "solo";
    spec.initial_network = "lan";
    spec.initial_statements.push_back(
        {Statement(EntityName("urn:e/x"), "p", "v"), Scope::Public});
    spec.initial_statements.push_back(
        {Statement(EntityName("urn:e/x"), "s", "secret"), Scope::Private});
    s.nodes.push_back(spec);

    harness::Runner runner(s);
    auto& sim = runner.sim();
    nlohmann::json before, after;
    sim.schedule_at(2000, [&]() {
      before = runner.node("solo")->store().snapshot();
      runner.kill_node("solo");
    });
    sim.schedule_at(5000, [&]() {
      runner.restart_node("solo");
      after = runner.node("solo")->store().snapshot();
    });
    runner.run();
    CHECK(before.dump() == after.dump());
  }
}
