#include <doctest.h>

#include <cmath>
#include <vector>

#include "ers/netsim.hpp"

using namespace ers;
using namespace ers::net;

namespace {

wire::Message ping(const std::string& tag) {
  wire::Message msg;
  msg.kind = wire::Kind::ChangeNotify;
  msg.body["tag"] = tag;
  msg.seal();
  return msg;
}

struct TwoNodes {
  Simulation sim{1234};
  std::vector<wire::Message> a_inbox, b_inbox;

  TwoNodes() {
    sim.add_network("lan");
    sim.set_membership("a", "lan");
    sim.set_membership("b", "lan");
    sim.register_handler("a", [this](const wire::Message& m) { a_inbox.push_back(m); });
    sim.register_handler("b", [this](const wire::Message& m) { b_inbox.push_back(m); });
  }
};

}  // namespace

TEST_SUITE("netsim.clock") {
  TEST_CASE("advance on an empty queue fires nothing") {
    Simulation sim(1);
    CHECK(sim.advance_until(1000) == 0);
    CHECK(sim.now() == 1000);
    CHECK(sim.advance_until_idle() == 0);
  }

  TEST_CASE("same-timestamp events fire in enqueue order") {
    Simulation sim(1);
    std::vector<int> order;
    sim.schedule_at(10, [&]() { order.push_back(1); });
    sim.schedule_at(10, [&]() { order.push_back(2); });
    sim.schedule_at(5, [&]() { order.push_back(0); });
    sim.advance_until_idle();
    CHECK(order == std::vector<int>{0, 1, 2});
  }

  TEST_CASE("callbacks may enqueue new events") {
    Simulation sim(1);
    int fired = 0;
    sim.schedule_at(10, [&]() {
      ++fired;
      sim.schedule_after(5, [&]() { ++fired; });
    });
    CHECK(sim.advance_until(20) == 2);
    CHECK(fired == 2);
  }
}

TEST_SUITE("netsim.delivery") {
  TEST_CASE("latency delays delivery by exactly the configured time") {
    TwoNodes env;
    Impairment imp;
    imp.one_way_latency_ms = 100;
    env.sim.set_network_impairment("lan", imp);

    SimTime delivered_at = -1;
    env.sim.register_handler("b", [&](const wire::Message&) {
      delivered_at = env.sim.now();
    });
    env.sim.send("a", "b", ping("x"));
    env.sim.advance_until_idle();
    CHECK(delivered_at == 100);
  }

  TEST_CASE("loss probability one never delivers") {
    TwoNodes env;
    Impairment imp;
    imp.loss_prob = 1.0;
    env.sim.set_network_impairment("lan", imp);
    for (int i = 0; i < 50; ++i) env.sim.send("a", "b", ping("x"));
    env.sim.advance_until_idle();
    CHECK(env.b_inbox.empty());
    CHECK(env.sim.traffic().lost == 50);
  }

  TEST_CASE("different networks are unroutable") {
    Simulation sim(1);
    sim.add_network("n1");
    sim.add_network("n2");
    sim.set_membership("a", "n1");
    sim.set_membership("b", "n2");
    int received = 0;
    sim.register_handler("b", [&](const wire::Message&) { ++received; });
    sim.send("a", "b", ping("x"));
    sim.advance_until_idle();
    CHECK(received == 0);
    CHECK(sim.traffic().unroutable == 1);
  }

  TEST_CASE("going offline drops in-flight deliveries") {
    TwoNodes env;
    Impairment imp;
    imp.one_way_latency_ms = 50;
    env.sim.set_network_impairment("lan", imp);
    env.sim.send("a", "b", ping("x"));
    env.sim.advance_until(10);
    env.sim.set_membership("b", std::nullopt);
    env.sim.advance_until_idle();
    CHECK(env.b_inbox.empty());
    CHECK(env.sim.traffic().dropped_offline == 1);
  }

  TEST_CASE("corrupted messages arrive with a failing digest") {
    TwoNodes env;
    Impairment imp;
    imp.corruption_prob = 1.0;
    env.sim.set_network_impairment("lan", imp);
    env.sim.send("a", "b", ping("x"));
    env.sim.advance_until_idle();
    REQUIRE(env.b_inbox.size() == 1);
    CHECK_FALSE(env.b_inbox[0].digest_ok());
    CHECK(env.sim.traffic().corrupted == 1);
  }

  TEST_CASE("duplication count within three sigma over ten thousand sends") {
    TwoNodes env;
    Impairment imp;
    imp.duplication_prob = 0.6;
    env.sim.set_network_impairment("lan", imp);
    const std::uint64_t n = 10000;
    for (std::uint64_t i = 0; i < n; ++i)
      env.sim.send("a", "b", ping(std::to_string(i)));
    env.sim.advance_until_idle();

    double expected = n * 0.6;
    double sigma = std::sqrt(n * 0.6 * 0.4);
    double dup = static_cast<double>(env.sim.traffic().duplicated);
    CHECK(dup > expected - 3 * sigma);
    CHECK(dup < expected + 3 * sigma);
    CHECK(env.b_inbox.size() == n + env.sim.traffic().duplicated);
  }

  TEST_CASE("reordered message is delivered behind the next one") {
    TwoNodes env;
    Impairment imp;
    imp.one_way_latency_ms = 10;
    env.sim.set_network_impairment("lan", imp);
    Impairment reorder = imp;
    reorder.reorder_prob = 1.0;
    env.sim.set_pair_impairment("a", "b", reorder);
    env.sim.send("a", "b", ping("first"));
    env.sim.set_pair_impairment("a", "b", std::nullopt);
    env.sim.send("a", "b", ping("second"));
    env.sim.advance_until_idle();
    REQUIRE(env.b_inbox.size() == 2);
    CHECK(env.b_inbox[0].body["tag"] == "second");
    CHECK(env.b_inbox[1].body["tag"] == "first");
  }

  TEST_CASE("reordered message on a quiet link is released by the cap") {
    TwoNodes env;
    Impairment imp;
    imp.reorder_prob = 1.0;
    env.sim.set_network_impairment("lan", imp);
    env.sim.send("a", "b", ping("only"));
    env.sim.advance_until_idle();
    REQUIRE(env.b_inbox.size() == 1);
    CHECK(env.sim.now() >= 1000);
  }

  TEST_CASE("conservation: every send is dropped, discarded or delivered") {
    TwoNodes env;
    Impairment imp;
    imp.one_way_latency_ms = 5;
    imp.loss_prob = 0.2;
    imp.corruption_prob = 0.1;
    imp.duplication_prob = 0.3;
    imp.reorder_prob = 0.1;
    env.sim.set_network_impairment("lan", imp);
    const std::uint64_t n = 5000;
    for (std::uint64_t i = 0; i < n; ++i)
      env.sim.send("a", "b", ping(std::to_string(i)));
    env.sim.advance_until_idle();

    const auto& t = env.sim.traffic();
    CHECK(t.sent == n);
    CHECK(t.delivered + t.corrupted + t.dropped_offline ==
          n - t.lost - t.unroutable + t.duplicated);
    CHECK(env.sim.in_flight() == 0);
  }
}

TEST_SUITE("netsim.impairment") {
  TEST_CASE("probabilities outside [0,1] are rejected") {
    Impairment imp;
    imp.loss_prob = 1.5;
    CHECK_THROWS_AS(imp.validate(), std::invalid_argument);
    imp.loss_prob = 0.5;
    imp.one_way_latency_ms = -1;
    CHECK_THROWS_AS(imp.validate(), std::invalid_argument);
  }

  TEST_CASE("impairment changes take effect for subsequent sends only") {
    TwoNodes env;
    std::vector<SimTime> arrivals;
    env.sim.register_handler("b", [&](const wire::Message&) {
      arrivals.push_back(env.sim.now());
    });
    Impairment slow;
    slow.one_way_latency_ms = 100;
    env.sim.set_network_impairment("lan", slow);
    env.sim.send("a", "b", ping("in-flight"));
    env.sim.advance_until(10);
    env.sim.set_network_impairment("lan", Impairment{});
    env.sim.send("a", "b", ping("fast"));
    env.sim.advance_until_idle();
    REQUIRE(arrivals.size() == 2);
    CHECK(arrivals[0] == 10);   // the fast one, sent at t=10 with zero latency
    CHECK(arrivals[1] == 100);  // the in-flight one completes under old parameters
  }

  TEST_CASE("pair overrides beat network defaults") {
    TwoNodes env;
    Impairment network_imp;
    network_imp.one_way_latency_ms = 50;
    env.sim.set_network_impairment("lan", network_imp);
    Impairment pair_imp;
    pair_imp.one_way_latency_ms = 200;
    env.sim.set_pair_impairment("a", "b", pair_imp);
    CHECK(env.sim.effective_impairment("a", "b").one_way_latency_ms == 200);
    CHECK(env.sim.effective_impairment("b", "a").one_way_latency_ms == 50);
  }
}

TEST_SUITE("netsim.determinism") {
  TEST_CASE("identical seeds produce byte-identical traces") {
    auto run = [](std::uint64_t seed) {
      Simulation sim(seed);
      sim.add_network("lan");
      sim.set_membership("a", "lan");
      sim.set_membership("b", "lan");
      sim.register_handler("b", [](const wire::Message&) {});
      Impairment imp;
      imp.one_way_latency_ms = 7;
      imp.loss_prob = 0.3;
      imp.duplication_prob = 0.2;
      imp.corruption_prob = 0.1;
      sim.set_network_impairment("lan", imp);
      for (int i = 0; i < 500; ++i) sim.send("a", "b", ping(std::to_string(i)));
      sim.advance_until_idle();
      return sim.trace_text();
    };
    CHECK(run(9) == run(9));
    CHECK(run(9) != run(10));
  }

  TEST_CASE("per-link streams are independent") {
    // Draws on one link never perturb another link's stream.
    Simulation sim(77);
    auto& ab = sim.stream("link/a/b");
    double first_cd = sim.stream("link/c/d").uniform01();
    for (int i = 0; i < 100; ++i) ab.uniform01();
    Simulation sim2(77);
    CHECK(sim2.stream("link/c/d").uniform01() == first_cd);
  }
}
