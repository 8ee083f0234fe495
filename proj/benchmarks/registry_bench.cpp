#include <benchmark/benchmark.h>

#include "ers/netsim.hpp"
#include "ers/registry.hpp"
#include "ers/store.hpp"

using namespace ers;

static void BM_EntityCreate(benchmark::State& state) {
  net::Simulation sim(1);
  TriStore store{GraphId("bench")};
  Registry registry(sim, "bench", store, 2000);
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto status = registry.create_entity(
        EntityName("urn:ers:bench/e" + std::to_string(i++)), Scope::Public);
    benchmark::DoNotOptimize(status);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EntityCreate);

static void BM_StatementAdd(benchmark::State& state) {
  net::Simulation sim(1);
  TriStore store{GraphId("bench")};
  Registry registry(sim, "bench", store, 2000);
  EntityName entity("urn:ers:bench/subject");
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto status = registry.add_statement(
        Statement(entity, "bench:p", "v" + std::to_string(i++)), Scope::Public);
    benchmark::DoNotOptimize(status);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StatementAdd);

static void BM_CanonicalDigest(benchmark::State& state) {
  EntityDocument doc;
  doc.graph = GraphId("bench");
  doc.entity = EntityName("urn:ers:bench/subject");
  doc.doc_id = make_doc_id(doc.graph, doc.entity);
  for (int i = 0; i < 8; ++i)
    doc.properties["p" + std::to_string(i)] = {"value-" + std::to_string(i)};
  for (auto _ : state) {
    auto digest = compute_digest(doc, std::nullopt);
    benchmark::DoNotOptimize(digest);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CanonicalDigest);

static void BM_CacheForcePut(benchmark::State& state) {
  TriStore store{GraphId("bench")};
  std::uint64_t i = 0;
  for (auto _ : state) {
    EntityDocument doc;
    doc.graph = GraphId("peer");
    doc.entity = EntityName("urn:ers:bench/e" + std::to_string(i % 1024));
    doc.doc_id = make_doc_id(doc.graph, doc.entity);
    doc.properties["p"] = {"v" + std::to_string(i)};
    doc.revision = Revision{1 + i / 1024, "d" + std::to_string(i)};
    ++i;
    benchmark::DoNotOptimize(store.force_put(Scope::Cache, doc));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CacheForcePut);

static void BM_ChangesScan(benchmark::State& state) {
  TriStore store{GraphId("bench")};
  for (int i = 0; i < 2000; ++i) {
    EntityDocument doc;
    doc.graph = GraphId("bench");
    doc.entity = EntityName("urn:ers:bench/e" + std::to_string(i));
    doc.doc_id = make_doc_id(doc.graph, doc.entity);
    store.put(Scope::Public, doc, std::nullopt);
  }
  for (auto _ : state) {
    auto batch = store.changes_since(Scope::Public, 0, 100);
    benchmark::DoNotOptimize(batch);
  }
}
BENCHMARK(BM_ChangesScan);

BENCHMARK_MAIN();
