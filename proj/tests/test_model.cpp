#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "ers/model.hpp"

using namespace ers;

namespace {

// Small alphabet rich in separator/escape characters, for id-escaping
// torture tests.
std::string random_name(std::mt19937_64& rng, int max_len = 4) {
  static const char alphabet[] = {'a', 'b', '|', '\\', 'g'};
  int len = 1 + static_cast<int>(rng() % max_len);
  std::string out;
  for (int i = 0; i < len; ++i) out.push_back(alphabet[rng() % 5]);
  return out;
}

EntityDocument doc_for(const std::string& graph, const std::string& entity) {
  EntityDocument doc;
  doc.graph = GraphId(graph);
  doc.entity = EntityName(entity);
  doc.doc_id = make_doc_id(doc.graph, doc.entity);
  return doc;
}

}  // namespace

TEST_SUITE("model.doc_id") {
  TEST_CASE("canonical concatenation with separator") {
    CHECK(make_doc_id(GraphId("g1"), EntityName("e1")) == "g1|e1");
  }

  TEST_CASE("deterministic") {
    CHECK(make_doc_id(GraphId("g1"), EntityName("e1")) ==
          make_doc_id(GraphId("g1"), EntityName("e1")));
  }

  TEST_CASE("escaping keeps distinct pairs distinct") {
    // The motivating collision candidate.
    CHECK(make_doc_id(GraphId("g1"), EntityName("a|b")) !=
          make_doc_id(GraphId("g1|a"), EntityName("b")));

    // Brute force over a corpus of names full of separators and escapes.
    std::mt19937_64 rng(12345);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 400; ++i)
      pairs.emplace_back(random_name(rng), random_name(rng));
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::map<std::string, std::pair<std::string, std::string>> seen;
    for (const auto& [g, e] : pairs) {
      std::string id = make_doc_id(GraphId(g), EntityName(e));
      auto [it, inserted] = seen.emplace(id, std::make_pair(g, e));
      if (!inserted) CHECK(it->second == std::make_pair(g, e));
    }
    CHECK(seen.size() == pairs.size());
  }

  TEST_CASE("split inverts make") {
    std::mt19937_64 rng(777);
    for (int i = 0; i < 300; ++i) {
      GraphId g(random_name(rng));
      EntityName e(random_name(rng));
      auto [g2, e2] = split_doc_id(make_doc_id(g, e));
      CHECK(g2 == g);
      CHECK(e2 == e);
    }
    CHECK_THROWS_AS(split_doc_id("no-separator"), ValidationError);
    CHECK_THROWS_AS(split_doc_id("a|b|c"), ValidationError);
  }
}

TEST_SUITE("model.values") {
  TEST_CASE("entity name invariants") {
    CHECK_THROWS_AS(EntityName(""), ValidationError);
    CHECK_THROWS_AS(EntityName("has\nnewline"), ValidationError);
    CHECK_THROWS_AS(EntityName("has\ttab"), ValidationError);
    CHECK_NOTHROW(EntityName("urn:ers:people/alice"));
    CHECK_NOTHROW(EntityName("plain space ok"));
  }

  TEST_CASE("statement invariants") {
    CHECK_THROWS_AS(Statement(EntityName("e"), "", "v"), ValidationError);
    CHECK_THROWS_AS(Statement(EntityName("e"), "rev", "v"), ValidationError);
    CHECK_THROWS_AS(Statement(EntityName("e"), "_id", "v"), ValidationError);
    CHECK_NOTHROW(Statement(EntityName("e"), "rdf:type", "v"));
  }

  TEST_CASE("revision rendering round-trips") {
    Revision rev{3, "abc123"};
    CHECK(rev.to_string() == "3-abc123");
    CHECK(Revision::parse("3-abc123") == rev);
    CHECK_THROWS_AS(Revision::parse("nodash"), ValidationError);
  }

  TEST_CASE("revision order is total, antisymmetric, transitive") {
    std::vector<Revision> revs;
    for (std::uint64_t g : {1u, 2u, 3u})
      for (const char* d : {"0a", "0b", "ff"}) revs.push_back({g, d});

    for (const auto& x : revs)
      for (const auto& y : revs) {
        if (x < y) CHECK_FALSE(y < x);
        if (x < y || x == y) CHECK(x <= y);
        bool expected = x.generation < y.generation ||
                        (x.generation == y.generation && x.digest < y.digest);
        CHECK((x < y) == expected);
        for (const auto& z : revs)
          if (x < y && y < z) CHECK(x < z);
      }
  }
}

TEST_SUITE("model.apply_statement") {
  TEST_CASE("add to empty document") {
    auto doc = doc_for("g", "e");
    auto out = apply_statement(doc, Statement(EntityName("e"), "p", "v"),
                               ApplyMode::Add);
    CHECK(out.properties.at("p") == std::vector<std::string>{"v"});
  }

  TEST_CASE("add twice is idempotent") {
    auto doc = doc_for("g", "e");
    Statement st(EntityName("e"), "p", "v");
    auto out = apply_statement(apply_statement(doc, st, ApplyMode::Add), st,
                               ApplyMode::Add);
    CHECK(out.properties.at("p") == std::vector<std::string>{"v"});
  }

  TEST_CASE("remove twice leaves document unchanged, no error") {
    auto doc = doc_for("g", "e");
    Statement st(EntityName("e"), "p", "v");
    auto once = apply_statement(apply_statement(doc, st, ApplyMode::Add), st,
                                ApplyMode::Remove);
    auto twice = apply_statement(once, st, ApplyMode::Remove);
    CHECK(once == twice);
    CHECK(once.properties.empty());
  }

  TEST_CASE("errors") {
    auto doc = doc_for("g", "e");
    CHECK_THROWS_AS(apply_statement(doc, Statement(EntityName("f"), "p", "v"),
                                    ApplyMode::Add),
                    EntityMismatchError);
    doc.deleted = true;
    CHECK_THROWS_AS(apply_statement(doc, Statement(EntityName("e"), "p", "v"),
                                    ApplyMode::Add),
                    TombstoneWriteError);
  }

  TEST_CASE("random sequences match a reference set") {
    std::mt19937_64 rng(99);
    auto doc = doc_for("g", "e");
    std::set<std::pair<std::string, std::string>> reference;
    for (int i = 0; i < 500; ++i) {
      std::string p = "p" + std::to_string(rng() % 4);
      std::string v = "v" + std::to_string(rng() % 6);
      bool add = rng() % 2 == 0;
      doc = apply_statement(doc, Statement(EntityName("e"), p, v),
                            add ? ApplyMode::Add : ApplyMode::Remove);
      if (add)
        reference.emplace(p, v);
      else
        reference.erase({p, v});

      std::set<std::pair<std::string, std::string>> actual;
      for (const auto& [pred, values] : doc.properties)
        for (const auto& value : values) actual.emplace(pred, value);
      REQUIRE(actual == reference);
    }
  }
}

TEST_SUITE("model.merge_statements") {
  TEST_CASE("empty list yields empty set") {
    CHECK(merge_statements({}).empty());
  }

  TEST_CASE("single document") {
    auto doc = apply_statement(doc_for("g", "e"),
                               Statement(EntityName("e"), "p", "v"), ApplyMode::Add);
    std::vector<EntityDocument> docs{doc};
    auto merged = merge_statements(docs);
    CHECK(merged == std::set<Statement>{Statement(EntityName("e"), "p", "v")});
  }

  TEST_CASE("union across graphs") {
    auto d1 = apply_statement(doc_for("g1", "e"),
                              Statement(EntityName("e"), "p", "a"), ApplyMode::Add);
    auto d2 = apply_statement(doc_for("g2", "e"),
                              Statement(EntityName("e"), "p", "a"), ApplyMode::Add);
    d2 = apply_statement(d2, Statement(EntityName("e"), "q", "b"), ApplyMode::Add);
    std::vector<EntityDocument> docs{d1, d2};
    auto merged = merge_statements(docs);
    std::set<Statement> want{Statement(EntityName("e"), "p", "a"),
                             Statement(EntityName("e"), "q", "b")};
    CHECK(merged == want);
  }

  TEST_CASE("mixed entities rejected, tombstones contribute nothing") {
    std::vector<EntityDocument> mixed{doc_for("g1", "e1"), doc_for("g2", "e2")};
    CHECK_THROWS_AS(merge_statements(mixed), EntityMismatchError);

    EntityDocument tomb = doc_for("g3", "e1");
    tomb.deleted = true;
    std::vector<EntityDocument> with_tomb{doc_for("g1", "e1"), tomb};
    CHECK(merge_statements(with_tomb).empty());
  }

  TEST_CASE("commutative, associative, idempotent over document lists") {
    std::mt19937_64 rng(4242);
    for (int round = 0; round < 50; ++round) {
      std::vector<EntityDocument> docs;
      int n = 1 + static_cast<int>(rng() % 5);
      for (int i = 0; i < n; ++i) {
        auto doc = doc_for("g" + std::to_string(i), "e");
        int stmts = static_cast<int>(rng() % 4);
        for (int k = 0; k < stmts; ++k)
          doc = apply_statement(doc,
                                Statement(EntityName("e"),
                                          "p" + std::to_string(rng() % 3),
                                          "v" + std::to_string(rng() % 3)),
                                ApplyMode::Add);
        docs.push_back(doc);
      }

      // Brute-force union oracle.
      std::set<Statement> oracle;
      for (const auto& doc : docs)
        for (const auto& [p, vs] : doc.properties)
          for (const auto& v : vs) oracle.insert(Statement(EntityName("e"), p, v));
      REQUIRE(merge_statements(docs) == oracle);

      auto shuffled = docs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(merge_statements(shuffled) == oracle);

      auto doubled = docs;
      doubled.insert(doubled.end(), docs.begin(), docs.end());
      CHECK(merge_statements(doubled) == oracle);
    }
  }
}

TEST_SUITE("model.digest") {
  TEST_CASE("identical bodies and parents yield identical digests") {
    auto d1 = apply_statement(doc_for("g", "e"),
                              Statement(EntityName("e"), "p", "v"), ApplyMode::Add);
    auto d2 = apply_statement(doc_for("g", "e"),
                              Statement(EntityName("e"), "p", "v"), ApplyMode::Add);
    CHECK(compute_digest(d1, std::nullopt) == compute_digest(d2, std::nullopt));
    Revision parent{1, "aa"};
    CHECK(compute_digest(d1, parent) == compute_digest(d2, parent));
    CHECK(compute_digest(d1, parent) != compute_digest(d1, std::nullopt));
  }

  TEST_CASE("collision scan over random perturbations") {
    std::unordered_set<std::string> digests;
    for (int i = 0; i < 100000; ++i) {
      auto doc = doc_for("g", "e");
      doc.properties["p"] = {"v" + std::to_string(i)};
      digests.insert(compute_digest(doc, std::nullopt));
    }
    CHECK(digests.size() == 100000);
  }

  TEST_CASE("property insertion order does not matter") {
    auto a = doc_for("g", "e");
    a = apply_statement(a, Statement(EntityName("e"), "p1", "v1"), ApplyMode::Add);
    a = apply_statement(a, Statement(EntityName("e"), "p2", "v2"), ApplyMode::Add);
    auto b = doc_for("g", "e");
    b = apply_statement(b, Statement(EntityName("e"), "p2", "v2"), ApplyMode::Add);
    b = apply_statement(b, Statement(EntityName("e"), "p1", "v1"), ApplyMode::Add);
    CHECK(compute_digest(a, std::nullopt) == compute_digest(b, std::nullopt));
  }
}

TEST_SUITE("model.serialization") {
  TEST_CASE("canonical json round-trips") {
    auto doc = doc_for("g1", "urn:ers:demo/e1");
    doc = apply_statement(doc, Statement(doc.entity, "p", "v1"), ApplyMode::Add);
    doc = apply_statement(doc, Statement(doc.entity, "p", "v2"), ApplyMode::Add);
    doc.revision = Revision{2, "cafe"};

    auto parsed = document_from_json(canonical_json(doc));
    CHECK(parsed == doc);
    CHECK(canonical_serialize(parsed) == canonical_serialize(doc));
  }

  TEST_CASE("keys are sorted in the canonical dump") {
    auto doc = doc_for("g", "e");
    doc.properties["zeta"] = {"1"};
    doc.properties["alpha"] = {"2"};
    doc.revision = Revision{1, "00"};
    std::string dump = canonical_serialize(doc);
    CHECK(dump.find("alpha") < dump.find("zeta"));
    CHECK(dump.find("_id") < dump.find("alpha"));
  }

  TEST_CASE("tombstone with properties is rejected") {
    nlohmann::json j;
    j["_id"] = "g|e";
    j["entity"] = "e";
    j["graph"] = "g";
    j["deleted"] = true;
    j["rev"] = "2-aa";
    j["p"] = std::vector<std::string>{"v"};
    CHECK_THROWS_AS(document_from_json(j), ValidationError);
  }
}
