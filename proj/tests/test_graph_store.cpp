#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "kgfuse/errors.hpp"
#include "kgfuse/graph_store.hpp"

using namespace kgfuse;
using namespace kgfuse::graph;
namespace fs = std::filesystem;

namespace {

IsolationScope scope_a{"t", "runA", "ds", ""};
IsolationScope scope_b{"t", "runB", "ds", ""};

Entity make_entity(const std::string& name, const IsolationScope& scope = scope_a,
                   double confidence = 1.0) {
  Entity e;
  e.name = name;
  e.entity_type = "Concept";
  e.confidence = confidence;
  e.scope = scope;
  return e;
}

Relation make_relation(const std::string& head, const std::string& tail,
                       const std::string& type = "RELATED_TO") {
  Relation r;
  r.head_id = head;
  r.tail_id = tail;
  r.relation_type = type;
  r.scope = scope_a;
  return r;
}

// Brute-force all-pairs shortest path over the live undirected graph.
std::map<std::string, size_t> bfs_oracle(const std::vector<std::pair<std::string, std::string>>& edges,
                                         const std::set<std::string>& seeds, size_t h) {
  std::map<std::string, size_t> dist;
  for (const auto& seed : seeds) dist[seed] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : edges) {
      for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
        auto it = dist.find(from);
        if (it == dist.end()) continue;
        size_t candidate = it->second + 1;
        auto jt = dist.find(to);
        if (jt == dist.end() || candidate < jt->second) {
          dist[to] = candidate;
          changed = true;
        }
      }
    }
  }
  std::map<std::string, size_t> within;
  for (auto& [id, d] : dist) {
    if (d >= 1 && d <= h) within[id] = d;
  }
  return within;
}

}  // namespace

TEST_SUITE_BEGIN("graph_store");

TEST_CASE("upsert preserves ids and replaces attributes") {
  GraphStore store;
  Entity cnn = make_entity("CNN");
  cnn.description = "first";
  std::string id = store.upsert_entity(cnn);
  CHECK(id == "e0000");

  Entity updated = *store.get_entity(id);
  updated.description = "second";
  CHECK(store.upsert_entity(updated) == id);
  CHECK(store.entities(scope_a).size() == 1);
  CHECK(store.get_entity(id)->description == "second");
}

TEST_CASE("relations require resolvable endpoints") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  CHECK_THROWS_WITH_AS(store.upsert_relation(make_relation(a, "missing")),
                       doctest::Contains("DanglingEndpoint"), Error);
  std::string b = store.upsert_entity(make_entity("B"));
  CHECK(store.upsert_relation(make_relation(a, b)) == "r0000");
}

TEST_CASE("hypernode upsert creates evidence bridges") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  store.ensure_chunk_node("doc#c0000", "doc", 0, scope_a);

  HyperNode h;
  h.member_ids = {a, b};
  h.chunk_refs = {"doc#c0000"};
  h.scope = scope_a;
  std::string hid = store.upsert_hypernode(h);

  CHECK(store.get_hypernode(hid)->member_ids.size() == 2);
  auto bridges = store.bridges_from(hid, BridgeType::HasEvidence);
  REQUIRE(bridges.size() == 1);
  CHECK(bridges[0]->to_id == "doc#c0000");

  // idempotent: repeated upsert adds no duplicate bridge
  store.upsert_hypernode(*store.get_hypernode(hid));
  CHECK(store.bridges_from(hid, BridgeType::HasEvidence).size() == 1);
}

TEST_CASE("find matches aliases exactly and case-insensitively") {
  GraphStore store;
  Entity cnn = make_entity("CNN");
  cnn.aliases = {"Convolutional Neural Network"};
  std::string id = store.upsert_entity(cnn);

  auto by_alias = store.find("convolutional neural network", SearchType::Entity, 5, scope_a);
  REQUIRE(by_alias.size() == 1);
  CHECK(by_alias[0].id == id);

  auto fuzzy = store.find("neural", SearchType::Fuzzy, 5, scope_a);
  REQUIRE(fuzzy.size() == 1);
  CHECK(fuzzy[0].id == id);

  store.upsert_entity(make_entity("graph store"));
  CHECK(store.find("neural", SearchType::Fuzzy, 5, scope_a).size() == 1);
  CHECK(store.find("nothing matches this", SearchType::Entity, 5, scope_a).empty());
}

TEST_CASE("find orders by confidence desc then id asc, bounded by limit") {
  GraphStore store;
  store.upsert_entity(make_entity("apple pie", scope_a, 0.4));
  store.upsert_entity(make_entity("apple tart", scope_a, 0.9));
  store.upsert_entity(make_entity("apple cake", scope_a, 0.9));
  auto hits = store.find("apple", SearchType::Fuzzy, 2, scope_a);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].confidence == 0.9);
  CHECK(hits[0].id < hits[1].id);
}

TEST_CASE("relation search matches relation_type") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  store.upsert_relation(make_relation(a, b, "WORKS_AT"));
  auto hits = store.find("works_at", SearchType::Relation, 5, scope_a);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].label == "WORKS_AT");
}

TEST_CASE("bfs on a path graph returns the h-hop ball") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  std::string c = store.upsert_entity(make_entity("C"));
  store.upsert_relation(make_relation(a, b));
  store.upsert_relation(make_relation(b, c));

  CHECK(store.neighbors_bfs({a}, 1, scope_a) == std::set<std::string>{b});
  CHECK(store.neighbors_bfs({a}, 2, scope_a) == std::set<std::string>{b, c});

  std::string lone = store.upsert_entity(make_entity("isolated"));
  CHECK(store.neighbors_bfs({lone}, 2, scope_a).empty());
  CHECK_THROWS_WITH_AS(store.neighbors_bfs({"ghost"}, 1, scope_a),
                       doctest::Contains("UnknownSeed"), Error);
}

TEST_CASE("bfs ignores edge direction") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  store.upsert_relation(make_relation(b, a));  // edge points into A
  CHECK(store.neighbors_bfs({a}, 1, scope_a) == std::set<std::string>{b});
}

TEST_CASE("bfs agrees with a brute-force shortest-path oracle on random graphs") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    GraphStore store;
    std::uniform_int_distribution<int> n_dist(2, 50);
    int n = n_dist(rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(store.upsert_entity(make_entity("N" + std::to_string(i))));

    std::vector<std::pair<std::string, std::string>> edges;
    std::uniform_int_distribution<int> m_dist(1, 2 * n);
    std::uniform_int_distribution<int> node_dist(0, n - 1);
    int m = m_dist(rng);
    for (int i = 0; i < m; ++i) {
      int u = node_dist(rng), v = node_dist(rng);
      if (u == v) continue;
      store.upsert_relation(make_relation(ids[u], ids[v]));
      edges.push_back({ids[u], ids[v]});
    }

    std::set<std::string> seeds{ids[node_dist(rng)]};
    for (size_t h : {size_t{1}, size_t{2}, size_t{3}}) {
      auto expected = bfs_oracle(edges, seeds, h);
      std::set<std::string> expected_ids;
      for (auto& [id, d] : expected) expected_ids.insert(id);
      CHECK(store.neighbors_bfs(seeds, h, scope_a) == expected_ids);
    }
  }
}

TEST_CASE("soft delete hides relations from find and bfs but keeps the record") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  std::string r = store.upsert_relation(make_relation(a, b, "LINKS"));

  CHECK(store.soft_delete_relation(r, "test") == DeleteStatus::Deleted);
  CHECK(store.find("links", SearchType::Relation, 5, scope_a).empty());
  CHECK(store.neighbors_bfs({a}, 2, scope_a).empty());
  REQUIRE(store.get_relation(r) != nullptr);
  CHECK(store.get_relation(r)->deleted);
  CHECK(store.soft_delete_relation(r, "again") == DeleteStatus::AlreadyDeleted);
  CHECK_THROWS_WITH_AS(store.soft_delete_relation("r9999", "x"), doctest::Contains("NotFound"),
                       Error);
}

TEST_CASE("hard delete cascades soft deletion to incident relations") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  std::string c = store.upsert_entity(make_entity("C"));
  std::string r1 = store.upsert_relation(make_relation(a, b));
  std::string r2 = store.upsert_relation(make_relation(c, a));

  store.hard_delete_entity(a, "cleanup");
  CHECK(store.get_entity(a) == nullptr);
  CHECK(store.get_relation(r1)->deleted);
  CHECK(store.get_relation(r2)->deleted);

  // referential integrity: no live relation references a missing entity
  for (const Relation* rel : store.relations(scope_a)) {
    CHECK(store.get_entity(rel->head_id) != nullptr);
    CHECK(store.get_entity(rel->tail_id) != nullptr);
  }
}

TEST_CASE("scope isolation holds for find and bfs") {
  GraphStore store;
  std::string a1 = store.upsert_entity(make_entity("shared name", scope_a));
  std::string b1 = store.upsert_entity(make_entity("shared name", scope_b));

  auto hits = store.find("shared name", SearchType::Entity, 10, scope_a);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == a1);

  CHECK_THROWS_AS(store.neighbors_bfs({b1}, 1, scope_a), Error);  // wrong-scope seed
}

TEST_CASE("find is deterministic across repeated calls") {
  GraphStore store;
  for (int i = 0; i < 10; ++i) store.upsert_entity(make_entity("item " + std::to_string(i)));
  auto first = store.find("item", SearchType::Fuzzy, 10, scope_a);
  for (int rep = 0; rep < 5; ++rep) {
    auto again = store.find("item", SearchType::Fuzzy, 10, scope_a);
    REQUIRE(again.size() == first.size());
    for (size_t i = 0; i < first.size(); ++i) CHECK(again[i].id == first[i].id);
  }
}

TEST_CASE("snapshot round-trips and re-saves byte-identically") {
  GraphStore store;
  std::string a = store.upsert_entity(make_entity("A"));
  std::string b = store.upsert_entity(make_entity("B"));
  store.upsert_relation(make_relation(a, b, "LINKS"));
  store.ensure_doc_node("doc", "Title", scope_a);
  store.ensure_chunk_node("doc#c0000", "doc", 0, scope_a);
  HyperNode h;
  h.member_ids = {a};
  h.chunk_refs = {"doc#c0000"};
  h.scope = scope_a;
  store.upsert_hypernode(h);

  fs::path dir = fs::temp_directory_path() / "kgfuse_graph_snap";
  fs::create_directories(dir);
  store.save(dir / "g1.jsonl");
  GraphStore loaded;
  loaded.load(dir / "g1.jsonl");
  loaded.save(dir / "g2.jsonl");

  std::ifstream f1(dir / "g1.jsonl"), f2(dir / "g2.jsonl");
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(loaded.get_entity(a)->name == "A");
  CHECK(loaded.object_count(scope_a) == store.object_count(scope_a));

  // id counters survive: new ids continue after the loaded ones
  CHECK(loaded.upsert_entity(make_entity("C")) == "e0002");
}

TEST_SUITE_END();
