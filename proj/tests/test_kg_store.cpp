#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "stem/kg_store.hpp"

using namespace stem;
using kg::KnowledgeGraph;
using kg::Triple;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "stemkg_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("from_records builds catalogs, dedups, indexes") {
  KnowledgeGraph g = KnowledgeGraph::from_records({
      {"A", "r1", "B"},
      {"B", "r2", "C"},
      {"A", "r1", "B"},  // duplicate collapses
  });
  CHECK(g.entity_count() == 3);
  CHECK(g.relation_count() == 2);
  CHECK(g.triples().size() == 2);

  Triple t{g.entity_id("A"), g.relation_id("r1"), g.entity_id("B")};
  CHECK(g.contains(t));
  CHECK_FALSE(g.contains(Triple{g.entity_id("A"), g.relation_id("r2"),
                                g.entity_id("C")}));
}

TEST_CASE("load accepts tsv and jsonl records, errors name the line") {
  auto path = temp_file("graph.tsv");
  {
    std::ofstream out(path);
    out << "A\tr1\tB\n";
    out << R"({"head":"B","relation":"r2","tail":"C"})" << "\n";
  }
  KnowledgeGraph g = KnowledgeGraph::load(path);
  CHECK(g.entity_count() == 3);
  CHECK(g.triples().size() == 2);

  auto bad = temp_file("bad.tsv");
  {
    std::ofstream out(bad);
    out << "A\tr1\tB\n";
    out << "only-two\tcolumns\n";
  }
  try {
    KnowledgeGraph::load(bad);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("empty file loads an empty graph") {
  auto path = temp_file("empty.tsv");
  std::ofstream(path).close();
  KnowledgeGraph g = KnowledgeGraph::load(path);
  CHECK(g.entity_count() == 0);
  CHECK(g.triples().empty());
}

TEST_CASE("rome airport record is indexed undirected") {
  KnowledgeGraph g = KnowledgeGraph::from_records(
      {{"Rome", "location.location.nearby_airports",
        "Ciampino–G. B. Pastine International Airport"}});
  auto edges = g.incident_edges(g.entity_id("Rome"));
  REQUIRE(edges.size() == 1);
  CHECK(g.record(edges[0])[2] ==
        "Ciampino–G. B. Pastine International Airport");
  // Same triple from the tail side.
  auto from_tail = g.incident_edges(
      g.entity_id("Ciampino–G. B. Pastine International Airport"));
  CHECK(from_tail == edges);
}

TEST_CASE("incident edges: isolated entity via undirected incidence") {
  KnowledgeGraph g =
      KnowledgeGraph::from_records({{"A", "r", "B"}, {"C", "r", "B"}});
  auto at_b = g.incident_edges(g.entity_id("B"));
  CHECK(at_b.size() == 2);
  CHECK_THROWS_AS((void)g.incident_edges(99), Error);
}

TEST_CASE("incident edges equal a brute-force scan on a random toy graph") {
  std::mt19937_64 rng(42);
  std::vector<kg::TripleRecord> records;
  for (int i = 0; i < 30; ++i) {
    records.push_back({"n" + std::to_string(rng() % 10),
                       "r" + std::to_string(rng() % 3),
                       "n" + std::to_string(rng() % 10)});
  }
  KnowledgeGraph g = KnowledgeGraph::from_records(records);
  for (size_t e = 0; e < g.entity_count(); ++e) {
    auto id = static_cast<kg::EntityId>(e);
    std::vector<Triple> expected;
    for (const Triple& t : g.triples()) {
      if (t.head == id || t.tail == id) expected.push_back(t);
    }
    std::sort(expected.begin(), expected.end(),
              [&g](const Triple& a, const Triple& b) {
                return g.label_less(a, b);
              });
    CHECK(g.incident_edges(id) == expected);
  }
}

TEST_CASE("adjacency invariants hold") {
  KnowledgeGraph g = KnowledgeGraph::from_records(
      {{"A", "r", "B"}, {"B", "r", "C"}, {"X", "s", "X"}});
  std::set<Triple, bool (*)(const Triple&, const Triple&)> seen(
      +[](const Triple& a, const Triple& b) {
        return std::tie(a.head, a.relation, a.tail) <
               std::tie(b.head, b.relation, b.tail);
      });
  for (size_t e = 0; e < g.entity_count(); ++e) {
    for (const Triple& t : g.incident_edges(static_cast<kg::EntityId>(e))) {
      CHECK(g.contains(t));
      seen.insert(t);
    }
  }
  CHECK(seen.size() == g.triples().size());
}

TEST_CASE("get_tail_entity endpoints and self-loop") {
  KnowledgeGraph g =
      KnowledgeGraph::from_records({{"A", "r", "B"}, {"A", "r", "A"}});
  kg::EntityId a = g.entity_id("A");
  kg::EntityId b = g.entity_id("B");
  Triple ab{a, g.relation_id("r"), b};
  CHECK(kg::get_tail_entity(ab, a) == b);
  CHECK(kg::get_tail_entity(ab, b) == a);
  Triple aa{a, g.relation_id("r"), a};
  CHECK(kg::get_tail_entity(aa, a) == a);
  CHECK_THROWS_AS((void)kg::get_tail_entity(ab, 77), Error);
}

TEST_CASE("build_graph projects triples into a fresh graph") {
  KnowledgeGraph g = KnowledgeGraph::from_records(
      {{"A", "r", "B"}, {"B", "r2", "C"}, {"C", "r", "D"}});
  CHECK(kg::build_graph(g, {}).entity_count() == 0);

  Triple ab{g.entity_id("A"), g.relation_id("r"), g.entity_id("B")};
  KnowledgeGraph sub = kg::build_graph(g, {ab, ab});
  CHECK(sub.triples().size() == 1);
  CHECK(sub.entity_count() == 2);
  CHECK(sub.entity_id("A") != kg::kNoEntity);
}

TEST_CASE("save/load round trip reproduces an equal graph") {
  KnowledgeGraph g = KnowledgeGraph::from_records(
      {{"Rome", "location.location.nearby_airports", "Fiumicino"},
       {"B", "r2", "C"},
       {"C", "r", "Rome"}});
  auto path = temp_file("roundtrip.jsonl");
  g.save(path);
  KnowledgeGraph loaded = KnowledgeGraph::load(path);
  CHECK(g.same_contents(loaded));
  CHECK(loaded.same_contents(g));
}

TEST_CASE("question file round trip validates entities and paths") {
  kg::QuestionInstance q;
  q.graph = KnowledgeGraph::from_records(
      {{"Rome", "r", "Airport A"}, {"Rome", "r", "Airport B"}});
  q.id = "q1";
  q.question = "which airport to fly into rome";
  q.question_entities = {q.graph.entity_id("Rome")};
  q.answers = {"Airport A", "Airport B"};
  q.ground_truth_path = {Triple{q.graph.entity_id("Rome"),
                                q.graph.relation_id("r"),
                                q.graph.entity_id("Airport A")}};
  auto path = temp_file("questions.jsonl");
  kg::save_questions(path, {q});
  auto loaded = kg::load_questions(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].id == "q1");
  CHECK(loaded[0].graph.same_contents(q.graph));
  CHECK(loaded[0].question_entities.size() == 1);
  CHECK(loaded[0].ground_truth_path.size() == 1);

  // Unknown question entity must be rejected.
  std::ofstream bad(temp_file("badq.jsonl"));
  bad << R"({"id":"x","question":"?","question_entities":["Nowhere"],)"
      << R"("answers":[],"triples":[["A","r","B"]]})" << "\n";
  bad.close();
  CHECK_THROWS_AS((void)kg::load_questions(temp_file("badq.jsonl")), Error);
}
