#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stem/tracer.hpp"

using namespace stem;
using namespace stem::tracer;
using projection::SchemaGraph;
using projection::SchemaTriple;
using projection::Strategy;

namespace {

struct Fixture {
  kg::KnowledgeGraph g;
  embedding::HashedNgramEncoder enc{256, 0x5eed};
  gnn::GuidanceGraph guidance;
  BiasConfig cfg;

  explicit Fixture(std::vector<kg::TripleRecord> records)
      : g(kg::KnowledgeGraph::from_records(records)) {
    guidance = gnn::uniform_guidance(g);
    cfg.threshold = 0.2;
  }

  embedding::EntityIndex index() { return embedding::build_entity_index(g, enc); }
};

gnn::GuidanceGraph guidance_over(const kg::KnowledgeGraph& g,
                                 const std::vector<std::string>& entities) {
  std::vector<double> probs(g.entity_count(), 0.1);
  for (const auto& label : entities) {
    probs[static_cast<size_t>(g.require_entity(label))] = 0.9;
  }
  return gnn::select_guidance(g, probs, std::max<size_t>(1, entities.size() / 4));
}

}  // namespace

TEST_CASE("rectify_entity_scores: boost, else-branch, ranking flip") {
  Fixture f({{"a", "r", "b"}, {"c", "r", "d"}});
  gnn::GuidanceGraph guidance = guidance_over(f.g, {"b", "c", "d", "a"});
  BiasConfig cfg;

  // All four selected (K=1*4): boosted by 1.5.
  auto boosted = rectify_entity_scores({{f.g.require_entity("a"), 0.8}},
                                       guidance, cfg);
  CHECK(boosted[0].second == doctest::Approx(1.2));

  gnn::GuidanceGraph none;  // empty selection
  auto unboosted = rectify_entity_scores({{f.g.require_entity("a"), 0.8}},
                                         none, cfg);
  CHECK(unboosted[0].second == doctest::Approx(0.8));

  // {(a,0.9) outside, (b,0.7) inside} -> b first at 1.05.
  gnn::GuidanceGraph only_b;
  only_b.selected_set.insert(f.g.require_entity("b"));
  auto flipped = rectify_entity_scores(
      {{f.g.require_entity("a"), 0.9}, {f.g.require_entity("b"), 0.7}}, only_b,
      cfg);
  CHECK(flipped[0].first == f.g.require_entity("b"));
  CHECK(flipped[0].second == doctest::Approx(1.05));
  CHECK(flipped[1].second == doctest::Approx(0.9));
}

TEST_CASE("monotone rectification never demotes a boosted winner") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Fixture f({{"a", "r", "b"}});
  gnn::GuidanceGraph only_a;
  only_a.selected_set.insert(f.g.require_entity("a"));
  BiasConfig cfg;
  for (int i = 0; i < 200; ++i) {
    double sa = dist(rng);
    double sb = dist(rng);
    if (sa < sb) continue;  // a already wins raw
    auto out = rectify_entity_scores(
        {{f.g.require_entity("a"), sa}, {f.g.require_entity("b"), sb}}, only_a,
        cfg);
    CHECK(out[0].first == f.g.require_entity("a"));
  }
}

TEST_CASE("anchor: exact match, fuzzy schema node, error paths") {
  Fixture f({{"Rome", "location.location.nearby_airports", "Fiumicino"},
             {"Paris", "r", "Berlin"}});
  auto idx = f.index();
  SchemaGraph schema = projection::build_schema_graph(
      {{"rome", "location.location.nearby_airports", "[ENT1]"}});

  Anchor a = anchor(schema, "Rome", f.g, idx, f.enc, f.guidance, f.cfg);
  CHECK(a.schema_node == "rome");
  CHECK(a.kg_entity == f.g.require_entity("Rome"));
  // Exact label match in the guidance selection: S0 = lambda * 1.0.
  CHECK(a.initial_score == doctest::Approx(1.5));

  gnn::GuidanceGraph none;
  Anchor plain = anchor(schema, "Rome", f.g, idx, f.enc, none, f.cfg);
  CHECK(plain.initial_score == doctest::Approx(1.0));

  // Fuzzy pair from the county case.
  Fixture f2({{"Texarkana, Arkansas", "location.hud_county_place.county",
               "Miller County"}});
  auto idx2 = f2.index();
  SchemaGraph schema2 = projection::build_schema_graph(
      {{"texarkana arkansas", "location.hud_county_place.county", "[ENT1]"}});
  Anchor a2 = anchor(schema2, "Texarkana, Arkansas", f2.g, idx2, f2.enc,
                     f2.guidance, f2.cfg);
  CHECK(a2.schema_node == "texarkana arkansas");
  CHECK(a2.kg_entity == f2.g.require_entity("Texarkana, Arkansas"));

  // A schema with only placeholders cannot anchor.
  SchemaGraph bad = projection::build_schema_graph(
      {{"[ENT1]", "r", "[ENT2]"}});
  CHECK_THROWS_AS(
      (void)anchor(bad, "Rome", f.g, idx, f.enc, f.guidance, f.cfg), Error);
}

TEST_CASE("t_score: bias arithmetic reproduces the 1.14 correction") {
  Fixture f({{"European Union", "organization.organization.founders",
              "Belgium"}});
  BiasConfig cfg;  // tau = 0.5
  SchemaTriple schema{"[ENT1]", "location.location.containedby",
                      "European Union"};
  kg::Triple t = f.g.triples()[0];

  // Inside the guidance subgraph: +0.5 on the raw similarity.
  auto inside = t_score_parts(schema, t, f.g, f.guidance, f.enc, cfg);
  CHECK(inside.bias == doctest::Approx(0.5));
  CHECK(inside.total == doctest::Approx(inside.raw_sim + 0.5));

  gnn::GuidanceGraph none;
  auto outside = t_score_parts(schema, t, f.g, none, f.enc, cfg);
  CHECK(outside.bias == 0.0);
  CHECK(outside.total == doctest::Approx(inside.raw_sim));

  // Identical verbalizations outside guidance score exactly 1.
  SchemaTriple same{"European Union", "organization.organization.founders",
                    "Belgium"};
  CHECK(t_score(same, t, f.g, none, f.enc, cfg) == doctest::Approx(1.0));
}

TEST_CASE("step_precision: singleton, argmax, contradict skip") {
  Fixture f({{"X", "works_with", "A"},
             {"X", "works_with", "B"},
             {"Y", "other", "Z"}});
  SchemaGraph schema = projection::build_schema_graph(
      {{"X", "works_with", "[ENT1]"}});
  gnn::GuidanceGraph none;
  Matcher matcher(schema, f.g, none, f.enc, f.cfg, Strategy::precision);

  MatchState state;
  state.binding["X"] = f.g.require_entity("X");
  state.bound_by[f.g.require_entity("X")] = "X";
  matcher.step_precision(state, 0, "X", f.g.require_entity("X"));
  REQUIRE(state.matched.size() == 1);  // exactly one commitment

  // The winner is the argmax by t-score among the two incident edges.
  SchemaTriple st = schema.triples[0];
  double sa = t_score(st, f.g.triples()[0], f.g, none, f.enc, f.cfg);
  kg::Triple ta{f.g.require_entity("X"), f.g.relation_id("works_with"),
                f.g.require_entity("A")};
  kg::Triple tb{f.g.require_entity("X"), f.g.relation_id("works_with"),
                f.g.require_entity("B")};
  double score_a = t_score(st, ta, f.g, none, f.enc, f.cfg);
  double score_b = t_score(st, tb, f.g, none, f.enc, f.cfg);
  kg::Triple expected = score_a >= score_b ? ta : tb;
  CHECK(state.matched[0].kg_triple == expected);
  (void)sa;

  // Already-matched candidates are skipped via Contradict.
  MatchState resumed;
  resumed.binding["X"] = f.g.require_entity("X");
  resumed.bound_by[f.g.require_entity("X")] = "X";
  resumed.used.insert(expected);
  matcher.step_precision(resumed, 0, "X", f.g.require_entity("X"));
  REQUIRE(resumed.matched.size() == 1);
  CHECK(resumed.matched[0].kg_triple != expected);
}

TEST_CASE("step_breadth: threshold floor, ceiling, fan-out") {
  Fixture f({{"Greece", "location.country.official_language", "Greek"},
             {"Greece", "location.country.languages_spoken", "Albanian"},
             {"Greece", "unrelated.noise.relation", "Olive"}});
  SchemaGraph schema = projection::build_schema_graph(
      {{"Greece", "location.country.official_language", "[ENT1]"}});
  gnn::GuidanceGraph none;

  auto run_with_theta = [&](double theta) {
    BiasConfig cfg;
    cfg.threshold = theta;
    Matcher matcher(schema, f.g, none, f.enc, cfg, Strategy::breadth);
    MatchState state;
    state.binding["Greece"] = f.g.require_entity("Greece");
    state.bound_by[f.g.require_entity("Greece")] = "Greece";
    matcher.step_breadth(state, 0, "Greece", f.g.require_entity("Greece"));
    return state;
  };

  // Floor: everything commits.
  CHECK(run_with_theta(-10.0).matched.size() == 3);
  // Ceiling above 1 + tau: nothing commits.
  CHECK(run_with_theta(2.0).matched.empty());
}

TEST_CASE("breadth retrieves both languages through a two-hop chain") {
  // Corfu -> Greece passes the threshold once, then Greece fans out to two
  // language edges.
  Fixture f({{"Corfu", "location.administrative_division.country", "Greece"},
             {"Greece", "location.country.official_language",
              "Greek Language"},
             {"Greece", "location.country.languages_spoken",
              "Albanian language"},
             {"Greece", "finance.currency.currency_used", "Euro"}});
  SchemaGraph schema = projection::build_schema_graph(
      {{"Corfu", "location.administrative_division.country", "[ENT1]"},
       {"[ENT1]", "location.country.official_language", "[ENT2]"}});
  gnn::GuidanceGraph none;
  BiasConfig cfg;
  cfg.threshold = 0.45;

  Anchor a;
  a.schema_node = "Corfu";
  a.kg_entity = f.g.require_entity("Corfu");
  a.initial_score = 1.0;
  MatchState state =
      match(schema, f.g, a, Strategy::breadth, none, f.enc, cfg);

  auto records = oracle::match_records(state, f.g);
  REQUIRE(records.size() == 3);
  CHECK(records[0][2] == "Greece");
  bool greek = false, albanian = false;
  for (const auto& r : records) {
    if (r[2] == "Greek Language") greek = true;
    if (r[2] == "Albanian language") albanian = true;
  }
  CHECK(greek);
  CHECK(albanian);
}

TEST_CASE("match: forced single pair and two-hop chain binding reuse") {
  Fixture f({{"Wisconsin Badgers", "sports.school_sports_team.school",
              "University of Wisconsin-Madison"},
             {"Russell Wilson", "education.education.institution",
              "University of Wisconsin-Madison"},
             {"Russell Wilson", "people.person.profession", "Quarterback"}});
  SchemaGraph schema = projection::build_schema_graph(
      {{"Wisconsin Badgers", "sports.school_sports_team.team", "[ENT1]"},
       {"Russell Wilson", "education.education.institution", "[ENT1]"}});
  gnn::GuidanceGraph none;
  BiasConfig cfg;

  Anchor a;
  a.schema_node = "Wisconsin Badgers";
  a.kg_entity = f.g.require_entity("Wisconsin Badgers");
  a.initial_score = 1.0;
  MatchState state =
      match(schema, f.g, a, Strategy::precision, none, f.enc, cfg);

  // Both schema edges resolve, sharing the [ENT1] binding.
  REQUIRE(state.matched.size() == 2);
  CHECK(state.binding.at("[ENT1]") ==
        f.g.require_entity("University of Wisconsin-Madison"));
  auto records = oracle::match_records(state, f.g);
  CHECK(records[0][0] == "Russell Wilson");
  CHECK(records[0][1] == "education.education.institution");
  CHECK(records[1][0] == "Wisconsin Badgers");
}

TEST_CASE("contradict soundness: no triple commits twice") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<kg::TripleRecord> records;
    int n = 4 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n + 4; ++i) {
      records.push_back({"v" + std::to_string(rng() % n),
                         "r" + std::to_string(rng() % 3),
                         "v" + std::to_string(rng() % n)});
    }
    Fixture f(records);
    SchemaGraph schema = projection::build_schema_graph(
        {{"v0", "r0", "[ENT1]"}, {"[ENT1]", "r1", "[ENT2]"}});
    if (f.g.entity_id("v0") == kg::kNoEntity) continue;
    Anchor a{"v0", f.g.require_entity("v0"), 1.0};
    for (auto strategy : {Strategy::precision, Strategy::breadth}) {
      BiasConfig cfg;
      cfg.threshold = -1.0;
      MatchState state =
          match(schema, f.g, a, strategy, f.guidance, f.enc, cfg);
      std::set<std::array<std::string, 3>> seen;
      for (const auto& step : state.matched) {
        auto rec = f.g.record(step.kg_triple);
        CHECK(seen.insert({rec[0], rec[1], rec[2]}).second);
      }
    }
  }
}

TEST_CASE("precision match equals the brute-force oracle on random graphs") {
  std::mt19937_64 rng(4242);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    int n = 5 + static_cast<int>(rng() % 8);  // <= 12 nodes
    std::vector<kg::TripleRecord> records;
    int m = n + static_cast<int>(rng() % (2 * n));
    for (int i = 0; i < m; ++i) {
      records.push_back({"v" + std::to_string(rng() % n),
                         "rel" + std::to_string(rng() % 4),
                         "v" + std::to_string(rng() % n)});
    }
    Fixture f(records);

    // Random 1-3 edge schema built from chain/fork shapes.
    int shape = static_cast<int>(rng() % 3);
    std::vector<SchemaTriple> st;
    std::string anchor_label = "v" + std::to_string(rng() % n);
    if (f.g.entity_id(anchor_label) == kg::kNoEntity) continue;
    if (shape == 0) {
      st = {{anchor_label, "rel" + std::to_string(rng() % 4), "[ENT1]"}};
    } else if (shape == 1) {
      st = {{anchor_label, "rel" + std::to_string(rng() % 4), "[ENT1]"},
            {"[ENT1]", "rel" + std::to_string(rng() % 4), "[ENT2]"}};
    } else {
      st = {{anchor_label, "rel" + std::to_string(rng() % 4), "[ENT1]"},
            {anchor_label, "rel" + std::to_string(rng() % 4), "[ENT2]"},
            {"[ENT2]", "rel" + std::to_string(rng() % 4), "[ENT3]"}};
    }
    SchemaGraph schema = projection::build_schema_graph(st);
    Anchor a{anchor_label, f.g.require_entity(anchor_label), 1.0};

    BiasConfig cfg;
    MatchState state =
        match(schema, f.g, a, Strategy::precision, f.guidance, f.enc, cfg);
    auto best = oracle::brute_force_best_mapping(schema, f.g, a, f.guidance,
                                                 f.enc, cfg);
    CHECK(oracle::match_records(state, f.g) ==
          oracle::mapping_records(best, f.g));
    ++compared;
  }
  CHECK(compared >= 40);
}

TEST_CASE("retrieve: union, dedup, empty plans, anchor failures") {
  std::vector<kg::TripleRecord> records = {
      {"Rome", "location.location.nearby_airports",
       "Ciampino-G. B. Pastine International Airport"},
      {"Rome", "location.location.nearby_airports",
       "Leonardo da Vinci-Fiumicino Airport"},
      {"Rome", "time.time_zone", "Central European Time"}};
  kg::QuestionInstance q;
  q.graph = kg::KnowledgeGraph::from_records(records);
  q.id = "c1";
  q.question = "which airport to fly into rome";
  q.question_entities = {q.graph.require_entity("Rome")};

  embedding::HashedNgramEncoder enc(256, 0x5eed);
  auto idx = embedding::build_entity_index(q.graph, enc);
  gnn::GuidanceGraph guidance;  // nothing selected: raw similarities only
  BiasConfig cfg;
  cfg.threshold = 0.6;

  Plan plan;
  plan.schema = projection::build_schema_graph(
      {{"rome", "location.location.nearby_airports", "[ENT1]"}});
  plan.strategy = Strategy::breadth;

  // Two identical plans: retrieved triples union without duplicates.
  EvidenceGraph evidence =
      retrieve({plan, plan}, q, guidance, idx, enc, cfg);
  CHECK(evidence.triples.size() == 2);
  bool ciampino = false, fiumicino = false;
  for (const auto& t : evidence.triples) {
    auto rec = q.graph.record(t);
    if (rec[2] == "Ciampino-G. B. Pastine International Airport")
      ciampino = true;
    if (rec[2] == "Leonardo da Vinci-Fiumicino Airport") fiumicino = true;
  }
  CHECK(ciampino);
  CHECK(fiumicino);
  CHECK(evidence.strategy == Strategy::breadth);

  // A plan whose schema has no concrete node fails to anchor but does not
  // crash the retrieval.
  Plan unanchorable;
  unanchorable.schema =
      projection::build_schema_graph({{"[ENT1]", "r", "[ENT2]"}});
  unanchorable.strategy = Strategy::precision;
  EvidenceGraph partial =
      retrieve({unanchorable}, q, guidance, idx, enc, cfg);
  CHECK(partial.triples.empty());
  CHECK(partial.failed_anchors == 1);

  CHECK_THROWS_AS(
      (void)retrieve({}, q, guidance, idx, enc, cfg), Error);
}

TEST_CASE("breadth superset: greedy winner above theta is in the breadth set") {
  std::mt19937_64 rng(777);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = 4 + static_cast<int>(rng() % 5);
    std::vector<kg::TripleRecord> records;
    for (int i = 0; i < n + 3; ++i) {
      records.push_back({"w" + std::to_string(rng() % n),
                         "q" + std::to_string(rng() % 3),
                         "w" + std::to_string(rng() % n)});
    }
    Fixture f(records);
    if (f.g.entity_id("w0") == kg::kNoEntity) continue;
    SchemaGraph schema = projection::build_schema_graph(
        {{"w0", "q" + std::to_string(rng() % 3), "[ENT1]"}});
    kg::EntityId frontier = f.g.require_entity("w0");

    BiasConfig cfg;
    cfg.threshold = 0.1 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
    gnn::GuidanceGraph none;

    Matcher greedy(schema, f.g, none, f.enc, cfg, Strategy::precision);
    MatchState ps;
    ps.binding["w0"] = frontier;
    ps.bound_by[frontier] = "w0";
    greedy.step_precision(ps, 0, "w0", frontier);
    if (ps.matched.empty()) continue;
    // Consider only the first (top-level) commitment of the greedy walk.
    if (ps.matched[0].step_score < cfg.threshold) continue;

    Matcher breadth(schema, f.g, none, f.enc, cfg, Strategy::breadth);
    MatchState bs;
    bs.binding["w0"] = frontier;
    bs.bound_by[frontier] = "w0";
    breadth.step_breadth(bs, 0, "w0", frontier);
    bool found = false;
    for (const auto& step : bs.matched) {
      if (step.kg_triple == ps.matched[0].kg_triple) found = true;
    }
    CHECK(found);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("determinism: identical inputs give identical matched sequences") {
  Fixture f({{"a", "r", "b"}, {"b", "r", "c"}, {"a", "r", "c"}, {"c", "s", "d"}});
  SchemaGraph schema = projection::build_schema_graph(
      {{"a", "r", "[ENT1]"}, {"[ENT1]", "s", "[ENT2]"}});
  Anchor a{"a", f.g.require_entity("a"), 1.0};
  BiasConfig cfg;
  cfg.threshold = 0.0;
  for (auto strategy : {Strategy::precision, Strategy::breadth}) {
    MatchState s1 = match(schema, f.g, a, strategy, f.guidance, f.enc, cfg);
    MatchState s2 = match(schema, f.g, a, strategy, f.guidance, f.enc, cfg);
    REQUIRE(s1.matched.size() == s2.matched.size());
    for (size_t i = 0; i < s1.matched.size(); ++i) {
      CHECK(s1.matched[i].kg_triple == s2.matched[i].kg_triple);
      CHECK(s1.matched[i].step_score == s2.matched[i].step_score);
    }
  }
}
