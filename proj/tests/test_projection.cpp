#include <filesystem>

#include "doctest.h"
#include "stem/projection.hpp"

using namespace stem;
using namespace stem::projection;

namespace {

PromptSet test_prompts() {
  return load_prompts(std::filesystem::path(STEMKG_SOURCE_DIR) / "assets" /
                      "prompts");
}

}  // namespace

TEST_CASE("placeholder scanning") {
  CHECK(is_placeholder("[ENT1]"));
  CHECK(is_placeholder("[ENT42]"));
  CHECK_FALSE(is_placeholder("[ENT]"));
  CHECK_FALSE(is_placeholder("[ENTx]"));
  CHECK_FALSE(is_placeholder("ENT1"));
  auto found = placeholders_in("[ENT1]'s arena stadium is [ENT2], via [ENT1]");
  REQUIRE(found.size() == 2);
  CHECK(found[0] == "[ENT1]");
  CHECK(found[1] == "[ENT2]");
}

TEST_CASE("parse_plan: minimal, chained, negative") {
  PlanCandidate p = parse_plan(R"(("A is B",), Precision)");
  CHECK(p.assertions == std::vector<std::string>{"A is B"});
  CHECK(p.strategy == Strategy::precision);

  PlanCandidate chain = parse_plan(
      R"(("X's mascot is [ENT1]", "[ENT1]'s arena stadium is [ENT2]"), Precision)");
  REQUIRE(chain.assertions.size() == 2);
  CHECK(placeholders_in(chain.assertions[0])[0] == "[ENT1]");

  CHECK_THROWS_AS((void)parse_plan(R"(("A",), Maybe)"), Error);
  CHECK_THROWS_AS((void)parse_plan("no quotes at all, Precision"), Error);
  // Case-insensitive strategy literal.
  CHECK(parse_plan(R"(("A",), breadth)").strategy == Strategy::breadth);
}

TEST_CASE("parse_schema_triples accepts the bracketed tuple form") {
  auto triples = parse_schema_triples(
      R"([("rome", "location.location.nearby_airports", "[ENT1]")])");
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].head == "rome");
  CHECK(triples[0].tail == "[ENT1]");

  CHECK_THROWS_AS((void)parse_schema_triples(R"([("a", "b")])"), Error);
  CHECK_THROWS_AS((void)parse_schema_triples("nothing here"), Error);
}

TEST_CASE("build_schema_graph merges shared nodes") {
  SchemaGraph one = build_schema_graph({{"A", "r", "[ENT1]"}});
  CHECK(one.nodes.size() == 2);
  CHECK(one.triples.size() == 1);

  SchemaGraph fork = build_schema_graph(
      {{"Wisconsin Badgers", "sports.sports_league.teams", "[ENT1]"},
       {"Russell Wilson", "education.education.institution", "[ENT1]"}});
  CHECK(fork.nodes.size() == 3);
  CHECK(fork.adjacency.at("[ENT1]").size() == 2);

  SchemaGraph chain = build_schema_graph(
      {{"A", "r1", "[ENT1]"}, {"[ENT1]", "r2", "[ENT2]"}});
  CHECK(chain.nodes.size() == 3);
  CHECK(chain.adjacency.at("[ENT1]").size() == 2);
  CHECK(chain.concrete_nodes() == std::vector<std::string>{"A"});
}

TEST_CASE("node count equals distinct labels plus distinct placeholders") {
  SchemaGraph g = build_schema_graph({{"A", "r", "[ENT1]"},
                                      {"A", "r2", "[ENT2]"},
                                      {"[ENT1]", "r3", "[ENT2]"}});
  CHECK(g.nodes.size() == 3);  // A + 2 placeholders
}

TEST_CASE("fixture client replays recorded completions deterministically") {
  FixtureChatClient client;
  client.add("prompt-a", {"one", "two", "three"});
  CHECK(client.complete("prompt-a", 2, 0.0) ==
        std::vector<std::string>{"one", "two"});
  CHECK(client.complete("prompt-a", 9, 0.0).size() == 3);
  CHECK_THROWS_AS((void)client.complete("unknown", 1, 0.0), Error);

  auto dir = std::filesystem::temp_directory_path() / "stemkg_tests";
  std::filesystem::create_directories(dir);
  client.save(dir / "fixtures.jsonl");
  FixtureChatClient reloaded(dir / "fixtures.jsonl");
  CHECK(reloaded.complete("prompt-a", 1, 0.0) ==
        std::vector<std::string>{"one"});
}

TEST_CASE("decompose: beam, dedup, fallback") {
  PromptSet prompts = test_prompts();
  std::string question = "which airport to fly into rome";
  std::string prompt = render_decompose_prompt(prompts, question);

  FixtureChatClient client;
  client.add(prompt, {R"(("rome's nearby airport is [ENT1]",), Breadth)",
                      R"(("the airport near rome is [ENT1].",), Breadth)",
                      R"(("ROME'S NEARBY AIRPORT IS [ENT1]",), Breadth)",
                      "garbage that cannot parse"});
  auto candidates = decompose(client, prompts, question, 4);
  // Case-folded duplicate collapses, garbage is dropped.
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0].strategy == Strategy::breadth);
  CHECK(candidates[0].assertions[0] == "rome's nearby airport is [ENT1]");

  SUBCASE("beam=1 returns exactly one candidate") {
    auto one = decompose(client, prompts, question, 1);
    CHECK(one.size() == 1);
  }

  SUBCASE("all-unparseable falls back to Precision with the raw question") {
    FixtureChatClient bad;
    bad.add(prompt, {"nope", "still nope"});
    auto fallback = decompose(bad, prompts, question, 4);
    REQUIRE(fallback.size() == 1);
    CHECK(fallback[0].strategy == Strategy::precision);
    CHECK(fallback[0].assertions == std::vector<std::string>{question});
  }
}

TEST_CASE("ground validates placeholder provenance") {
  PromptSet prompts = test_prompts();
  std::vector<std::string> assertions = {"rome's nearby airport is [ENT1]"};
  std::string prompt = render_ground_prompt(prompts, assertions);

  FixtureChatClient client;
  client.add(prompt,
             {R"([("rome", "location.location.nearby_airports", "[ENT1]")])"});
  auto triples = ground(client, prompts, assertions);
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].relation == "location.location.nearby_airports");

  SUBCASE("hockey position example grounds to the dotted relation") {
    std::vector<std::string> hockey = {
        "Darryl Sutter's hockey position is [ENT1]."};
    FixtureChatClient hc;
    hc.add(render_ground_prompt(prompts, hockey),
           {R"([("Darryl Sutter", "ice_hockey.hockey_player.hockey_position", "[ENT1]")])"});
    auto ht = ground(hc, prompts, hockey);
    CHECK(ht[0].relation == "ice_hockey.hockey_player.hockey_position");
  }

  SUBCASE("invented placeholder is a contract violation") {
    FixtureChatClient bad;
    bad.add(prompt, {R"([("A", "r", "[ENT9]")])"});
    CHECK_THROWS_AS((void)ground(bad, prompts, assertions), Error);
  }
}

TEST_CASE("decompose with fixtures is fully deterministic") {
  PromptSet prompts = test_prompts();
  std::string q = "what county is texarkana arkansas in";
  FixtureChatClient client;
  client.add(render_decompose_prompt(prompts, q),
             {R"(("texarkana arkansas is a country of [ENT1]",), Precision)",
              R"(("texarkana, arkansas is a country within [ENT1].",), Precision)"});
  auto a = decompose(client, prompts, q, 4);
  auto b = decompose(client, prompts, q, 4);
  CHECK(a == b);
}
