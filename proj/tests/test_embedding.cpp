#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "stem/embedding.hpp"

using namespace stem;
using embedding::cosine_sim;
using embedding::HashedNgramEncoder;
using embedding::Vector;

TEST_CASE("cosine_sim basics") {
  CHECK(cosine_sim({1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_sim({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_sim({1, 1}, {1, 0}) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK(cosine_sim({0, 0}, {1, 0}) == 0.0);  // zero vector convention
  CHECK_THROWS_AS((void)cosine_sim({1}, {1, 2}), Error);
}

TEST_CASE("cosine symmetry over random vectors") {
  HashedNgramEncoder enc(64, 9);
  for (int i = 0; i < 20; ++i) {
    Vector a = enc.encode("left " + std::to_string(i));
    Vector b = enc.encode("right " + std::to_string(i * 3));
    CHECK(std::fabs(cosine_sim(a, b) - cosine_sim(b, a)) < 1e-12);
  }
}

TEST_CASE("verbalize uses the pipe-joined canonical form") {
  CHECK(embedding::verbalize("rome", "location.location.nearby_airports",
                             "[ENT1]") ==
        "rome | location.location.nearby_airports | [ENT1]");
  CHECK(embedding::verbalize("A", "r", "A") == "A | r | A");
  CHECK(embedding::verbalize("A", "r", "B") !=
        embedding::verbalize("B", "r", "A"));
}

TEST_CASE("deterministic encoder: purity, dimension, discrimination") {
  HashedNgramEncoder enc(1024, 0x5eed);
  Vector a1 = enc.encode("abc");
  Vector a2 = enc.encode("abc");
  CHECK(a1 == a2);  // bitwise equality
  CHECK(a1.size() == 1024);
  CHECK(enc.encode("abd") != a1);
  CHECK_THROWS_AS((void)enc.encode(""), Error);

  // Unit norm.
  double norm = 0;
  for (float x : a1) norm += static_cast<double>(x) * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("encoder collision check over a 1k-word corpus") {
  HashedNgramEncoder enc(1024, 0x5eed);
  std::set<std::vector<float>> seen;
  for (int i = 0; i < 1000; ++i) {
    Vector v = enc.encode("word-" + std::to_string(i));
    CHECK(seen.insert(v).second);  // all distinct
  }
}

TEST_CASE("lexically close strings score higher than unrelated ones") {
  HashedNgramEncoder enc(1024, 0x5eed);
  double close = cosine_sim(enc.encode("texarkana arkansas"),
                            enc.encode("Texarkana, Arkansas"));
  double far = cosine_sim(enc.encode("texarkana arkansas"),
                          enc.encode("Miller County"));
  CHECK(close > 0.6);
  CHECK(close > far + 0.3);
}

TEST_CASE("top_n_entities: exact match first, cap, brute-force parity") {
  kg::KnowledgeGraph g = kg::KnowledgeGraph::from_records({
      {"Rome", "r", "Paris"},
      {"Paris", "r", "Berlin"},
  });
  HashedNgramEncoder enc(256, 1);
  auto idx = embedding::build_entity_index(g, enc);

  auto top = embedding::top_n_entities(idx, enc, "Rome", 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].first == g.entity_id("Rome"));
  CHECK(top[0].second == doctest::Approx(1.0));

  // n larger than the catalog returns the whole catalog.
  CHECK(embedding::top_n_entities(idx, enc, "Rome", 50).size() ==
        g.entity_count());

  // Empty index -> empty list.
  embedding::EntityIndex empty;
  CHECK(embedding::top_n_entities(empty, enc, "Rome", 3).empty());
}

TEST_CASE("top_n is a prefix of the exhaustive ranking on 100 entities") {
  std::vector<kg::TripleRecord> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back({"entity " + std::to_string(i), "r", "hub"});
  }
  kg::KnowledgeGraph g = kg::KnowledgeGraph::from_records(records);
  HashedNgramEncoder enc(128, 3);
  auto idx = embedding::build_entity_index(g, enc);

  Vector q = enc.encode("entity 42");
  auto top10 = embedding::top_n_entities(idx, q, 10);
  auto full = embedding::top_n_entities(idx, q, idx.vectors.size());
  REQUIRE(full.size() == g.entity_count());
  for (size_t i = 0; i < top10.size(); ++i) {
    CHECK(top10[i] == full[i]);
  }
  CHECK(full[0].first == g.entity_id("entity 42"));
}

TEST_CASE("vector cache round trip and corruption recovery") {
  auto dir = std::filesystem::temp_directory_path() / "stemkg_tests";
  std::filesystem::create_directories(dir);
  auto file = dir / "vectors.bin";
  std::filesystem::remove(file);

  embedding::VectorCache cache(file);
  cache.put("enc", "alpha", {1.0f, 2.0f});
  cache.put("enc", "beta", {3.0f});
  cache.save();

  embedding::VectorCache reloaded(file);
  reloaded.load();
  CHECK(reloaded.size() == 2);
  auto hit = reloaded.get("enc", "alpha");
  REQUIRE(hit.has_value());
  CHECK((*hit)[1] == 2.0f);
  CHECK_FALSE(reloaded.get("enc", "gamma").has_value());
  CHECK_FALSE(reloaded.get("other", "alpha").has_value());

  // Flip a payload byte: the record must be dropped, not returned.
  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8 + 32 + 4 + 1);  // into the first record's float data
    char junk = 0x7f;
    f.write(&junk, 1);
  }
  embedding::VectorCache corrupted(file);
  corrupted.load();
  CHECK(corrupted.size() == 1);
  CHECK(corrupted.dropped_records() == 1);
}

TEST_CASE("caching encoder serves bitwise-identical repeats") {
  HashedNgramEncoder inner(64, 5);
  embedding::CachingEncoder enc(inner);
  Vector a = enc.encode("repeat me");
  Vector b = enc.encode("repeat me");
  CHECK(a == b);
  CHECK(a == inner.encode("repeat me"));
}
