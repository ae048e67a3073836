#pragma once
// Immutable indexed knowledge graph: interned entity/relation catalogs, a
// duplicate-free triple set and a direction-agnostic adjacency index.
// Graphs are frozen once constructed; reads are safe from any thread.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stem/error.hpp"

namespace stem::kg {

using EntityId = int32_t;
using RelationId = int32_t;
constexpr EntityId kNoEntity = -1;

struct Triple {
  EntityId head = kNoEntity;
  RelationId relation = -1;
  EntityId tail = kNoEntity;

  bool operator==(const Triple&) const = default;
};

struct TripleHash {
  size_t operator()(const Triple& t) const {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<uint64_t>(t.head));
    mix(static_cast<uint64_t>(t.relation));
    mix(static_cast<uint64_t>(t.tail));
    return static_cast<size_t>(h);
  }
};

// A raw (head, relation, tail) label record, the unit of file exchange.
using TripleRecord = std::array<std::string, 3>;

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Builds a frozen graph from label records; duplicates collapse.
  static KnowledgeGraph from_records(const std::vector<TripleRecord>& records);

  // Line-delimited triple file. Accepts tab-separated 3-column text and
  // JSON records {"head","relation","tail"}; a malformed line raises a
  // parse error naming the line number.
  static KnowledgeGraph load(const std::filesystem::path& path);

  // Writes the structured (JSON record) form, one triple per line, in
  // canonical label order.
  void save(const std::filesystem::path& path) const;

  EntityId entity_id(std::string_view label) const;  // kNoEntity when absent
  RelationId relation_id(std::string_view label) const;
  EntityId require_entity(std::string_view label) const;  // throws lookup
  const std::string& entity_label(EntityId id) const;
  const std::string& relation_label(RelationId id) const;

  size_t entity_count() const { return entity_labels_.size(); }
  size_t relation_count() const { return relation_labels_.size(); }
  const std::vector<std::string>& entity_labels() const {
    return entity_labels_;
  }
  const std::vector<std::string>& relation_labels() const {
    return relation_labels_;
  }

  // Canonically ordered (by label tuple), duplicate-free.
  const std::vector<Triple>& triples() const { return triples_; }
  bool contains(const Triple& t) const { return triple_set_.count(t) > 0; }

  // All triples containing e as head or tail, sorted by label tuple.
  // Unknown entity id raises a lookup error.
  const std::vector<Triple>& incident_edges(EntityId e) const;

  TripleRecord record(const Triple& t) const;
  bool label_less(const Triple& a, const Triple& b) const;

  // Same entity/relation label sets and same label-level triple set,
  // regardless of interning order.
  bool same_contents(const KnowledgeGraph& other) const;

 private:
  EntityId intern_entity(std::string_view label);
  RelationId intern_relation(std::string_view label);
  void add_triple(const TripleRecord& rec);
  void freeze();

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> triple_set_;
  std::vector<std::vector<Triple>> adjacency_;
};

// The complementary endpoint of t relative to e; a self-loop returns e.
// e must be an endpoint of t.
EntityId get_tail_entity(const Triple& t, EntityId e);

// Graph over exactly the entities/relations appearing in `triples` (ids
// interpreted against `source`), duplicates removed.
KnowledgeGraph build_graph(const KnowledgeGraph& source,
                           const std::vector<Triple>& triples);

// One evaluation question: text, topic entities, gold answers, the gold
// reasoning path and the per-question subgraph it lives in.
struct QuestionInstance {
  std::string id;
  std::string question;
  std::vector<EntityId> question_entities;
  std::vector<std::string> answers;
  std::vector<Triple> ground_truth_path;
  KnowledgeGraph graph;
};

// Line-delimited question records; validates that question entities resolve
// and that ground-truth path triples exist in the inline subgraph.
std::vector<QuestionInstance> load_questions(
    const std::filesystem::path& path);

void save_questions(const std::filesystem::path& path,
                    const std::vector<QuestionInstance>& questions);

}  // namespace stem::kg
