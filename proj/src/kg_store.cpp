#include "stem/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stem/text.hpp"

namespace stem::kg {

using nlohmann::json;

KnowledgeGraph KnowledgeGraph::from_records(
    const std::vector<TripleRecord>& records) {
  KnowledgeGraph g;
  for (const auto& rec : records) g.add_triple(rec);
  g.freeze();
  return g;
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open triple file: " + path.string());
  }
  KnowledgeGraph g;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    TripleRecord rec;
    if (line.front() == '{') {
      json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded() || !j.contains("head") || !j.contains("relation") ||
          !j.contains("tail")) {
        throw Error(Error::Kind::parse,
                    "malformed triple record at line " +
                        std::to_string(line_no) + " of " + path.string());
      }
      rec = {j["head"].get<std::string>(), j["relation"].get<std::string>(),
             j["tail"].get<std::string>()};
    } else {
      auto cols = text::split(line, '\t');
      if (cols.size() != 3) {
        throw Error(Error::Kind::parse,
                    "expected 3 tab-separated columns at line " +
                        std::to_string(line_no) + " of " + path.string());
      }
      rec = {cols[0], cols[1], cols[2]};
    }
    if (rec[0].empty() || rec[1].empty() || rec[2].empty()) {
      throw Error(Error::Kind::parse, "empty field in triple at line " +
                                          std::to_string(line_no) + " of " +
                                          path.string());
    }
    g.add_triple(rec);
  }
  g.freeze();
  return g;
}

void KnowledgeGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write triple file: " + path.string());
  }
  for (const Triple& t : triples_) {
    json j;
    j["head"] = entity_label(t.head);
    j["relation"] = relation_label(t.relation);
    j["tail"] = entity_label(t.tail);
    out << j.dump() << '\n';
  }
}

EntityId KnowledgeGraph::entity_id(std::string_view label) const {
  auto it = entity_index_.find(std::string(label));
  return it == entity_index_.end() ? kNoEntity : it->second;
}

RelationId KnowledgeGraph::relation_id(std::string_view label) const {
  auto it = relation_index_.find(std::string(label));
  return it == relation_index_.end() ? -1 : it->second;
}

EntityId KnowledgeGraph::require_entity(std::string_view label) const {
  EntityId id = entity_id(label);
  if (id == kNoEntity) {
    throw Error(Error::Kind::lookup,
                "unknown entity: " + std::string(label));
  }
  return id;
}

const std::string& KnowledgeGraph::entity_label(EntityId id) const {
  if (id < 0 || static_cast<size_t>(id) >= entity_labels_.size()) {
    throw Error(Error::Kind::lookup,
                "entity id out of range: " + std::to_string(id));
  }
  return entity_labels_[static_cast<size_t>(id)];
}

const std::string& KnowledgeGraph::relation_label(RelationId id) const {
  if (id < 0 || static_cast<size_t>(id) >= relation_labels_.size()) {
    throw Error(Error::Kind::lookup,
                "relation id out of range: " + std::to_string(id));
  }
  return relation_labels_[static_cast<size_t>(id)];
}

const std::vector<Triple>& KnowledgeGraph::incident_edges(EntityId e) const {
  if (e < 0 || static_cast<size_t>(e) >= adjacency_.size()) {
    throw Error(Error::Kind::lookup,
                "entity id out of range: " + std::to_string(e));
  }
  return adjacency_[static_cast<size_t>(e)];
}

TripleRecord KnowledgeGraph::record(const Triple& t) const {
  return {entity_label(t.head), relation_label(t.relation),
          entity_label(t.tail)};
}

bool KnowledgeGraph::label_less(const Triple& a, const Triple& b) const {
  return record(a) < record(b);
}

bool KnowledgeGraph::same_contents(const KnowledgeGraph& other) const {
  if (entity_count() != other.entity_count() ||
      relation_count() != other.relation_count() ||
      triples_.size() != other.triples_.size()) {
    return false;
  }
  auto sorted_labels = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  if (sorted_labels(entity_labels_) != sorted_labels(other.entity_labels_) ||
      sorted_labels(relation_labels_) !=
          sorted_labels(other.relation_labels_)) {
    return false;
  }
  for (const Triple& t : triples_) {
    TripleRecord rec = record(t);
    Triple mapped{other.entity_id(rec[0]), other.relation_id(rec[1]),
                  other.entity_id(rec[2])};
    if (mapped.head == kNoEntity || mapped.relation < 0 ||
        mapped.tail == kNoEntity || !other.contains(mapped)) {
      return false;
    }
  }
  return true;
}

EntityId KnowledgeGraph::intern_entity(std::string_view label) {
  auto it = entity_index_.find(std::string(label));
  if (it != entity_index_.end()) return it->second;
  EntityId id = static_cast<EntityId>(entity_labels_.size());
  entity_labels_.emplace_back(label);
  entity_index_.emplace(std::string(label), id);
  return id;
}

RelationId KnowledgeGraph::intern_relation(std::string_view label) {
  auto it = relation_index_.find(std::string(label));
  if (it != relation_index_.end()) return it->second;
  RelationId id = static_cast<RelationId>(relation_labels_.size());
  relation_labels_.emplace_back(label);
  relation_index_.emplace(std::string(label), id);
  return id;
}

void KnowledgeGraph::add_triple(const TripleRecord& rec) {
  Triple t;
  t.head = intern_entity(rec[0]);
  t.relation = intern_relation(rec[1]);
  t.tail = intern_entity(rec[2]);
  if (triple_set_.insert(t).second) triples_.push_back(t);
}

void KnowledgeGraph::freeze() {
  std::sort(triples_.begin(), triples_.end(),
            [this](const Triple& a, const Triple& b) { return label_less(a, b); });
  adjacency_.assign(entity_labels_.size(), {});
  for (const Triple& t : triples_) {
    adjacency_[static_cast<size_t>(t.head)].push_back(t);
    if (t.tail != t.head) {
      adjacency_[static_cast<size_t>(t.tail)].push_back(t);
    }
  }
  // Triples land pre-sorted, so each adjacency list is already ordered.
}

EntityId get_tail_entity(const Triple& t, EntityId e) {
  if (t.head == e) return t.tail;
  if (t.tail == e) return t.head;
  throw Error(Error::Kind::contract,
              "entity " + std::to_string(e) + " is not an endpoint");
}

KnowledgeGraph build_graph(const KnowledgeGraph& source,
                           const std::vector<Triple>& triples) {
  std::vector<TripleRecord> records;
  records.reserve(triples.size());
  for (const Triple& t : triples) records.push_back(source.record(t));
  return KnowledgeGraph::from_records(records);
}

namespace {

std::vector<TripleRecord> parse_triple_array(const json& arr,
                                             const std::string& what,
                                             size_t line_no) {
  std::vector<TripleRecord> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 3) {
      throw Error(Error::Kind::parse,
                  what + " must hold 3-field triples (line " +
                      std::to_string(line_no) + ")");
    }
    out.push_back({item[0].get<std::string>(), item[1].get<std::string>(),
                   item[2].get<std::string>()});
  }
  return out;
}

}  // namespace

std::vector<QuestionInstance> load_questions(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open question file: " + path.string());
  }
  std::vector<QuestionInstance> result;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      throw Error(Error::Kind::parse, "malformed question record at line " +
                                          std::to_string(line_no) + " of " +
                                          path.string());
    }
    QuestionInstance q;
    q.id = j.value("id", "q" + std::to_string(line_no));
    q.question = j.at("question").get<std::string>();
    q.answers = j.value("answers", std::vector<std::string>{});

    auto triples = parse_triple_array(j.at("triples"), "triples", line_no);
    q.graph = KnowledgeGraph::from_records(triples);

    for (const auto& label :
         j.value("question_entities", std::vector<std::string>{})) {
      EntityId id = q.graph.entity_id(label);
      if (id == kNoEntity) {
        throw Error(Error::Kind::parse,
                    "question entity '" + label +
                        "' does not resolve in the inline subgraph (line " +
                        std::to_string(line_no) + ")");
      }
      q.question_entities.push_back(id);
    }

    if (j.contains("ground_truth_path")) {
      for (const auto& rec : parse_triple_array(j["ground_truth_path"],
                                                "ground_truth_path", line_no)) {
        Triple t{q.graph.entity_id(rec[0]), q.graph.relation_id(rec[1]),
                 q.graph.entity_id(rec[2])};
        if (t.head == kNoEntity || t.relation < 0 || t.tail == kNoEntity ||
            !q.graph.contains(t)) {
          throw Error(Error::Kind::parse,
                      "ground-truth triple (" + rec[0] + ", " + rec[1] + ", " +
                          rec[2] + ") missing from subgraph (line " +
                          std::to_string(line_no) + ")");
        }
        q.ground_truth_path.push_back(t);
      }
    }
    result.push_back(std::move(q));
  }
  return result;
}

void save_questions(const std::filesystem::path& path,
                    const std::vector<QuestionInstance>& questions) {
  std::ofstream out(path);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write question file: " + path.string());
  }
  for (const auto& q : questions) {
    json j;
    j["id"] = q.id;
    j["question"] = q.question;
    std::vector<std::string> entity_labels;
    for (EntityId e : q.question_entities) {
      entity_labels.push_back(q.graph.entity_label(e));
    }
    j["question_entities"] = entity_labels;
    j["answers"] = q.answers;
    json gt = json::array();
    for (const Triple& t : q.ground_truth_path) {
      auto rec = q.graph.record(t);
      gt.push_back({rec[0], rec[1], rec[2]});
    }
    j["ground_truth_path"] = gt;
    json triples = json::array();
    for (const Triple& t : q.graph.triples()) {
      auto rec = q.graph.record(t);
      triples.push_back({rec[0], rec[1], rec[2]});
    }
    j["triples"] = triples;
    out << j.dump() << '\n';
  }
}

}  // namespace stem::kg
