#include "stem/datagen.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stem/hash.hpp"
#include "stem/text.hpp"

namespace stem::datagen {

using projection::SchemaTriple;
using projection::Strategy;

WalkSample sample_walk(const kg::KnowledgeGraph& g, size_t length,
                       uint64_t seed) {
  if (g.triples().empty()) {
    throw Error(Error::Kind::sampling, "cannot sample from an edgeless graph");
  }
  if (length < 1) {
    throw Error(Error::Kind::argument, "walk length must be >= 1");
  }
  std::mt19937_64 rng(seed);
  auto random_entity = [&rng, &g]() {
    return static_cast<kg::EntityId>(rng() % g.entity_count());
  };

  WalkSample sample;
  std::unordered_set<kg::Triple, kg::TripleHash> picked;
  std::unordered_set<kg::EntityId> visited;
  auto visit = [&](kg::EntityId e) {
    if (visited.insert(e).second) sample.entities.push_back(e);
  };

  kg::EntityId current = random_entity();
  visit(current);
  int dead_ends = 0;
  size_t attempts = 0;
  const size_t max_attempts = 20 + 10 * length;
  while (sample.triples.size() < length && attempts++ < max_attempts) {
    std::vector<kg::Triple> fresh;
    for (const kg::Triple& t : g.incident_edges(current)) {
      if (!picked.count(t)) fresh.push_back(t);
    }
    if (fresh.empty()) {
      ++dead_ends;
      if (dead_ends > 3 || sample.entities.empty()) {
        current = random_entity();
        visit(current);
        dead_ends = 0;
      } else {
        current = sample.entities[rng() % sample.entities.size()];
      }
      continue;
    }
    const kg::Triple& t = fresh[rng() % fresh.size()];
    picked.insert(t);
    sample.triples.push_back(t);
    visit(t.head);
    visit(t.tail);
    current = kg::get_tail_entity(t, current);
    dead_ends = 0;
  }
  return sample;
}

MaskResult mask(const kg::KnowledgeGraph& g,
                const std::vector<kg::Triple>& triples, size_t answer_count,
                uint64_t seed) {
  if (triples.empty()) {
    throw Error(Error::Kind::argument, "mask needs >= 1 triple");
  }
  if (answer_count < 1) {
    throw Error(Error::Kind::argument, "answer_count must be >= 1");
  }
  std::vector<kg::EntityId> entities;
  std::set<kg::EntityId> seen;
  for (const kg::Triple& t : triples) {
    for (kg::EntityId e : {t.head, t.tail}) {
      if (seen.insert(e).second) entities.push_back(e);
    }
  }
  if (answer_count >= entities.size()) {
    throw Error(Error::Kind::sampling,
                "masking " + std::to_string(answer_count) + " of " +
                    std::to_string(entities.size()) +
                    " entities would leave no concrete anchor");
  }

  std::mt19937_64 rng(seed);
  std::set<kg::EntityId> masked_set;
  for (int attempt = 0; attempt < 16 && masked_set.empty(); ++attempt) {
    std::vector<kg::EntityId> pool = entities;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::set<kg::EntityId> candidate(pool.begin(),
                                     pool.begin() + static_cast<long>(answer_count));
    if (candidate.size() < entities.size()) {
      masked_set = std::move(candidate);
    }
  }
  if (masked_set.empty()) {
    throw Error(Error::Kind::sampling, "mask selection failed");
  }

  // Identifiers follow first appearance in the triple list.
  MaskResult out;
  std::map<kg::EntityId, std::string> token_of;
  int next = 1;
  auto slot = [&](kg::EntityId e) -> std::string {
    if (!masked_set.count(e)) return g.entity_label(e);
    auto it = token_of.find(e);
    if (it != token_of.end()) return it->second;
    std::string token = "[ENT" + std::to_string(next++) + "]";
    token_of.emplace(e, token);
    out.answer_map[token] = g.entity_label(e);
    return token;
  };
  for (const kg::Triple& t : triples) {
    SchemaTriple st;
    st.head = slot(t.head);
    st.relation = g.relation_label(t.relation);
    st.tail = slot(t.tail);
    out.masked.push_back(std::move(st));
  }
  out.answer_placeholder = "[ENT1]";
  return out;
}

std::vector<std::string> expand_answers(const kg::KnowledgeGraph& g,
                                        const MaskResult& masked) {
  // Restore every non-answer placeholder, then try each entity label in the
  // answer slot.
  auto resolve = [&](const std::string& node,
                     const std::string& candidate) -> std::string {
    if (node == masked.answer_placeholder) return candidate;
    auto it = masked.answer_map.find(node);
    if (it != masked.answer_map.end()) return it->second;
    return node;
  };
  std::vector<std::string> answers;
  for (size_t e = 0; e < g.entity_count(); ++e) {
    const std::string& label = g.entity_label(static_cast<kg::EntityId>(e));
    bool all_present = true;
    for (const SchemaTriple& st : masked.masked) {
      kg::EntityId h = g.entity_id(resolve(st.head, label));
      kg::RelationId r = g.relation_id(st.relation);
      kg::EntityId t = g.entity_id(resolve(st.tail, label));
      if (h == kg::kNoEntity || r < 0 || t == kg::kNoEntity ||
          !g.contains(kg::Triple{h, r, t})) {
        all_present = false;
        break;
      }
    }
    if (all_present) answers.push_back(label);
  }
  std::sort(answers.begin(), answers.end());
  return answers;
}

ReverseGenOutcome reverse_generate(projection::ChatClient& client,
                                   const projection::PromptSet& prompts,
                                   const std::vector<SchemaTriple>& masked,
                                   const std::string& answer_placeholder) {
  bool mentions_answer = false;
  for (const auto& t : masked) {
    if (t.head == answer_placeholder || t.tail == answer_placeholder) {
      mentions_answer = true;
    }
  }
  if (!mentions_answer) {
    throw Error(Error::Kind::argument,
                "answer placeholder does not occur in the masked triples");
  }
  std::string prompt = text::replace_all(
      prompts.reverse, "{{Triples}}", projection::render_triple_list(masked));
  prompt = text::replace_all(prompt, "{{AnswerEntity}}", answer_placeholder);

  auto completions = client.complete(prompt, 1, 1.0);
  if (completions.empty()) {
    throw Error(Error::Kind::transport, "reverse generation returned nothing");
  }
  std::string body = text::trim(completions[0]);

  std::string lowered = text::to_lower(body);
  if (lowered.find("no solution") != std::string::npos) {
    ReverseGenOutcome out;
    out.no_solution = true;
    return out;
  }

  // Expected: [(Sentence_1, Sentence_2, ...), Multi-Hop Question]
  size_t group_open = body.find('(');
  size_t group_close = body.find(')', group_open == std::string::npos
                                           ? 0
                                           : group_open);
  if (group_open == std::string::npos || group_close == std::string::npos) {
    throw Error(Error::Kind::parse,
                "reverse-generation completion lacks a sentence group");
  }
  std::string group = body.substr(group_open + 1, group_close - group_open - 1);
  std::vector<std::string> sentences;
  {
    size_t i = 0;
    while (i < group.size()) {
      if (group[i] == '"') {
        size_t end = group.find('"', i + 1);
        if (end == std::string::npos) break;
        std::string s = text::trim(group.substr(i + 1, end - i - 1));
        if (!s.empty()) sentences.push_back(s);
        i = end + 1;
      } else {
        ++i;
      }
    }
  }
  if (sentences.size() != masked.size()) {
    throw Error(Error::Kind::parse,
                "sentence count " + std::to_string(sentences.size()) +
                    " does not match triple count " +
                    std::to_string(masked.size()));
  }

  std::string rest = body.substr(group_close + 1);
  size_t bracket = rest.rfind(']');
  if (bracket != std::string::npos) rest = rest.substr(0, bracket);
  std::string question = text::trim(rest);
  while (!question.empty() && (question.front() == ',' || question.front() == '"')) {
    question.erase(question.begin());
    question = text::trim(question);
  }
  while (!question.empty() && question.back() == '"') {
    question.pop_back();
    question = text::trim(question);
  }
  if (question.empty()) {
    throw Error(Error::Kind::parse,
                "reverse-generation completion lacks the question");
  }

  ReverseGenOutcome out;
  out.question = question;
  out.assertions = std::move(sentences);
  return out;
}

Strategy label_strategy(const std::vector<std::string>& answers) {
  if (answers.empty()) {
    throw Error(Error::Kind::argument, "label_strategy needs >= 1 answer");
  }
  return answers.size() == 1 ? Strategy::precision : Strategy::breadth;
}

Strategy label_strategy_llm(projection::ChatClient& client,
                            const projection::PromptSet& prompts,
                            const std::string& question,
                            const std::vector<std::string>& assertions) {
  std::string prompt =
      text::replace_all(prompts.strategy, "{{Question}}", question);
  prompt = text::replace_all(prompt, "{{Assertions}}",
                             projection::render_string_list(assertions));
  auto completions = client.complete(prompt, 1, 0.0);
  if (completions.empty()) {
    throw Error(Error::Kind::transport, "strategy labeling returned nothing");
  }
  auto parsed = projection::strategy_from(completions[0]);
  if (!parsed) {
    throw Error(Error::Kind::parse,
                "strategy completion was neither Precision nor Breadth: " +
                    completions[0]);
  }
  return *parsed;
}

std::vector<SyntheticRecord> generate(const kg::KnowledgeGraph& g,
                                      projection::ChatClient& client,
                                      const projection::PromptSet& prompts,
                                      const Options& options, Stats* stats) {
  Stats local;
  local.requested = options.samples;
  std::vector<SyntheticRecord> records;

  for (size_t i = 0; i < options.samples; ++i) {
    uint64_t record_seed =
        hash::fnv1a64_mix(hash::fnv1a64_mix(hash::kFnvOffset, options.seed),
                          static_cast<uint64_t>(i));
    std::mt19937_64 rng(record_seed);
    size_t span = options.walk_max >= options.walk_min
                      ? options.walk_max - options.walk_min + 1
                      : 1;
    size_t length = options.walk_min + rng() % span;

    try {
      WalkSample sample = sample_walk(g, length, record_seed);
      if (sample.triples.empty()) continue;
      MaskResult masked =
          mask(g, sample.triples, options.mask_count, record_seed ^ 0x9e37);

      ReverseGenOutcome outcome;
      bool parsed = false;
      for (int attempt = 0; attempt <= options.retry_budget && !parsed;
           ++attempt) {
        try {
          outcome = reverse_generate(client, prompts, masked.masked,
                                     masked.answer_placeholder);
          parsed = true;
        } catch (const Error& e) {
          if (e.kind() != Error::Kind::parse ||
              attempt == options.retry_budget) {
            throw;
          }
        }
      }
      if (outcome.no_solution) {
        ++local.skipped_no_solution;
        continue;
      }

      SyntheticRecord record;
      record.id = "syn-" + std::to_string(i);
      record.question = outcome.question;
      record.assertions = outcome.assertions;
      record.masked_triples = masked.masked;
      record.source_triples = sample.triples;
      record.answers = expand_answers(g, masked);
      if (record.answers.empty()) {
        record.answers = {masked.answer_map.at(masked.answer_placeholder)};
      }
      record.strategy =
          options.llm_strategy
              ? label_strategy_llm(client, prompts, record.question,
                                   record.assertions)
              : label_strategy(record.answers);

      std::set<std::string> concrete;
      for (const auto& st : masked.masked) {
        for (const auto& node : {st.head, st.tail}) {
          if (!projection::is_placeholder(node)) concrete.insert(node);
        }
      }
      record.question_entities.assign(concrete.begin(), concrete.end());

      ++local.hop_histogram[record.masked_triples.size()];
      if (record.strategy == Strategy::precision) {
        ++local.precision_count;
      } else {
        ++local.breadth_count;
      }
      ++local.emitted;
      records.push_back(std::move(record));
    } catch (const Error& e) {
      if (e.kind() == Error::Kind::parse) {
        ++local.parse_failures;
        continue;
      }
      throw;
    }
  }
  if (stats) *stats = local;
  return records;
}

void save_records(const std::filesystem::path& path,
                  const std::vector<SyntheticRecord>& records,
                  const kg::KnowledgeGraph& g) {
  std::vector<kg::QuestionInstance> questions;
  for (const auto& r : records) {
    kg::QuestionInstance q;
    q.id = r.id;
    q.question = r.question;
    q.answers = r.answers;

    // Per-record subgraph: sampled triples plus the 1-hop neighborhood.
    std::vector<kg::Triple> subgraph = r.source_triples;
    std::unordered_set<kg::Triple, kg::TripleHash> have(subgraph.begin(),
                                                        subgraph.end());
    std::set<kg::EntityId> entities;
    for (const kg::Triple& t : r.source_triples) {
      entities.insert(t.head);
      entities.insert(t.tail);
    }
    for (kg::EntityId e : entities) {
      for (const kg::Triple& t : g.incident_edges(e)) {
        if (have.insert(t).second) subgraph.push_back(t);
      }
    }
    q.graph = kg::build_graph(g, subgraph);
    for (const auto& label : r.question_entities) {
      q.question_entities.push_back(q.graph.require_entity(label));
    }
    for (const kg::Triple& t : r.source_triples) {
      auto rec = g.record(t);
      q.ground_truth_path.push_back(kg::Triple{q.graph.entity_id(rec[0]),
                                               q.graph.relation_id(rec[1]),
                                               q.graph.entity_id(rec[2])});
    }
    questions.push_back(std::move(q));
  }
  kg::save_questions(path, questions);
}

std::string render_stats(const Stats& stats) {
  std::ostringstream os;
  os << "requested: " << stats.requested << "\n"
     << "emitted: " << stats.emitted << "\n"
     << "skipped (no solution): " << stats.skipped_no_solution << "\n"
     << "parse failures: " << stats.parse_failures << "\n";
  os << "hop histogram:";
  for (const auto& [hops, count] : stats.hop_histogram) {
    os << " " << hops << "->" << count;
  }
  os << "\nstrategies: Precision=" << stats.precision_count
     << " Breadth=" << stats.breadth_count << "\n";
  return os.str();
}

}  // namespace stem::datagen
