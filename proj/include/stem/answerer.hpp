#pragma once
// Evidence linearization into root-to-leaf reasoning chains and final answer
// generation through the chat client.

#include <string>
#include <vector>

#include "stem/kg_store.hpp"
#include "stem/projection.hpp"
#include "stem/tracer.hpp"

namespace stem::answer {

struct Chain {
  std::vector<kg::Triple> triples;
  std::vector<kg::EntityId> nodes;  // traversal order; triples.size() + 1
};

struct ReasoningChains {
  std::vector<Chain> chains;

  bool empty() const { return chains.empty(); }
};

// DFS from each question entity present in the evidence; every maximal
// root-to-leaf simple path becomes one chain; triples reachable from no
// question entity are emitted as singleton chains. Child ordering is label
// sorted, so linearization is deterministic.
ReasoningChains linearize(const tracer::EvidenceGraph& evidence,
                          const std::vector<kg::EntityId>& question_entities,
                          const kg::KnowledgeGraph& g);

// "root → relation → node → relation → node" per chain, one chain per line.
std::string render_chains(const ReasoningChains& chains,
                          const kg::KnowledgeGraph& g);

// List-style completions parse as answer lists: bracketed lists first, then
// comma/"and"-separated prose, then line lists. A completion that defeats
// all three comes back as a single raw answer with the warning flag set.
struct ParsedAnswers {
  std::vector<std::string> answers;
  bool parse_warning = false;
};

ParsedAnswers parse_answers(const std::string& completion);

// The exact prompt generate_answer sends; exposed so replay fixtures can be
// recorded against it.
std::string render_answer_prompt(const projection::PromptSet& prompts,
                                 const std::string& question,
                                 const ReasoningChains& chains,
                                 const kg::KnowledgeGraph& g);

struct AnswerResult {
  std::vector<std::string> answers;
  bool parse_warning = false;
  size_t chains_used = 0;
  std::string raw_completion;
};

AnswerResult generate_answer(projection::ChatClient& client,
                             const projection::PromptSet& prompts,
                             const std::string& question,
                             const ReasoningChains& chains,
                             const kg::KnowledgeGraph& g);

}  // namespace stem::answer
