#pragma once
// Semantic-to-structural projection: question decomposition into atomic
// assertions plus an answer strategy, symbolic grounding of assertions into
// schema triples, and schema-graph assembly. The two LLM stages are plain
// chat completions behind ChatClient; replay fixtures make them
// deterministic offline.

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stem/error.hpp"

namespace stem::projection {

enum class Strategy { precision, breadth };

std::string_view to_string(Strategy s);
std::optional<Strategy> strategy_from(std::string_view s);  // case-insensitive

// [ENT<k>] tokens appearing in a text, in order of appearance, deduplicated.
std::vector<std::string> placeholders_in(std::string_view text);
bool is_placeholder(std::string_view node);

struct PlanCandidate {
  std::vector<std::string> assertions;
  Strategy strategy = Strategy::precision;

  bool operator==(const PlanCandidate&) const = default;
};

struct SchemaTriple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const SchemaTriple&) const = default;
};

struct SchemaGraph {
  std::vector<SchemaTriple> triples;
  // Distinct node strings (labels and placeholders), sorted.
  std::vector<std::string> nodes;
  // Node -> indices into `triples` of incident edges, indices ascending.
  std::map<std::string, std::vector<size_t>> adjacency;

  bool empty() const { return triples.empty(); }
  std::vector<std::string> concrete_nodes() const;
};

SchemaGraph build_schema_graph(const std::vector<SchemaTriple>& triples);

class ChatClient {
 public:
  virtual ~ChatClient() = default;

  // Up to n completions for the prompt. Implementations must be
  // deterministic at temperature 0.
  virtual std::vector<std::string> complete(const std::string& prompt, int n,
                                            double temperature) = 0;
};

// Replays recorded completions keyed by sha256 of the exact prompt text.
class FixtureChatClient : public ChatClient {
 public:
  FixtureChatClient() = default;
  explicit FixtureChatClient(const std::filesystem::path& file);

  std::vector<std::string> complete(const std::string& prompt, int n,
                                    double temperature) override;

  void add(const std::string& prompt, std::vector<std::string> completions);
  void add_keyed(const std::string& prompt_sha256,
                 std::vector<std::string> completions);
  void save(const std::filesystem::path& file) const;
  size_t size() const { return fixtures_.size(); }

  static std::string key_for(const std::string& prompt);

 private:
  std::map<std::string, std::vector<std::string>> fixtures_;
};

// Prompt templates loaded from text assets; slots use {{Name}} syntax.
struct PromptSet {
  std::string decompose;  // {{Query}}
  std::string ground;     // {{Assertions}}
  std::string answer;     // {{Chains}}, {{Question}}
  std::string assertions; // {{Query}}, {{Triples}}
  std::string strategy;   // {{Question}}, {{Assertions}}
  std::string reverse;    // {{Triples}}, {{AnswerEntity}}
};

PromptSet load_prompts(const std::filesystem::path& dir);

std::string render_decompose_prompt(const PromptSet& prompts,
                                    std::string_view question);
std::string render_ground_prompt(const PromptSet& prompts,
                                 const std::vector<std::string>& assertions);

// Renders a list of strings the way all prompts expect: ["a", "b"].
std::string render_string_list(const std::vector<std::string>& items);
std::string render_triple_list(const std::vector<SchemaTriple>& triples);

// Parses one completion of the decomposition stage: a quoted assertion list
// followed by a Precision/Breadth literal. Missing assertions or an unknown
// strategy raise parse errors.
PlanCandidate parse_plan(const std::string& raw);

// Parses the grounding completion: parenthesized 3-tuples of quoted strings.
std::vector<SchemaTriple> parse_schema_triples(const std::string& raw);

// Beam-search decomposition. Up to `beam` distinct candidates, deduplicated
// by normalized assertion text + strategy. When every completion fails to
// parse for 5 consecutive attempts, falls back to a single Precision
// candidate carrying the raw question.
std::vector<PlanCandidate> decompose(ChatClient& client,
                                     const PromptSet& prompts,
                                     const std::string& question, int beam);

// Grounds assertions into schema triples at temperature 0. A placeholder in
// the output that does not occur in any input assertion is a validation
// error.
std::vector<SchemaTriple> ground(ChatClient& client, const PromptSet& prompts,
                                 const std::vector<std::string>& assertions);

}  // namespace stem::projection
