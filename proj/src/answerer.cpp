#include "stem/answerer.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "stem/text.hpp"

namespace stem::answer {

namespace {

struct DfsContext {
  const kg::KnowledgeGraph* g;
  const std::map<kg::EntityId, std::vector<kg::Triple>>* adjacency;
  std::unordered_set<kg::Triple, kg::TripleHash> used;  // per root
  std::vector<Chain>* chains;
};

void dfs(DfsContext& ctx, kg::EntityId node, Chain& path,
         std::unordered_set<kg::EntityId>& on_path) {
  bool extended = false;
  auto it = ctx.adjacency->find(node);
  if (it != ctx.adjacency->end()) {
    for (const kg::Triple& t : it->second) {
      if (ctx.used.count(t)) continue;
      kg::EntityId next = kg::get_tail_entity(t, node);
      if (on_path.count(next)) continue;  // keep chains simple
      ctx.used.insert(t);
      extended = true;
      path.triples.push_back(t);
      path.nodes.push_back(next);
      on_path.insert(next);
      dfs(ctx, next, path, on_path);
      on_path.erase(next);
      path.nodes.pop_back();
      path.triples.pop_back();
    }
  }
  if (!extended && !path.triples.empty()) {
    ctx.chains->push_back(path);
  }
}

}  // namespace

ReasoningChains linearize(const tracer::EvidenceGraph& evidence,
                          const std::vector<kg::EntityId>& question_entities,
                          const kg::KnowledgeGraph& g) {
  ReasoningChains out;
  if (evidence.triples.empty()) return out;

  std::map<kg::EntityId, std::vector<kg::Triple>> adjacency;
  for (const kg::Triple& t : evidence.triples) {
    adjacency[t.head].push_back(t);
    if (t.tail != t.head) adjacency[t.tail].push_back(t);
  }
  for (auto& [node, list] : adjacency) {
    std::sort(list.begin(), list.end(),
              [&g](const kg::Triple& a, const kg::Triple& b) {
                return g.record(a) < g.record(b);
              });
  }

  for (kg::EntityId root : question_entities) {
    if (!adjacency.count(root)) continue;
    DfsContext ctx{&g, &adjacency, {}, &out.chains};
    Chain path;
    path.nodes.push_back(root);
    std::unordered_set<kg::EntityId> on_path{root};
    dfs(ctx, root, path, on_path);
  }

  // Anything no chain reached becomes its own single-triple chain.
  std::unordered_set<kg::Triple, kg::TripleHash> covered;
  for (const Chain& c : out.chains) {
    covered.insert(c.triples.begin(), c.triples.end());
  }
  std::vector<kg::Triple> leftovers;
  for (const kg::Triple& t : evidence.triples) {
    if (!covered.count(t)) leftovers.push_back(t);
  }
  std::sort(leftovers.begin(), leftovers.end(),
            [&g](const kg::Triple& a, const kg::Triple& b) {
              return g.record(a) < g.record(b);
            });
  for (const kg::Triple& t : leftovers) {
    Chain c;
    c.nodes = {t.head, t.tail};
    c.triples = {t};
    out.chains.push_back(std::move(c));
  }
  return out;
}

std::string render_chains(const ReasoningChains& chains,
                          const kg::KnowledgeGraph& g) {
  std::string out;
  for (const Chain& chain : chains.chains) {
    if (!out.empty()) out += '\n';
    out += g.entity_label(chain.nodes[0]);
    for (size_t i = 0; i < chain.triples.size(); ++i) {
      out += " → ";
      out += g.relation_label(chain.triples[i].relation);
      out += " → ";
      out += g.entity_label(chain.nodes[i + 1]);
    }
  }
  return out;
}

namespace {

std::string strip_item(std::string s) {
  s = stem::text::trim(s);
  // Leading list markers.
  while (!s.empty() && (s.front() == '-' || s.front() == '*')) {
    s.erase(s.begin());
    s = stem::text::trim(s);
  }
  size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
    s = stem::text::trim(s.substr(i + 1));
  }
  while (!s.empty() && (s.back() == '.' || s.back() == ',')) s.pop_back();
  s = stem::text::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = stem::text::trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::vector<std::string> split_prose(const std::string& line) {
  std::vector<std::string> items;
  for (const std::string& part : stem::text::split(line, ',')) {
    // Each comma segment may still hold an "A and B" pair.
    std::string rest = part;
    size_t pos;
    while ((pos = rest.find(" and ")) != std::string::npos) {
      items.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + 5);
    }
    items.push_back(rest);
  }
  return items;
}

}  // namespace

ParsedAnswers parse_answers(const std::string& completion) {
  ParsedAnswers out;
  std::string body = stem::text::trim(completion);
  if (body.empty()) {
    out.parse_warning = true;
    return out;
  }

  std::vector<std::string> raw_items;
  size_t open = body.find('[');
  size_t close = body.rfind(']');
  if (open != std::string::npos && close != std::string::npos &&
      close > open) {
    std::string inner = body.substr(open + 1, close - open - 1);
    // Quoted items when present, otherwise comma-separated.
    std::vector<std::string> quoted;
    size_t i = 0;
    while (i < inner.size()) {
      if (inner[i] == '"') {
        size_t end = inner.find('"', i + 1);
        if (end == std::string::npos) break;
        quoted.push_back(inner.substr(i + 1, end - i - 1));
        i = end + 1;
      } else {
        ++i;
      }
    }
    raw_items = quoted.empty() ? stem::text::split(inner, ',') : quoted;
  } else {
    std::vector<std::string> lines;
    for (const std::string& line : stem::text::split(body, '\n')) {
      if (!stem::text::trim(line).empty()) lines.push_back(line);
    }
    if (lines.size() == 1) {
      raw_items = split_prose(lines[0]);
    } else {
      raw_items = lines;
    }
  }

  std::set<std::string> seen;
  for (const auto& item : raw_items) {
    std::string cleaned = strip_item(item);
    if (cleaned.empty()) continue;
    if (seen.insert(cleaned).second) out.answers.push_back(cleaned);
  }
  if (out.answers.empty()) {
    out.answers.push_back(body);
    out.parse_warning = true;
  }
  return out;
}

std::string render_answer_prompt(const projection::PromptSet& prompts,
                                 const std::string& question,
                                 const ReasoningChains& chains,
                                 const kg::KnowledgeGraph& g) {
  std::string prompt = stem::text::replace_all(prompts.answer, "{{Chains}}",
                                               render_chains(chains, g));
  return stem::text::replace_all(prompt, "{{Question}}", question);
}

AnswerResult generate_answer(projection::ChatClient& client,
                             const projection::PromptSet& prompts,
                             const std::string& question,
                             const ReasoningChains& chains,
                             const kg::KnowledgeGraph& g) {
  std::string prompt = render_answer_prompt(prompts, question, chains, g);
  std::vector<std::string> completions = client.complete(prompt, 1, 0.0);
  if (completions.empty()) {
    throw Error(Error::Kind::transport, "generation returned no completion");
  }
  ParsedAnswers parsed = parse_answers(completions[0]);
  AnswerResult result;
  result.answers = std::move(parsed.answers);
  result.parse_warning = parsed.parse_warning;
  result.chains_used = chains.chains.size();
  result.raw_completion = completions[0];
  return result;
}

}  // namespace stem::answer
