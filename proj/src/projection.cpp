#include "stem/projection.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "stem/hash.hpp"
#include "stem/text.hpp"

namespace stem::projection {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  return s == Strategy::precision ? "Precision" : "Breadth";
}

std::optional<Strategy> strategy_from(std::string_view s) {
  std::string folded = text::to_lower(text::trim(s));
  if (folded == "precision") return Strategy::precision;
  if (folded == "breadth") return Strategy::breadth;
  return std::nullopt;
}

std::vector<std::string> placeholders_in(std::string_view s) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  size_t pos = 0;
  while ((pos = s.find("[ENT", pos)) != std::string_view::npos) {
    size_t digits = pos + 4;
    size_t end = digits;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) {
      ++end;
    }
    if (end > digits && end < s.size() && s[end] == ']') {
      std::string token(s.substr(pos, end - pos + 1));
      if (seen.insert(token).second) out.push_back(token);
      pos = end + 1;
    } else {
      pos += 4;
    }
  }
  return out;
}

bool is_placeholder(std::string_view node) {
  if (node.size() < 6 || !text::starts_with(node, "[ENT") ||
      node.back() != ']') {
    return false;
  }
  for (size_t i = 4; i + 1 < node.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(node[i]))) return false;
  }
  return true;
}

std::vector<std::string> SchemaGraph::concrete_nodes() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    if (!is_placeholder(n)) out.push_back(n);
  }
  return out;
}

SchemaGraph build_schema_graph(const std::vector<SchemaTriple>& triples) {
  SchemaGraph g;
  g.triples = triples;
  std::set<std::string> node_set;
  for (size_t i = 0; i < triples.size(); ++i) {
    node_set.insert(triples[i].head);
    node_set.insert(triples[i].tail);
    g.adjacency[triples[i].head].push_back(i);
    if (triples[i].tail != triples[i].head) {
      g.adjacency[triples[i].tail].push_back(i);
    }
  }
  g.nodes.assign(node_set.begin(), node_set.end());
  return g;
}

FixtureChatClient::FixtureChatClient(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open fixture file: " + file.string());
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("prompt_sha256") ||
        !j.contains("completions")) {
      throw Error(Error::Kind::parse, "malformed fixture record at line " +
                                          std::to_string(line_no) + " of " +
                                          file.string());
    }
    fixtures_[j["prompt_sha256"].get<std::string>()] =
        j["completions"].get<std::vector<std::string>>();
  }
}

std::vector<std::string> FixtureChatClient::complete(const std::string& prompt,
                                                     int n,
                                                     double /*temperature*/) {
  auto it = fixtures_.find(key_for(prompt));
  if (it == fixtures_.end()) {
    std::string preview = prompt.substr(0, 120);
    throw Error(Error::Kind::transport,
                "no fixture recorded for prompt sha256=" + key_for(prompt) +
                    " (prompt starts: " + preview + ")");
  }
  std::vector<std::string> out = it->second;
  if (n >= 0 && out.size() > static_cast<size_t>(n)) {
    out.resize(static_cast<size_t>(n));
  }
  return out;
}

void FixtureChatClient::add(const std::string& prompt,
                            std::vector<std::string> completions) {
  fixtures_[key_for(prompt)] = std::move(completions);
}

void FixtureChatClient::add_keyed(const std::string& prompt_sha256,
                                  std::vector<std::string> completions) {
  fixtures_[prompt_sha256] = std::move(completions);
}

void FixtureChatClient::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write fixture file: " + file.string());
  }
  for (const auto& [key, completions] : fixtures_) {
    json j;
    j["prompt_sha256"] = key;
    j["completions"] = completions;
    out << j.dump() << '\n';
  }
}

std::string FixtureChatClient::key_for(const std::string& prompt) {
  return hash::sha256_hex(prompt);
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open prompt template: " + path.string());
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

// Double-quoted segments of a completion, in order.
std::vector<std::string> quoted_strings(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '"') {
      size_t end = s.find('"', i + 1);
      if (end == std::string_view::npos) break;
      out.emplace_back(s.substr(i + 1, end - i - 1));
      i = end + 1;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

PromptSet load_prompts(const std::filesystem::path& dir) {
  PromptSet p;
  p.decompose = read_text_file(dir / "p1_decompose.txt");
  p.ground = read_text_file(dir / "p2_ground.txt");
  p.answer = read_text_file(dir / "p3_answer.txt");
  p.assertions = read_text_file(dir / "p4_assertions.txt");
  p.strategy = read_text_file(dir / "p5_strategy.txt");
  p.reverse = read_text_file(dir / "p6_reverse.txt");
  return p;
}

std::string render_string_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += '"';
    out += items[i];
    out += '"';
  }
  out += "]";
  return out;
}

std::string render_triple_list(const std::vector<SchemaTriple>& triples) {
  std::string out = "[";
  for (size_t i = 0; i < triples.size(); ++i) {
    if (i) out += ", ";
    out += "(\"" + triples[i].head + "\", \"" + triples[i].relation +
           "\", \"" + triples[i].tail + "\")";
  }
  out += "]";
  return out;
}

std::string render_decompose_prompt(const PromptSet& prompts,
                                    std::string_view question) {
  return text::replace_all(prompts.decompose, "{{Query}}", question);
}

std::string render_ground_prompt(const PromptSet& prompts,
                                 const std::vector<std::string>& assertions) {
  return text::replace_all(prompts.ground, "{{Assertions}}",
                           render_string_list(assertions));
}

PlanCandidate parse_plan(const std::string& raw) {
  std::vector<std::string> assertions;
  size_t last_quote_end = 0;
  {
    size_t i = 0;
    while (i < raw.size()) {
      if (raw[i] == '"') {
        size_t end = raw.find('"', i + 1);
        if (end == std::string::npos) break;
        std::string a = text::trim(raw.substr(i + 1, end - i - 1));
        if (!a.empty()) assertions.push_back(a);
        last_quote_end = end + 1;
        i = end + 1;
      } else {
        ++i;
      }
    }
  }
  if (assertions.empty()) {
    throw Error(Error::Kind::parse,
                "no quoted assertions found in completion");
  }
  std::string tail = text::to_lower(raw.substr(last_quote_end));
  bool has_precision = tail.find("precision") != std::string::npos;
  bool has_breadth = tail.find("breadth") != std::string::npos;
  if (has_precision == has_breadth) {
    throw Error(Error::Kind::parse,
                has_precision ? "ambiguous strategy literal in completion"
                              : "missing or unknown strategy literal");
  }
  PlanCandidate plan;
  plan.assertions = std::move(assertions);
  plan.strategy = has_precision ? Strategy::precision : Strategy::breadth;
  return plan;
}

std::vector<SchemaTriple> parse_schema_triples(const std::string& raw) {
  std::vector<SchemaTriple> out;
  size_t i = 0;
  bool in_quote = false;
  size_t group_start = std::string::npos;
  for (; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '"') {
      in_quote = !in_quote;
    } else if (!in_quote && c == '(') {
      group_start = i;
    } else if (!in_quote && c == ')' && group_start != std::string::npos) {
      auto fields =
          quoted_strings(std::string_view(raw).substr(group_start, i - group_start));
      if (fields.size() != 3) {
        throw Error(Error::Kind::parse,
                    "schema triple group must hold exactly 3 quoted fields, "
                    "got " + std::to_string(fields.size()));
      }
      SchemaTriple t;
      t.head = text::trim(fields[0]);
      t.relation = text::trim(fields[1]);
      t.tail = text::trim(fields[2]);
      if (t.relation.empty() || t.head.empty() || t.tail.empty()) {
        throw Error(Error::Kind::parse, "empty field in schema triple");
      }
      out.push_back(std::move(t));
      group_start = std::string::npos;
    }
  }
  if (out.empty()) {
    throw Error(Error::Kind::parse, "no schema triples found in completion");
  }
  return out;
}

namespace {

std::string dedup_key(const PlanCandidate& plan) {
  std::string key;
  for (const auto& a : plan.assertions) {
    key += text::collapse_whitespace(text::to_lower(a));
    key += '\x1f';
  }
  key += to_string(plan.strategy);
  return key;
}

}  // namespace

std::vector<PlanCandidate> decompose(ChatClient& client,
                                     const PromptSet& prompts,
                                     const std::string& question, int beam) {
  if (beam < 1) {
    throw Error(Error::Kind::argument, "beam must be >= 1");
  }
  std::string prompt = render_decompose_prompt(prompts, question);
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::vector<std::string> completions = client.complete(prompt, beam, 0.7);
    std::vector<PlanCandidate> candidates;
    std::set<std::string> seen;
    for (const auto& completion : completions) {
      try {
        PlanCandidate plan = parse_plan(completion);
        if (seen.insert(dedup_key(plan)).second) {
          candidates.push_back(std::move(plan));
        }
      } catch (const Error&) {
        // Unparseable beam entry; the remaining completions may still parse.
      }
    }
    if (!candidates.empty()) {
      if (candidates.size() > static_cast<size_t>(beam)) {
        candidates.resize(static_cast<size_t>(beam));
      }
      return candidates;
    }
  }
  // Default to Precision with the raw question as the single assertion.
  PlanCandidate fallback;
  fallback.assertions = {question};
  fallback.strategy = Strategy::precision;
  return {fallback};
}

std::vector<SchemaTriple> ground(ChatClient& client, const PromptSet& prompts,
                                 const std::vector<std::string>& assertions) {
  if (assertions.empty()) {
    throw Error(Error::Kind::argument, "ground requires >= 1 assertion");
  }
  std::string prompt = render_ground_prompt(prompts, assertions);
  std::vector<std::string> completions = client.complete(prompt, 1, 0.0);
  if (completions.empty()) {
    throw Error(Error::Kind::transport, "grounding returned no completion");
  }
  std::vector<SchemaTriple> triples = parse_schema_triples(completions[0]);

  std::set<std::string> allowed;
  for (const auto& a : assertions) {
    for (const auto& p : placeholders_in(a)) allowed.insert(p);
  }
  for (const auto& t : triples) {
    for (const auto& field : {t.head, t.relation, t.tail}) {
      for (const auto& p : placeholders_in(field)) {
        if (!allowed.count(p)) {
          throw Error(Error::Kind::contract,
                      "grounding invented placeholder " + p +
                          " absent from the source assertions");
        }
      }
    }
  }
  return triples;
}

}  // namespace stem::projection
