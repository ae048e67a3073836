#include "stem/eval.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "stem/text.hpp"

namespace stem::eval {

using nlohmann::json;

CoverageResult coverage_rate(const std::vector<kg::Triple>& ground_truth,
                             const std::vector<kg::Triple>& evidence,
                             CoverageMode mode) {
  if (ground_truth.empty()) return {0.0, true};
  std::unordered_set<kg::Triple, kg::TripleHash> have(evidence.begin(),
                                                      evidence.end());
  size_t covered = 0;
  for (const kg::Triple& t : ground_truth) {
    bool hit = have.count(t) > 0;
    if (!hit && mode == CoverageMode::undirected) {
      hit = have.count(kg::Triple{t.tail, t.relation, t.head}) > 0;
    }
    if (hit) ++covered;
  }
  return {static_cast<double>(covered) /
              static_cast<double>(ground_truth.size()),
          false};
}

namespace {

std::set<std::string> normalized_set(const std::vector<std::string>& items) {
  std::set<std::string> out;
  for (const auto& s : items) {
    std::string n = text::normalize_answer(s);
    if (!n.empty()) out.insert(n);
  }
  return out;
}

}  // namespace

int hit_at_1(const std::vector<std::string>& predicted,
             const std::vector<std::string>& gold) {
  if (predicted.empty()) return 0;
  std::string top = text::normalize_answer(predicted.front());
  if (top.empty()) return 0;
  for (const auto& g : gold) {
    if (text::normalize_answer(g) == top) return 1;
  }
  return 0;
}

double answer_f1(const std::vector<std::string>& predicted,
                 const std::vector<std::string>& gold) {
  std::set<std::string> pred = normalized_set(predicted);
  std::set<std::string> gset = normalized_set(gold);
  if (pred.empty() || gset.empty()) return 0.0;
  size_t common = 0;
  for (const auto& p : pred) {
    if (gset.count(p)) ++common;
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / pred.size();
  double recall = static_cast<double>(common) / gset.size();
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

bool schema_slot_matches(const std::string& schema_slot,
                         const std::string& concrete_label) {
  if (projection::is_placeholder(schema_slot)) return true;
  return text::normalize_answer(schema_slot) ==
         text::normalize_answer(concrete_label);
}

bool schema_triple_matches(const projection::SchemaTriple& s,
                           const kg::TripleRecord& gt) {
  if (s.relation != gt[1]) return false;
  if (schema_slot_matches(s.head, gt[0]) && schema_slot_matches(s.tail, gt[2])) {
    return true;
  }
  // Matching runs in an undirected context.
  return schema_slot_matches(s.head, gt[2]) && schema_slot_matches(s.tail, gt[0]);
}

// Hopcroft-Karp is overkill at this size; augmenting paths suffice.
size_t max_matching(const std::vector<std::vector<size_t>>& edges,
                    size_t right_size) {
  std::vector<int> match_right(right_size, -1);
  size_t total = 0;
  std::vector<char> visited;
  std::function<bool(size_t)> augment = [&](size_t left) -> bool {
    for (size_t r : edges[left]) {
      if (visited[r]) continue;
      visited[r] = 1;
      if (match_right[r] < 0 || augment(static_cast<size_t>(match_right[r]))) {
        match_right[r] = static_cast<int>(left);
        return true;
      }
    }
    return false;
  };
  for (size_t l = 0; l < edges.size(); ++l) {
    visited.assign(right_size, 0);
    if (augment(l)) ++total;
  }
  return total;
}

}  // namespace

SchemaPrf schema_prf(const std::vector<kg::TripleRecord>& ground_truth_path,
                     const std::vector<projection::SchemaTriple>& schema) {
  SchemaPrf out;
  if (ground_truth_path.empty() || schema.empty()) {
    out.degenerate = true;
    return out;
  }
  std::vector<std::vector<size_t>> edges(schema.size());
  for (size_t s = 0; s < schema.size(); ++s) {
    for (size_t g = 0; g < ground_truth_path.size(); ++g) {
      if (schema_triple_matches(schema[s], ground_truth_path[g])) {
        edges[s].push_back(g);
      }
    }
  }
  size_t common = max_matching(edges, ground_truth_path.size());
  out.precision = static_cast<double>(common) / schema.size();
  out.recall = static_cast<double>(common) / ground_truth_path.size();
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

AttributionMatrices attribution(
    const std::vector<AttributionRecord>& records) {
  if (records.empty()) {
    throw Error(Error::Kind::argument, "attribution requires >= 1 record");
  }
  AttributionMatrices out;
  double inv = 1.0 / static_cast<double>(records.size());
  for (const auto& r : records) {
    Matrix2x2& s = out.schema;
    if (r.schema_ok && r.answer_ok) s.valid_correct += inv;
    if (r.schema_ok && !r.answer_ok) s.valid_incorrect += inv;
    if (!r.schema_ok && r.answer_ok) s.invalid_correct += inv;
    if (!r.schema_ok && !r.answer_ok) s.invalid_incorrect += inv;
    Matrix2x2& e = out.evidence;
    if (r.evidence_ok && r.answer_ok) e.valid_correct += inv;
    if (r.evidence_ok && !r.answer_ok) e.valid_incorrect += inv;
    if (!r.evidence_ok && r.answer_ok) e.invalid_correct += inv;
    if (!r.evidence_ok && !r.answer_ok) e.invalid_incorrect += inv;
  }
  return out;
}

MetricsReport aggregate(const std::vector<QuestionEval>& rows) {
  MetricsReport report;
  report.questions = rows.size();
  if (rows.empty()) return report;

  double hit_sum = 0.0, f1_sum = 0.0, coverage_sum = 0.0;
  double sp = 0.0, sr = 0.0, sf = 0.0;
  size_t schema_counted = 0;
  size_t strategy_hits = 0;
  std::vector<AttributionRecord> attribution_rows;
  for (const auto& row : rows) {
    hit_sum += row.hit;
    f1_sum += row.f1;
    if (row.coverage.skipped) {
      ++report.coverage_skipped;
    } else {
      coverage_sum += row.coverage.rate;
      ++report.coverage_counted;
    }
    if (!row.schema.degenerate) {
      sp += row.schema.precision;
      sr += row.schema.recall;
      sf += row.schema.f1;
      ++schema_counted;
    }
    if (row.strategy_counted) {
      ++report.strategy_counted;
      if (row.strategy_ok) ++strategy_hits;
    }
    attribution_rows.push_back({row.schema_ok, row.evidence_ok, row.answer_ok});
  }
  report.hit_at_1 = hit_sum / rows.size();
  report.f1 = f1_sum / rows.size();
  report.coverage = report.coverage_counted
                        ? coverage_sum / report.coverage_counted
                        : 0.0;
  if (schema_counted) {
    report.schema.precision = sp / schema_counted;
    report.schema.recall = sr / schema_counted;
    report.schema.f1 = sf / schema_counted;
  } else {
    report.schema.degenerate = true;
  }
  report.strategy_accuracy =
      report.strategy_counted
          ? static_cast<double>(strategy_hits) / report.strategy_counted
          : 0.0;
  report.attribution = attribution(attribution_rows);
  return report;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

json matrix_json(const Matrix2x2& m) {
  return {{"valid_correct", m.valid_correct},
          {"valid_incorrect", m.valid_incorrect},
          {"invalid_correct", m.invalid_correct},
          {"invalid_incorrect", m.invalid_incorrect}};
}

}  // namespace

std::string render_report_table(const MetricsReport& report) {
  std::ostringstream os;
  auto line = [&os](const std::string& name, const std::string& value) {
    os << std::left << std::setw(24) << name << std::right << std::setw(10)
       << value << '\n';
  };
  os << std::string(34, '-') << '\n';
  line("questions", std::to_string(report.questions));
  line("hit@1", fmt(report.hit_at_1));
  line("answer f1", fmt(report.f1));
  line("coverage", fmt(report.coverage));
  line("coverage skipped", std::to_string(report.coverage_skipped));
  line("schema precision", fmt(report.schema.precision));
  line("schema recall", fmt(report.schema.recall));
  line("schema f1", fmt(report.schema.f1));
  line("strategy accuracy", fmt(report.strategy_accuracy));
  os << std::string(34, '-') << '\n';
  os << "attribution (schema x answer)\n";
  line("  valid/correct", fmt(report.attribution.schema.valid_correct));
  line("  valid/incorrect", fmt(report.attribution.schema.valid_incorrect));
  line("  invalid/correct", fmt(report.attribution.schema.invalid_correct));
  line("  invalid/incorrect",
       fmt(report.attribution.schema.invalid_incorrect));
  os << "attribution (evidence x answer)\n";
  line("  valid/correct", fmt(report.attribution.evidence.valid_correct));
  line("  valid/incorrect", fmt(report.attribution.evidence.valid_incorrect));
  line("  invalid/correct", fmt(report.attribution.evidence.invalid_correct));
  line("  invalid/incorrect",
       fmt(report.attribution.evidence.invalid_incorrect));
  os << std::string(34, '-') << '\n';
  return os.str();
}

void write_report_json(const std::filesystem::path& path,
                       const MetricsReport& report) {
  json j;
  j["questions"] = report.questions;
  j["hit_at_1"] = report.hit_at_1;
  j["f1"] = report.f1;
  j["coverage"] = report.coverage;
  j["coverage_counted"] = report.coverage_counted;
  j["coverage_skipped"] = report.coverage_skipped;
  j["schema_precision"] = report.schema.precision;
  j["schema_recall"] = report.schema.recall;
  j["schema_f1"] = report.schema.f1;
  j["strategy_accuracy"] = report.strategy_accuracy;
  j["strategy_counted"] = report.strategy_counted;
  j["attribution_schema"] = matrix_json(report.attribution.schema);
  j["attribution_evidence"] = matrix_json(report.attribution.evidence);
  std::ofstream out(path);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write report: " + path.string());
  }
  out << j.dump(2) << '\n';
}

void write_per_question_csv(const std::filesystem::path& path,
                            const std::vector<QuestionEval>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw Error(Error::Kind::config, "cannot write csv: " + path.string());
  }
  out << "id,hit,f1,coverage,coverage_skipped,schema_precision,schema_recall,"
         "schema_f1,schema_ok,evidence_ok,answer_ok,strategy,strategy_ok\n";
  for (const auto& r : rows) {
    out << r.id << ',' << r.hit << ',' << fmt(r.f1) << ','
        << fmt(r.coverage.rate) << ',' << (r.coverage.skipped ? 1 : 0) << ','
        << fmt(r.schema.precision) << ',' << fmt(r.schema.recall) << ','
        << fmt(r.schema.f1) << ',' << (r.schema_ok ? 1 : 0) << ','
        << (r.evidence_ok ? 1 : 0) << ',' << (r.answer_ok ? 1 : 0) << ','
        << r.strategy << ',' << (r.strategy_ok ? 1 : 0) << '\n';
  }
}

}  // namespace stem::eval
