#pragma once
// Retrieval/answer quality metrics: coverage rate, Hit@1, answer F1,
// schema-graph P/R/F1 with placeholder wildcards, strategy accuracy and the
// 2x2 error-attribution matrices.

#include <filesystem>
#include <string>
#include <vector>

#include "stem/kg_store.hpp"
#include "stem/projection.hpp"

namespace stem::eval {

enum class CoverageMode { exact, undirected };

struct CoverageResult {
  double rate = 0.0;
  bool skipped = false;  // empty ground truth is undefined, not zero
};

// |gt ∩ evidence| / |gt| on triple sets; undirected mode folds (h,r,t) with
// (t,r,h).
CoverageResult coverage_rate(const std::vector<kg::Triple>& ground_truth,
                             const std::vector<kg::Triple>& evidence,
                             CoverageMode mode);

// Normalized comparison: lowercase, punctuation stripped, whitespace
// collapsed (see text::normalize_answer).
int hit_at_1(const std::vector<std::string>& predicted,
             const std::vector<std::string>& gold);

// Set-based F1 over normalized answers; 0 when either side is empty.
double answer_f1(const std::vector<std::string>& predicted,
                 const std::vector<std::string>& gold);

struct SchemaPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // one side empty
};

// Placeholder entity slots act as wildcards; relations must match exactly;
// concrete entity labels compare after normalization. The intersection is a
// maximum bipartite matching so one schema triple never double-counts.
SchemaPrf schema_prf(const std::vector<kg::TripleRecord>& ground_truth_path,
                     const std::vector<projection::SchemaTriple>& schema);

struct AttributionRecord {
  bool schema_ok = false;
  bool evidence_ok = false;
  bool answer_ok = false;
};

struct Matrix2x2 {
  double valid_correct = 0.0;
  double valid_incorrect = 0.0;
  double invalid_correct = 0.0;
  double invalid_incorrect = 0.0;

  double sum() const {
    return valid_correct + valid_incorrect + invalid_correct +
           invalid_incorrect;
  }
};

struct AttributionMatrices {
  Matrix2x2 schema;    // schema-valid x answer-correct proportions
  Matrix2x2 evidence;  // evidence-valid x answer-correct proportions
};

AttributionMatrices attribution(const std::vector<AttributionRecord>& records);

struct QuestionEval {
  std::string id;
  int hit = 0;
  double f1 = 0.0;
  CoverageResult coverage;
  SchemaPrf schema;
  bool schema_ok = false;
  bool evidence_ok = false;
  bool answer_ok = false;
  std::string strategy;
  bool strategy_counted = false;
  bool strategy_ok = false;
};

struct MetricsReport {
  size_t questions = 0;
  double hit_at_1 = 0.0;
  double f1 = 0.0;
  double coverage = 0.0;
  size_t coverage_counted = 0;
  size_t coverage_skipped = 0;
  SchemaPrf schema;   // averaged P/R/F1 over questions with defined values
  double strategy_accuracy = 0.0;
  size_t strategy_counted = 0;
  AttributionMatrices attribution;
};

MetricsReport aggregate(const std::vector<QuestionEval>& rows);

std::string render_report_table(const MetricsReport& report);
void write_report_json(const std::filesystem::path& path,
                       const MetricsReport& report);
void write_per_question_csv(const std::filesystem::path& path,
                            const std::vector<QuestionEval>& rows);

}  // namespace stem::eval
