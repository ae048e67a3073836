#include "stem/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "json.hpp"
#include "stem/hash.hpp"
#include "stem/http_clients.hpp"
#include "stem/text.hpp"

namespace stem::pipeline {

using nlohmann::json;

Runtime make_runtime(const config::RunConfig& cfg) {
  Runtime rt;
  rt.cfg = cfg;

  if (!cfg.paths.vector_cache.empty()) {
    rt.vector_cache =
        std::make_unique<embedding::VectorCache>(cfg.paths.vector_cache);
    rt.vector_cache->load();
  }

  if (cfg.encoder.backend == "http") {
    http::Endpoint ep;
    ep.base_url = cfg.encoder.endpoint;
    ep.path = cfg.encoder.path;
    ep.api_key = cfg.encoder.api_key;
    ep.model = cfg.encoder.model;
    ep.timeout_seconds = cfg.encoder.timeout_seconds;
    ep.max_retries = cfg.encoder.max_retries;
    rt.base_encoder = std::make_unique<http::HttpEncoder>(
        ep, cfg.encoder.dimension, rt.vector_cache.get());
  } else {
    rt.base_encoder = std::make_unique<embedding::HashedNgramEncoder>(
        cfg.encoder.dimension, cfg.encoder.seed);
  }
  rt.encoder = std::make_unique<embedding::CachingEncoder>(
      *rt.base_encoder, rt.vector_cache.get());

  if (cfg.chat.backend == "http") {
    http::Endpoint ep;
    ep.base_url = cfg.chat.endpoint;
    ep.path = cfg.chat.path;
    ep.api_key = cfg.chat.api_key;
    ep.model = cfg.chat.model;
    ep.timeout_seconds = cfg.chat.timeout_seconds;
    ep.max_retries = cfg.chat.max_retries;
    rt.chat = std::make_unique<http::HttpChatClient>(ep);
  } else {
    rt.chat =
        std::make_unique<projection::FixtureChatClient>(cfg.paths.fixtures);
  }

  rt.prompts = projection::load_prompts(cfg.paths.prompts_dir);

  if (!cfg.paths.checkpoint.empty() &&
      std::filesystem::exists(cfg.paths.checkpoint)) {
    rt.gnn_params = gnn::load_checkpoint(cfg.paths.checkpoint);
  } else {
    rt.guidance_fallback = true;
  }
  return rt;
}

gnn::GuidanceGraph build_guidance(Runtime& rt, const kg::QuestionInstance& q,
                                  const std::vector<PlanRecord>& plans,
                                  bool* used_fallback) {
  std::vector<projection::SchemaTriple> unioned;
  std::set<projection::SchemaTriple> seen;
  for (const auto& plan : plans) {
    if (plan.ground_failed) continue;
    for (const auto& t : plan.schema_triples) {
      if (seen.insert(t).second) unioned.push_back(t);
    }
  }
  if (!rt.gnn_params || unioned.empty()) {
    if (used_fallback) *used_fallback = true;
    return gnn::uniform_guidance(q.graph);
  }
  if (used_fallback) *used_fallback = false;

  const gnn::GnnParams& params = *rt.gnn_params;
  std::vector<gnn::DVec> features;
  for (const auto& t : unioned) {
    features.push_back(gnn::embed_triple_feature(params, t, rt.enc()));
  }
  gnn::DVec pooled = gnn::pool_query(features);
  auto init =
      gnn::init_features(params, q.graph, q.question_entities, pooled, rt.enc());
  gnn::Matrix states = gnn::forward(params, q.graph, init.entity, init.relation);
  std::vector<double> probs = gnn::node_probabilities(params, states);
  return gnn::select_guidance(q.graph, probs, unioned.size());
}

QuestionResult run_question(Runtime& rt, const kg::QuestionInstance& q) {
  QuestionResult result;
  result.id = q.id;
  try {
    auto candidates =
        projection::decompose(*rt.chat, rt.prompts, q.question, rt.cfg.beam);
    for (const auto& candidate : candidates) {
      PlanRecord record;
      record.candidate = candidate;
      try {
        record.schema_triples =
            projection::ground(*rt.chat, rt.prompts, candidate.assertions);
      } catch (const Error& e) {
        record.ground_failed = true;
        record.ground_error = e.what();
      }
      result.plans.push_back(std::move(record));
    }

    gnn::GuidanceGraph guidance =
        build_guidance(rt, q, result.plans, &result.guidance_fallback);
    if (result.guidance_fallback && !rt.gnn_params) {
      std::cerr << "warning: no checkpoint loaded; using uniform guidance for "
                << q.id << "\n";
    }

    std::vector<tracer::Plan> plans;
    for (const auto& record : result.plans) {
      if (record.ground_failed) continue;
      tracer::Plan plan;
      plan.schema = projection::build_schema_graph(record.schema_triples);
      plan.strategy = record.candidate.strategy;
      plans.push_back(std::move(plan));
    }

    if (!plans.empty()) {
      auto idx = embedding::build_entity_index(q.graph, rt.enc());
      result.evidence =
          tracer::retrieve(plans, q, guidance, idx, rt.enc(), rt.cfg.bias,
                           rt.cfg.trace ? &result.trace : nullptr);
    } else {
      result.evidence.graph = kg::build_graph(q.graph, {});
    }

    answer::ReasoningChains chains =
        answer::linearize(result.evidence, q.question_entities, q.graph);
    result.answer = answer::generate_answer(*rt.chat, rt.prompts, q.question,
                                            chains, q.graph);
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

namespace {

json triple_json(const kg::KnowledgeGraph& g, const kg::Triple& t) {
  auto rec = g.record(t);
  return json::array({rec[0], rec[1], rec[2]});
}

json schema_triple_json(const projection::SchemaTriple& t) {
  return json::array({t.head, t.relation, t.tail});
}

}  // namespace

void write_outputs(const std::filesystem::path& dir,
                   const std::vector<QuestionResult>& results,
                   const std::vector<kg::QuestionInstance>& questions,
                   bool write_traces) {
  std::filesystem::create_directories(dir);
  std::ofstream evidence_out(dir / "evidence.jsonl");
  std::ofstream answers_out(dir / "answers.jsonl");
  std::ofstream plans_out(dir / "plans.jsonl");
  std::ofstream traces_out;
  if (write_traces) traces_out.open(dir / "traces.jsonl");

  for (size_t i = 0; i < results.size(); ++i) {
    const QuestionResult& r = results[i];
    const kg::KnowledgeGraph& g = questions[i].graph;

    json evidence;
    evidence["question_id"] = r.id;
    evidence["strategy"] =
        std::string(projection::to_string(r.evidence.strategy));
    evidence["failed"] = r.failed;
    if (r.failed) evidence["error"] = r.error;
    json triples = json::array();
    for (size_t t = 0; t < r.evidence.triples.size(); ++t) {
      auto rec = g.record(r.evidence.triples[t]);
      const tracer::Provenance& prov = r.evidence.provenance[t];
      triples.push_back({{"head", rec[0]},
                         {"relation", rec[1]},
                         {"tail", rec[2]},
                         {"score", prov.step_score},
                         {"plan_idx", prov.plan_idx},
                         {"anchor", prov.anchor_entity}});
    }
    evidence["triples"] = triples;
    evidence_out << evidence.dump() << '\n';

    json answer;
    answer["question_id"] = r.id;
    answer["answers"] = r.answer.answers;
    answer["chains_used"] = r.answer.chains_used;
    answer["parse_warning"] = r.answer.parse_warning;
    answers_out << answer.dump() << '\n';

    json plans;
    plans["question_id"] = r.id;
    json plan_list = json::array();
    for (const auto& plan : r.plans) {
      json p;
      p["assertions"] = plan.candidate.assertions;
      p["strategy"] =
          std::string(projection::to_string(plan.candidate.strategy));
      p["ground_failed"] = plan.ground_failed;
      json st = json::array();
      for (const auto& t : plan.schema_triples) {
        st.push_back(schema_triple_json(t));
      }
      p["schema_triples"] = st;
      plan_list.push_back(std::move(p));
    }
    plans["plans"] = plan_list;
    plans_out << plans.dump() << '\n';

    if (write_traces) {
      json trace;
      trace["question_id"] = r.id;
      json steps = json::array();
      for (const auto& step : r.trace.steps) {
        json s;
        s["schema_edge"] = step.schema_edge;
        s["frontier_node"] = step.frontier_node;
        s["frontier_entity"] = step.frontier_entity;
        json cands = json::array();
        for (const auto& c : step.candidates) {
          cands.push_back({{"triple", {c.triple[0], c.triple[1], c.triple[2]}},
                           {"raw_sim", c.raw_sim},
                           {"bias", c.bias},
                           {"total", c.total},
                           {"admissible", c.admissible},
                           {"committed", c.committed}});
        }
        s["candidates"] = cands;
        steps.push_back(std::move(s));
      }
      trace["steps"] = steps;
      traces_out << trace.dump() << '\n';
    }
  }
}

int cmd_index(const config::RunConfig& cfg) {
  config::validate(cfg, config::kNeedsQuestions);
  if (cfg.paths.vector_cache.empty()) {
    throw Error(Error::Kind::config,
                "cmd_index requires paths.vector_cache");
  }
  Runtime rt = make_runtime(cfg);
  auto questions = kg::load_questions(cfg.paths.questions);

  size_t encoded = 0, hits = 0;
  for (const auto& q : questions) {
    for (const auto& label : q.graph.entity_labels()) {
      if (rt.vector_cache->get(rt.base_encoder->name(), label)) {
        ++hits;
        continue;
      }
      embedding::Vector v = rt.base_encoder->encode(label);
      rt.vector_cache->put(rt.base_encoder->name(), label, v);
      ++encoded;
    }
  }
  rt.vector_cache->save();
  std::cout << "indexed " << encoded << " new entity vectors (" << hits
            << " cache hits, " << rt.vector_cache->dropped_records()
            << " corrupted records repaired)\n";
  return kExitOk;
}

int cmd_run(const config::RunConfig& cfg,
            const std::vector<std::string>& question_ids) {
  config::validate(cfg, config::kNeedsQuestions | config::kNeedsFixtures |
                            config::kNeedsPrompts);
  Runtime rt = make_runtime(cfg);
  auto all_questions = kg::load_questions(cfg.paths.questions);

  std::vector<kg::QuestionInstance> questions;
  if (question_ids.empty()) {
    questions = std::move(all_questions);
  } else {
    std::set<std::string> wanted(question_ids.begin(), question_ids.end());
    for (auto& q : all_questions) {
      if (wanted.count(q.id)) questions.push_back(std::move(q));
    }
  }
  if (questions.empty()) {
    write_outputs(cfg.paths.output_dir, {}, {}, cfg.trace);
    std::cout << "no questions selected; wrote empty outputs\n";
    return kExitOk;
  }

  std::vector<QuestionResult> results(questions.size());
  int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < questions.size(); ++i) {
      results[i] = run_question(rt, questions[i]);
    }
  } else {
    // Question-level pool; each worker owns a runtime so chat/encoder state
    // never crosses threads. Results land in input order.
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&questions, &results, &next, &cfg]() {
        Runtime local = make_runtime(cfg);
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= questions.size()) break;
          results[i] = run_question(local, questions[i]);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  write_outputs(cfg.paths.output_dir, results, questions, cfg.trace);
  size_t failed = 0;
  for (const auto& r : results) {
    if (r.failed) ++failed;
  }
  std::cout << "ran " << results.size() << " questions, " << failed
            << " failed\n";
  if (failed == results.size()) return kExitRuntime;
  return failed ? kExitPartial : kExitOk;
}

int cmd_eval(const config::RunConfig& cfg,
             const std::filesystem::path& run_dir) {
  config::validate(cfg, config::kNeedsQuestions);
  std::filesystem::path dir =
      run_dir.empty() ? cfg.paths.output_dir : run_dir;
  auto questions = kg::load_questions(cfg.paths.questions);

  auto load_jsonl = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) {
      throw Error(Error::Kind::config, "missing run output: " + p.string());
    }
    std::map<std::string, json> by_id;
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("question_id")) {
        throw Error(Error::Kind::parse,
                    "malformed run record in " + p.string());
      }
      by_id[j["question_id"].get<std::string>()] = std::move(j);
    }
    return by_id;
  };
  auto evidence_by_id = load_jsonl(dir / "evidence.jsonl");
  auto answers_by_id = load_jsonl(dir / "answers.jsonl");
  auto plans_by_id = load_jsonl(dir / "plans.jsonl");
  if (evidence_by_id.empty()) {
    throw Error(Error::Kind::config, "run output holds no records");
  }

  eval::CoverageMode mode = cfg.eval.coverage_mode == "exact"
                                ? eval::CoverageMode::exact
                                : eval::CoverageMode::undirected;

  std::vector<eval::QuestionEval> rows;
  for (const auto& q : questions) {
    auto ev = evidence_by_id.find(q.id);
    auto an = answers_by_id.find(q.id);
    auto pl = plans_by_id.find(q.id);
    if (ev == evidence_by_id.end() || an == answers_by_id.end()) continue;

    eval::QuestionEval row;
    row.id = q.id;

    std::vector<std::string> predicted =
        an->second.value("answers", std::vector<std::string>{});
    row.hit = eval::hit_at_1(predicted, q.answers);
    row.f1 = eval::answer_f1(predicted, q.answers);
    row.answer_ok = row.hit == 1;

    std::vector<kg::Triple> evidence_triples;
    for (const auto& t : ev->second.value("triples", json::array())) {
      kg::Triple triple{q.graph.entity_id(t.value("head", "")),
                        q.graph.relation_id(t.value("relation", "")),
                        q.graph.entity_id(t.value("tail", ""))};
      if (triple.head != kg::kNoEntity && triple.relation >= 0 &&
          triple.tail != kg::kNoEntity) {
        evidence_triples.push_back(triple);
      }
    }
    row.coverage = eval::coverage_rate(q.ground_truth_path, evidence_triples,
                                       mode);
    row.evidence_ok = !row.coverage.skipped && row.coverage.rate >= 1.0;

    std::vector<projection::SchemaTriple> schema_union;
    std::set<projection::SchemaTriple> seen;
    if (pl != plans_by_id.end()) {
      for (const auto& plan : pl->second.value("plans", json::array())) {
        for (const auto& st : plan.value("schema_triples", json::array())) {
          projection::SchemaTriple t{st[0].get<std::string>(),
                                     st[1].get<std::string>(),
                                     st[2].get<std::string>()};
          if (seen.insert(t).second) schema_union.push_back(t);
        }
      }
    }
    std::vector<kg::TripleRecord> gt_records;
    for (const auto& t : q.ground_truth_path) {
      gt_records.push_back(q.graph.record(t));
    }
    row.schema = eval::schema_prf(gt_records, schema_union);
    row.schema_ok = !row.schema.degenerate && row.schema.recall >= 1.0;

    row.strategy = ev->second.value("strategy", "");
    row.strategy_counted = !q.answers.empty() && !row.strategy.empty();
    if (row.strategy_counted) {
      std::string expected = q.answers.size() == 1 ? "Precision" : "Breadth";
      row.strategy_ok = row.strategy == expected;
    }
    rows.push_back(std::move(row));
  }

  eval::MetricsReport report = eval::aggregate(rows);
  std::cout << eval::render_report_table(report);
  std::filesystem::create_directories(dir);
  eval::write_report_json(dir / "report.json", report);
  eval::write_per_question_csv(dir / "per_question.csv", rows);
  return kExitOk;
}

int cmd_train_gnn(const config::RunConfig& cfg) {
  config::validate(cfg, config::kNeedsQuestions | config::kNeedsManifest);
  if (cfg.paths.checkpoint.empty()) {
    throw Error(Error::Kind::config,
                "cmd_train_gnn requires paths.checkpoint");
  }
  Runtime rt = make_runtime(cfg);
  auto questions = kg::load_questions(cfg.paths.questions);
  std::map<std::string, const kg::QuestionInstance*> by_id;
  for (const auto& q : questions) by_id[q.id] = &q;

  std::vector<gnn::GnnInstance> instances;
  std::ifstream manifest(cfg.paths.training_manifest);
  std::string line;
  size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("question_id")) {
      throw Error(Error::Kind::parse,
                  "malformed manifest record at line " +
                      std::to_string(line_no));
    }
    auto it = by_id.find(j["question_id"].get<std::string>());
    if (it == by_id.end()) {
      throw Error(Error::Kind::lookup,
                  "manifest names unknown question '" +
                      j["question_id"].get<std::string>() + "'");
    }
    const kg::QuestionInstance& q = *it->second;
    gnn::GnnInstance inst;
    inst.graph = &q.graph;
    inst.question_entities = q.question_entities;
    inst.schema_triples = gnn::mask_path_for_training(
        q.graph, q.ground_truth_path, q.question_entities);
    if (inst.schema_triples.empty()) {
      throw Error(Error::Kind::argument,
                  "question '" + q.id + "' has no ground-truth path to train on");
    }
    inst.labels.assign(q.graph.entity_count(), 0);
    for (const auto& label :
         j.value("positive_entity_ids", std::vector<std::string>{})) {
      inst.labels[static_cast<size_t>(q.graph.require_entity(label))] = 1;
    }
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) {
    throw Error(Error::Kind::config, "training manifest holds no instances");
  }

  gnn::GnnParams params = gnn::GnnParams::init(cfg.gnn);
  gnn::TrainOptions options;
  options.steps = cfg.train.steps;
  options.learning_rate = cfg.gnn.learning_rate;
  gnn::TrainResult result = gnn::train(params, instances, rt.enc(), options);
  for (size_t s = 0; s < result.loss_curve.size(); ++s) {
    std::cout << "step " << s << " loss " << result.loss_curve[s] << "\n";
  }

  auto report = gnn::grad_check(params, instances.front(), rt.enc());
  std::cout << "grad check max rel error " << report.max_rel_error << " ("
            << report.worst_block << ")\n";
  if (report.max_rel_error >= cfg.train.grad_check_gate) {
    std::cerr << "gradient check failed the " << cfg.train.grad_check_gate
              << " gate; not saving\n";
    return kExitRuntime;
  }
  gnn::save_checkpoint(cfg.paths.checkpoint, params);
  std::cout << "checkpoint written to " << cfg.paths.checkpoint << "\n";
  return kExitOk;
}

int cmd_datagen(const config::RunConfig& cfg) {
  config::validate(cfg, config::kNeedsGraph | config::kNeedsFixtures |
                            config::kNeedsPrompts);
  Runtime rt = make_runtime(cfg);
  kg::KnowledgeGraph g = kg::KnowledgeGraph::load(cfg.paths.graph);

  datagen::Options options;
  options.samples = cfg.datagen.samples;
  options.walk_min = cfg.datagen.walk_min;
  options.walk_max = cfg.datagen.walk_max;
  options.mask_count = cfg.datagen.mask_count;
  options.llm_strategy = cfg.datagen.llm_strategy;
  options.seed = cfg.seed;

  datagen::Stats stats;
  auto records = datagen::generate(g, *rt.chat, rt.prompts, options, &stats);
  std::filesystem::create_directories(cfg.paths.output_dir);
  datagen::save_records(cfg.paths.output_dir / "synthetic_questions.jsonl",
                        records, g);
  std::cout << datagen::render_stats(stats);
  if (records.empty()) {
    std::cerr << "no records survived generation\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace stem::pipeline
