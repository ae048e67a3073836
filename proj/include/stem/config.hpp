#pragma once
// Declarative run configuration: one JSON file, environment-variable
// overrides for endpoints/secrets, flag overrides on top.

#include <cstdint>
#include <filesystem>
#include <string>

#include "stem/guidance.hpp"
#include "stem/tracer.hpp"

namespace stem::config {

struct Paths {
  std::filesystem::path graph;
  std::filesystem::path questions;
  std::filesystem::path fixtures;
  std::filesystem::path checkpoint;
  std::filesystem::path vector_cache;
  std::filesystem::path prompts_dir = "assets/prompts";
  std::filesystem::path output_dir = "out";
  std::filesystem::path training_manifest;
};

struct EncoderConfig {
  std::string backend = "deterministic";  // deterministic | http
  int dimension = 1024;
  uint64_t seed = 0x5eed;
  std::string endpoint;
  std::string path = "/embed";
  std::string model;
  std::string api_key;
  int timeout_seconds = 60;
  int max_retries = 3;
};

struct ChatConfig {
  std::string backend = "fixture";  // fixture | http
  std::string endpoint;
  std::string path = "/chat";
  std::string model;
  std::string api_key;
  int timeout_seconds = 60;
  int max_retries = 3;
};

struct EvalConfig {
  std::string coverage_mode = "undirected";  // exact | undirected
};

struct DatagenConfig {
  size_t samples = 5;
  size_t walk_min = 1;
  size_t walk_max = 3;
  size_t mask_count = 1;
  bool llm_strategy = false;
};

struct TrainConfig {
  int steps = 100;
  double grad_check_gate = 1e-4;
};

struct RunConfig {
  Paths paths;
  tracer::BiasConfig bias;
  gnn::GnnConfig gnn;
  EncoderConfig encoder;
  ChatConfig chat;
  EvalConfig eval;
  DatagenConfig datagen;
  TrainConfig train;
  int beam = 4;
  int jobs = 1;
  uint64_t seed = 42;
  bool trace = false;
};

// Loads the JSON file, then applies STEMKG_* environment overrides
// (CHAT_ENDPOINT, CHAT_API_KEY, CHAT_MODEL, EMBED_ENDPOINT, EMBED_API_KEY,
// EMBED_MODEL). Unknown keys are a config error.
RunConfig load_config(const std::filesystem::path& path);

// Which paths a subcommand needs to exist up front.
enum Needs : unsigned {
  kNeedsQuestions = 1u << 0,
  kNeedsGraph = 1u << 1,
  kNeedsFixtures = 1u << 2,
  kNeedsPrompts = 1u << 3,
  kNeedsManifest = 1u << 4,
};

// Validates numeric ranges and required path existence; throws config
// errors.
void validate(const RunConfig& cfg, unsigned needs);

}  // namespace stem::config
