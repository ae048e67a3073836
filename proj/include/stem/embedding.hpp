#pragma once
// Text encoders (pluggable), vector math and exact top-N entity retrieval.
// The deterministic hashed n-gram backend keeps every test reproducible
// without a model; the remote backend lives in http_clients.hpp.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stem/kg_store.hpp"

namespace stem::embedding {

using Vector = std::vector<float>;

// Standard cosine. A zero vector on either side yields 0 so that degenerate
// labels never abort retrieval. Dimension mismatch raises an argument error.
double cosine_sim(const Vector& a, const Vector& b);

// Canonical "head | relation | tail" serialization fed to the encoder.
std::string verbalize(std::string_view head, std::string_view relation,
                      std::string_view tail);
std::string verbalize_triple(const kg::Triple& t, const kg::KnowledgeGraph& g);

class Encoder {
 public:
  virtual ~Encoder() = default;

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }

  // Deterministic per (encoder instance, text). Empty text is an argument
  // error.
  Vector encode(std::string_view text);
  virtual std::vector<Vector> encode_batch(
      const std::vector<std::string>& texts);

 protected:
  Encoder(std::string name, int dimension)
      : name_(std::move(name)), dimension_(dimension) {}
  virtual Vector encode_impl(std::string_view text) = 0;

 private:
  std::string name_;
  int dimension_;
};

// Seeded hash of character trigrams, signed-summed into `dimension` buckets
// and projected to the unit sphere. Lexically close strings land close in
// cosine space, which is what the tracing tests need.
class HashedNgramEncoder : public Encoder {
 public:
  explicit HashedNgramEncoder(int dimension = 1024, uint64_t seed = 0x5eed);

 protected:
  Vector encode_impl(std::string_view text) override;

 private:
  uint64_t seed_;
};

// On-disk vector cache keyed by (encoder name, text hash): binary records of
// (key digest, dimension, f32 payload, checksum). Corrupted records are
// dropped on load and re-encoded on demand.
class VectorCache {
 public:
  explicit VectorCache(std::filesystem::path file);

  std::optional<Vector> get(const std::string& encoder_name,
                            std::string_view text) const;
  void put(const std::string& encoder_name, std::string_view text,
           const Vector& v);

  void load();
  void save() const;

  size_t size() const;
  size_t dropped_records() const { return dropped_; }

 private:
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<std::array<uint8_t, 32>, Vector> entries_;
  size_t dropped_ = 0;
};

// Memoizing wrapper; retrieval re-encodes the same verbalizations heavily.
class CachingEncoder : public Encoder {
 public:
  CachingEncoder(Encoder& inner, VectorCache* disk_cache = nullptr);

 protected:
  Vector encode_impl(std::string_view text) override;

 private:
  Encoder& inner_;
  VectorCache* disk_cache_;
  std::mutex mutex_;
  std::map<std::string, Vector, std::less<>> memo_;
};

struct EntityIndex {
  std::string encoder_fingerprint;
  // One entry per catalog entity, id order.
  std::vector<Vector> vectors;
};

EntityIndex build_entity_index(const kg::KnowledgeGraph& g, Encoder& enc);

// Exact scan: the n highest-cosine entities (fewer when the catalog is
// smaller), descending score, ties broken by entity id.
std::vector<std::pair<kg::EntityId, double>> top_n_entities(
    const EntityIndex& idx, const Vector& query, size_t n);
std::vector<std::pair<kg::EntityId, double>> top_n_entities(
    const EntityIndex& idx, Encoder& enc, std::string_view query_label,
    size_t n);

}  // namespace stem::embedding
