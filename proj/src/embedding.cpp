#include "stem/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "stem/hash.hpp"
#include "stem/text.hpp"

namespace stem::embedding {

double cosine_sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(Error::Kind::argument,
                "cosine_sim dimension mismatch: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(sim, -1.0, 1.0);
}

std::string verbalize(std::string_view head, std::string_view relation,
                      std::string_view tail) {
  std::string out;
  out.reserve(head.size() + relation.size() + tail.size() + 6);
  out.append(head);
  out.append(" | ");
  out.append(relation);
  out.append(" | ");
  out.append(tail);
  return out;
}

std::string verbalize_triple(const kg::Triple& t,
                             const kg::KnowledgeGraph& g) {
  auto rec = g.record(t);
  return verbalize(rec[0], rec[1], rec[2]);
}

Vector Encoder::encode(std::string_view text) {
  if (text.empty()) {
    throw Error(Error::Kind::argument, "cannot encode empty text");
  }
  return encode_impl(text);
}

std::vector<Vector> Encoder::encode_batch(
    const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode(t));
  return out;
}

HashedNgramEncoder::HashedNgramEncoder(int dimension, uint64_t seed)
    : Encoder("hashed-ngram-" + std::to_string(seed), dimension),
      seed_(seed) {}

Vector HashedNgramEncoder::encode_impl(std::string_view text) {
  Vector v(static_cast<size_t>(dimension()), 0.0f);
  std::string folded = "\x02" + text::to_lower(text) + "\x03";
  const size_t n = 3;
  uint64_t base = hash::fnv1a64_mix(hash::kFnvOffset, seed_);
  size_t grams = folded.size() >= n ? folded.size() - n + 1 : 1;
  for (size_t i = 0; i < grams; ++i) {
    std::string_view gram(folded.data() + i, std::min(n, folded.size() - i));
    uint64_t h = hash::fnv1a64(gram, base);
    size_t idx = static_cast<size_t>(h % static_cast<uint64_t>(dimension()));
    v[idx] += (h >> 63) ? 1.0f : -1.0f;
  }
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm > 0.0) {
    float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (float& x : v) x *= inv;
  }
  return v;
}

namespace {

constexpr char kCacheMagic[8] = {'S', 'T', 'E', 'M', 'V', 'E', 'C', '1'};

std::array<uint8_t, 32> cache_key(const std::string& encoder_name,
                                  std::string_view text) {
  std::string keyed = encoder_name;
  keyed.push_back('\0');
  keyed.append(text);
  return hash::sha256(keyed);
}

uint32_t payload_checksum(const std::array<uint8_t, 32>& key,
                          const Vector& v) {
  uint64_t h = hash::kFnvOffset;
  for (uint8_t b : key) {
    h ^= b;
    h *= hash::kFnvPrime;
  }
  h = hash::fnv1a64_mix(h, static_cast<uint64_t>(v.size()));
  for (float x : v) {
    uint32_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    h = hash::fnv1a64_mix(h, bits);
  }
  return static_cast<uint32_t>(h ^ (h >> 32));
}

}  // namespace

VectorCache::VectorCache(std::filesystem::path file)
    : file_(std::move(file)) {}

std::optional<Vector> VectorCache::get(const std::string& encoder_name,
                                       std::string_view text) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(cache_key(encoder_name, text));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void VectorCache::put(const std::string& encoder_name, std::string_view text,
                      const Vector& v) {
  std::lock_guard lock(mutex_);
  entries_[cache_key(encoder_name, text)] = v;
}

void VectorCache::load() {
  std::lock_guard lock(mutex_);
  entries_.clear();
  dropped_ = 0;
  std::ifstream in(file_, std::ios::binary);
  if (!in) return;  // absent cache is an empty cache
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) {
    ++dropped_;
    return;
  }
  while (true) {
    std::array<uint8_t, 32> key{};
    if (!in.read(reinterpret_cast<char*>(key.data()), key.size())) break;
    uint32_t dim = 0;
    if (!in.read(reinterpret_cast<char*>(&dim), sizeof(dim)) ||
        dim > (1u << 20)) {
      ++dropped_;
      break;
    }
    Vector v(dim);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      ++dropped_;
      break;
    }
    uint32_t checksum = 0;
    if (!in.read(reinterpret_cast<char*>(&checksum), sizeof(checksum))) {
      ++dropped_;
      break;
    }
    if (checksum != payload_checksum(key, v)) {
      ++dropped_;
      continue;
    }
    entries_[key] = std::move(v);
  }
}

void VectorCache::save() const {
  std::lock_guard lock(mutex_);
  if (!file_.parent_path().empty()) {
    std::filesystem::create_directories(file_.parent_path());
  }
  std::ofstream out(file_, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write vector cache: " + file_.string());
  }
  out.write(kCacheMagic, 8);
  for (const auto& [key, v] : entries_) {
    out.write(reinterpret_cast<const char*>(key.data()), key.size());
    uint32_t dim = static_cast<uint32_t>(v.size());
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
    uint32_t checksum = payload_checksum(key, v);
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  }
}

size_t VectorCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

CachingEncoder::CachingEncoder(Encoder& inner, VectorCache* disk_cache)
    : Encoder(inner.name(), inner.dimension()),
      inner_(inner),
      disk_cache_(disk_cache) {}

Vector CachingEncoder::encode_impl(std::string_view text) {
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(text);
    if (it != memo_.end()) return it->second;
  }
  Vector v;
  if (disk_cache_) {
    if (auto hit = disk_cache_->get(name(), text)) v = std::move(*hit);
  }
  if (v.empty()) {
    v = inner_.encode(text);
    if (disk_cache_) disk_cache_->put(name(), text, v);
  }
  std::lock_guard lock(mutex_);
  return memo_.emplace(std::string(text), std::move(v)).first->second;
}

EntityIndex build_entity_index(const kg::KnowledgeGraph& g, Encoder& enc) {
  EntityIndex idx;
  idx.encoder_fingerprint =
      enc.name() + "#" + std::to_string(enc.dimension());
  idx.vectors.reserve(g.entity_count());
  for (const auto& label : g.entity_labels()) {
    idx.vectors.push_back(enc.encode(label));
  }
  return idx;
}

std::vector<std::pair<kg::EntityId, double>> top_n_entities(
    const EntityIndex& idx, const Vector& query, size_t n) {
  std::vector<std::pair<kg::EntityId, double>> scored;
  scored.reserve(idx.vectors.size());
  for (size_t i = 0; i < idx.vectors.size(); ++i) {
    scored.emplace_back(static_cast<kg::EntityId>(i),
                        cosine_sim(idx.vectors[i], query));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > n) scored.resize(n);
  return scored;
}

std::vector<std::pair<kg::EntityId, double>> top_n_entities(
    const EntityIndex& idx, Encoder& enc, std::string_view query_label,
    size_t n) {
  if (idx.vectors.empty()) return {};
  return top_n_entities(idx, enc.encode(query_label), n);
}

}  // namespace stem::embedding
