#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mesh/tkg.hpp"

namespace mesh {

// Cumulative occurrence counts over a fact corpus. Immutable after build.
class FrequencyIndex {
 public:
  FrequencyIndex() = default;
  explicit FrequencyIndex(std::span<const Quadruple> facts);
  static FrequencyIndex build(std::span<const Quadruple> facts) { return FrequencyIndex(facts); }
  static FrequencyIndex build(const TemporalKG& kg);

  // Number of stored occurrences of (s, r, o) with timestamp strictly below t.
  [[nodiscard]] std::size_t frequency(EntityId s, RelationId r, EntityId o, Timestamp t) const;
  // 1 iff frequency(s, r, o, t) > 0.
  [[nodiscard]] int indicator(EntityId s, RelationId r, EntityId o, Timestamp t) const {
    return frequency(s, r, o, t) > 0 ? 1 : 0;
  }
  [[nodiscard]] int indicator(const Quadruple& q) const { return indicator(q.s, q.r, q.o, q.t); }

  // Counts over all timestamps.
  [[nodiscard]] const std::unordered_map<EntityId, std::size_t>* pair_objects(EntityId s, RelationId r) const;
  [[nodiscard]] const std::unordered_map<EntityId, std::size_t>* subject_objects(EntityId s) const;

  [[nodiscard]] std::size_t fact_count() const { return fact_count_; }

  static std::uint64_t triple_key(EntityId s, RelationId r, EntityId o);
  static std::uint64_t pair_key(EntityId s, RelationId r);

 private:
  std::unordered_map<std::uint64_t, std::vector<Timestamp>> occurrences_;
  std::unordered_map<std::uint64_t, std::unordered_map<EntityId, std::size_t>> pair_counts_;
  std::unordered_map<EntityId, std::unordered_map<EntityId, std::size_t>> subject_counts_;
  std::size_t fact_count_ = 0;
};

// Frequency-ranking baseline: objects seen with (s, r) in training, falling
// back to objects seen with s under any relation. Zero-count entities come
// last; ties go to the smaller entity id.
class NaiveRanker {
 public:
  NaiveRanker(const FrequencyIndex& train_index, std::size_t num_entities)
      : index_(train_index), num_entities_(num_entities) {}

  // Full ranking, a permutation of 0..|E|-1.
  [[nodiscard]] std::vector<EntityId> rank(EntityId s, RelationId r) const;
  // 1-based position of `o` in rank(s, r), computed without sorting.
  [[nodiscard]] std::size_t position(EntityId s, RelationId r, EntityId o) const;

 private:
  [[nodiscard]] const std::unordered_map<EntityId, std::size_t>* counts_for(EntityId s, RelationId r) const;

  const FrequencyIndex& index_;
  std::size_t num_entities_;
};

struct NaiveResult {
  std::size_t queries = 0;
  double mrr = 0;
  double hits1 = 0, hits3 = 0, hits10 = 0;
};

// Ranks every test fact's object with the naive baseline over training facts.
NaiveResult evaluate_naive(const Dataset& dataset);

struct DatasetStats {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t timestamps = 0;
  std::size_t train = 0, valid = 0, test = 0;
  std::size_t historical_test = 0;
  [[nodiscard]] double historical_rate() const {
    return test == 0 ? 0.0 : static_cast<double>(historical_test) / static_cast<double>(test);
  }
};

// Historical test facts are those whose triple occurs in any split earlier.
DatasetStats dataset_stats(const Dataset& dataset);

std::string format_stats_table(const DatasetStats& stats, const std::string& name);
std::string format_stats_kv(const DatasetStats& stats);

}  // namespace mesh
