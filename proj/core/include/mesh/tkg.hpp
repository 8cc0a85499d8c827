#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mesh/common.hpp"

namespace mesh {

struct Vocabulary {
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::size_t num_timestamps = 0;
  std::string time_granularity = "24h";
  // Relation count before inverse augmentation; equals relation_names.size()
  // until add_inverse_relations runs.
  std::size_t base_relations = 0;

  [[nodiscard]] std::size_t num_entities() const { return entity_names.size(); }
  [[nodiscard]] std::size_t num_relations() const { return relation_names.size(); }
  [[nodiscard]] bool has_inverses() const { return relation_names.size() == 2 * base_relations && base_relations > 0; }
};

struct Quadruple {
  EntityId s = 0;
  RelationId r = 0;
  EntityId o = 0;
  Timestamp t = 0;

  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

enum class Split { train, valid, test, merged };

const char* split_name(Split split);

// Facts grouped into one snapshot per timestamp; snapshots[k] holds facts with t == k.
class TemporalKG {
 public:
  TemporalKG() = default;
  TemporalKG(Split split, std::size_t num_timestamps);
  // Groups facts by timestamp, keeping their relative order within a snapshot.
  static TemporalKG from_facts(Split split, std::span<const Quadruple> facts, std::size_t num_timestamps);

  void add(const Quadruple& q);

  [[nodiscard]] Split split() const { return split_; }
  [[nodiscard]] std::size_t num_snapshots() const { return snapshots_.size(); }
  [[nodiscard]] const std::vector<Quadruple>& snapshot(std::size_t t) const;
  [[nodiscard]] const std::vector<std::vector<Quadruple>>& snapshots() const { return snapshots_; }
  [[nodiscard]] std::size_t fact_count() const;
  [[nodiscard]] std::vector<Quadruple> facts() const;
  // Timestamps that carry at least one fact, ascending.
  [[nodiscard]] std::vector<Timestamp> active_timestamps() const;
  [[nodiscard]] RelationId max_relation() const;

 private:
  Split split_ = Split::train;
  std::vector<std::vector<Quadruple>> snapshots_;
};

struct Dataset {
  Vocabulary vocab;
  TemporalKG train;
  TemporalKG valid;
  TemporalKG test;

  // All splits in one timeline, train then valid then test within a snapshot.
  [[nodiscard]] TemporalKG merged() const;
};

// Reads train/valid/test.txt plus entity2id.txt and relation2id.txt.
// Timestamps are divided by the minimal positive gap over all splits and
// shifted so the earliest becomes 0.
Dataset load_dataset(const std::filesystem::path& directory);

// Writes the dataset back out in the same five-file layout with normalized
// timestamps.
void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

void write_facts(const TemporalKG& kg, const std::filesystem::path& file);

// Appends (o, r + |R|, s, t) after the originals of each snapshot.
TemporalKG add_inverse_relations(const TemporalKG& kg, const Vocabulary& vocab);
Vocabulary add_inverse_relations(const Vocabulary& vocab);
// Both at once, with the "already augmented" check on the graph.
std::pair<TemporalKG, Vocabulary> add_inverse_relations_pair(const TemporalKG& kg, const Vocabulary& vocab);

inline Quadruple inverse_of(const Quadruple& q, std::size_t base_relations) {
  const auto base = static_cast<RelationId>(base_relations);
  return {q.o, q.r >= base ? q.r - base : q.r + base, q.s, q.t};
}

// Removes floor(fraction * |F|) facts chosen uniformly at random from `seed`.
TemporalKG drop_history_fraction(const TemporalKG& kg, double fraction, std::uint64_t seed);

// Keeps timestamps < limit in every split. When that leaves the validation or
// test split empty, the surviving timeline is re-split chronologically with
// the trailing `holdout` fraction of timestamps going to each held-out split.
Dataset truncate_timestamps(const Dataset& dataset, std::size_t limit, double holdout = 0.1);

}  // namespace mesh
