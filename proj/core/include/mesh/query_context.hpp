#pragma once

#include <unordered_map>
#include <vector>

#include "mesh/history.hpp"
#include "mesh/model.hpp"
#include "mesh/structural.hpp"

namespace mesh {

// A dataset prepared for querying: inverse relations added to every split,
// one merged timeline for history encoding, an occurrence index for
// historical indicators and the true answers of every (s, r, t) for
// time-aware filtering.
class QueryContext {
 public:
  // `raw` must not carry inverse relations yet.
  explicit QueryContext(const Dataset& raw);

  [[nodiscard]] const Dataset& data() const { return data_; }
  [[nodiscard]] const Vocabulary& vocab() const { return data_.vocab; }
  [[nodiscard]] std::size_t base_relations() const { return data_.vocab.base_relations; }
  [[nodiscard]] const TemporalKG& split(Split s) const;
  [[nodiscard]] const FrequencyIndex& index() const { return index_; }
  [[nodiscard]] std::span<const SnapshotGraph> timeline() const { return timeline_; }

  // The last `window` non-empty snapshots strictly before t, oldest first.
  [[nodiscard]] std::vector<const SnapshotGraph*> history(Timestamp t, std::size_t window) const;

  // True objects of (s, r, ., t) in any split.
  [[nodiscard]] std::span<const EntityId> answers(EntityId s, RelationId r, Timestamp t) const;

  // Queries of one split grouped per timestamp, in timestamp order. A
  // non-zero `batch_size` splits larger snapshots into chunks.
  [[nodiscard]] std::vector<QueryBatch> batches(Split s, std::size_t batch_size = 0) const;

  [[nodiscard]] bool is_direct(RelationId r) const { return r < base_relations(); }

 private:
  Dataset data_;
  TemporalKG merged_;
  std::vector<SnapshotGraph> timeline_;
  FrequencyIndex index_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<EntityId>>> answers_;
};

}  // namespace mesh
