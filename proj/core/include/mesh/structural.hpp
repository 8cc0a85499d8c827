#pragma once

#include <span>
#include <vector>

#include "mesh/autodiff.hpp"
#include "mesh/tkg.hpp"

namespace mesh {

// Edge lists of one snapshot, precomputed for message passing.
struct SnapshotGraph {
  Timestamp t = 0;
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> rel;
  std::vector<std::uint32_t> dst;
  // Unique (relation, entity) incidences: entity appears as s or o of a fact
  // with that relation.
  std::vector<std::uint32_t> incidence_relation;
  std::vector<std::uint32_t> incidence_entity;

  static SnapshotGraph from_facts(Timestamp t, std::span<const Quadruple> facts);
  [[nodiscard]] bool empty() const { return src.empty(); }
};

struct StructuralConfig {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;  // inverse-augmented count
  std::size_t dim = 100;
  std::size_t layers = 2;
  std::size_t window = 3;
  Real dropout = Real{0.2};
  // L2-normalize entity and relation rows after every evolution step.
  bool normalize = true;
};

// Recurrent relational graph encoder. Starting from learned initial tables it
// walks the history window oldest first; each step aggregates the snapshot's
// edges through `layers` mean-message layers, evolves relations with a GRU
// cell and entities with a sigmoid time gate.
class StructuralEncoder {
 public:
  StructuralEncoder() = default;
  StructuralEncoder(const StructuralConfig& config, Rng& init_rng);

  struct Output {
    Var entities;   // |E| x d
    Var relations;  // |R| x d
  };

  // `history` must be ordered oldest first and hold only snapshots earlier
  // than the query time. An empty history returns the initial tables.
  Output encode(Tape& tape, std::span<const SnapshotGraph* const> history);

  [[nodiscard]] const StructuralConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  void set_frozen(bool frozen);

  Parameter entity_init;
  Parameter relation_init;
  std::vector<Parameter> layer_weight;
  std::vector<Parameter> layer_self_loop;
  Parameter time_gate_weight;
  Parameter time_gate_bias;
  Parameter gru_weight_ih;  // 2d x 3d, gate blocks ordered reset, update, candidate
  Parameter gru_weight_hh;  // d x 3d
  Parameter gru_bias_ih;    // 3d
  Parameter gru_bias_hh;    // 3d

 private:
  StructuralConfig config_;
};

// Up to `window` most recent non-empty snapshots strictly before t, oldest first.
std::vector<const SnapshotGraph*> history_window(std::span<const SnapshotGraph> timeline, Timestamp t,
                                                 std::size_t window);

// One SnapshotGraph per timestamp of `kg`.
std::vector<SnapshotGraph> build_timeline(const TemporalKG& kg, std::size_t num_timestamps);

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace mesh
