#include "mesh/structural.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mesh {

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor out(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Real& v : out.values()) v = static_cast<Real>(rng.uniform(-bound, bound));
  return out;
}

SnapshotGraph SnapshotGraph::from_facts(Timestamp t, std::span<const Quadruple> facts) {
  SnapshotGraph g;
  g.t = t;
  g.src.reserve(facts.size());
  g.rel.reserve(facts.size());
  g.dst.reserve(facts.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> incidences;
  for (const Quadruple& q : facts) {
    g.src.push_back(q.s);
    g.rel.push_back(q.r);
    g.dst.push_back(q.o);
    incidences.emplace(q.r, q.s);
    incidences.emplace(q.r, q.o);
  }
  for (const auto& [r, e] : incidences) {
    g.incidence_relation.push_back(r);
    g.incidence_entity.push_back(e);
  }
  return g;
}

std::vector<SnapshotGraph> build_timeline(const TemporalKG& kg, std::size_t num_timestamps) {
  std::vector<SnapshotGraph> out;
  out.reserve(num_timestamps);
  for (std::size_t t = 0; t < num_timestamps; ++t)
    out.push_back(SnapshotGraph::from_facts(static_cast<Timestamp>(t), kg.snapshot(t)));
  return out;
}

std::vector<const SnapshotGraph*> history_window(std::span<const SnapshotGraph> timeline, Timestamp t,
                                                 std::size_t window) {
  std::vector<const SnapshotGraph*> out;
  for (std::size_t k = std::min<std::size_t>(t, timeline.size()); k-- > 0 && out.size() < window;)
    if (!timeline[k].empty()) out.push_back(&timeline[k]);
  std::reverse(out.begin(), out.end());
  return out;
}

StructuralEncoder::StructuralEncoder(const StructuralConfig& config, Rng& rng) : config_(config) {
  const std::size_t d = config.dim;
  require(d > 0 && config.num_entities > 0 && config.num_relations > 0, "structural encoder: empty dimensions");
  entity_init = Parameter("structural.entity_init",
                          xavier_uniform({config.num_entities, d}, config.num_entities, d, rng));
  relation_init = Parameter("structural.relation_init",
                            xavier_uniform({config.num_relations, d}, config.num_relations, d, rng));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "structural.layer" + std::to_string(l);
    layer_weight.emplace_back(prefix + ".weight", xavier_uniform({d, d}, d, d, rng));
    layer_self_loop.emplace_back(prefix + ".self_loop", xavier_uniform({d, d}, d, d, rng));
  }
  time_gate_weight = Parameter("structural.time_gate.weight", xavier_uniform({d, d}, d, d, rng));
  time_gate_bias = Parameter("structural.time_gate.bias", Tensor({d}));
  const double k = 1.0 / std::sqrt(static_cast<double>(d));
  auto gru_uniform = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (Real& v : t.values()) v = static_cast<Real>(rng.uniform(-k, k));
    return t;
  };
  gru_weight_ih = Parameter("structural.relation_gru.weight_ih", gru_uniform({2 * d, 3 * d}));
  gru_weight_hh = Parameter("structural.relation_gru.weight_hh", gru_uniform({d, 3 * d}));
  gru_bias_ih = Parameter("structural.relation_gru.bias_ih", gru_uniform({3 * d}));
  gru_bias_hh = Parameter("structural.relation_gru.bias_hh", gru_uniform({3 * d}));
}

std::vector<Parameter*> StructuralEncoder::parameters() {
  std::vector<Parameter*> out{&entity_init, &relation_init};
  for (std::size_t l = 0; l < layer_weight.size(); ++l) {
    out.push_back(&layer_weight[l]);
    out.push_back(&layer_self_loop[l]);
  }
  for (Parameter* p : {&time_gate_weight, &time_gate_bias, &gru_weight_ih, &gru_weight_hh, &gru_bias_ih, &gru_bias_hh})
    out.push_back(p);
  return out;
}

void StructuralEncoder::set_frozen(bool frozen) {
  for (Parameter* p : parameters()) p->frozen = frozen;
}

StructuralEncoder::Output StructuralEncoder::encode(Tape& tape, std::span<const SnapshotGraph* const> history) {
  const std::size_t d = config_.dim;
  Var entities = tape.param(entity_init);
  Var relations = tape.param(relation_init);
  if (history.empty()) return {entities, relations};

  std::vector<Var> layer_w, layer_self;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    layer_w.push_back(tape.param(layer_weight[l]));
    layer_self.push_back(tape.param(layer_self_loop[l]));
  }
  Var gate_w = tape.param(time_gate_weight);
  Var gate_b = tape.param(time_gate_bias);
  Var w_ih = tape.param(gru_weight_ih);
  Var w_hh = tape.param(gru_weight_hh);
  Var b_ih = tape.param(gru_bias_ih);
  Var b_hh = tape.param(gru_bias_hh);

  for (const SnapshotGraph* g : history) {
    require(g != nullptr, "structural encoder: missing snapshot");

    // Relation evolution: GRU over [previous relation row, mean of incident entities].
    Var incident = scatter_mean_rows(gather_rows(entities, g->incidence_entity), g->incidence_relation,
                                     config_.num_relations);
    const Var gru_in_parts[] = {relations, incident};
    Var gru_in = concat(gru_in_parts, 1);
    Var gi = add_bias(matmul(gru_in, w_ih), b_ih);
    Var gh = add_bias(matmul(relations, w_hh), b_hh);
    Var reset = sigmoid(slice_cols(gi, 0, d) + slice_cols(gh, 0, d));
    Var update = sigmoid(slice_cols(gi, d, 2 * d) + slice_cols(gh, d, 2 * d));
    Var candidate = tanh(slice_cols(gi, 2 * d, 3 * d) + reset * slice_cols(gh, 2 * d, 3 * d));
    Var evolved_rel = add_scalar(scale(update, -1), 1) * candidate + update * relations;
    if (config_.normalize) evolved_rel = normalize_rows(evolved_rel);

    // Entity aggregation over incoming edges.
    Var h = entities;
    for (std::size_t l = 0; l < config_.layers; ++l) {
      Var message = gather_rows(h, g->src) + gather_rows(evolved_rel, g->rel);
      Var aggregated = scatter_mean_rows(message, g->dst, config_.num_entities);
      Var combined = matmul(aggregated, layer_w[l]) + matmul(h, layer_self[l]);
      h = dropout(rrelu(combined), config_.dropout);
    }

    Var gate = sigmoid(add_bias(matmul(entities, gate_w), gate_b));
    Var evolved = gate * h + add_scalar(scale(gate, -1), 1) * entities;
    if (config_.normalize) evolved = normalize_rows(evolved);

    entities = evolved;
    relations = evolved_rel;
  }
  return {entities, relations};
}

}  // namespace mesh
