#include "mesh/model.hpp"

#include <cstring>

namespace mesh {

const char* gate_input_name(GateInput g) {
  switch (g) {
    case GateInput::structural: return "structural";
    case GateInput::semantic: return "semantic";
    case GateInput::concatenated: return "concatenated";
  }
  return "structural";
}

GateInput parse_gate_input(const std::string& text) {
  if (text == "structural") return GateInput::structural;
  if (text == "semantic") return GateInput::semantic;
  if (text == "concatenated") return GateInput::concatenated;
  throw ConfigError("gate_input must be structural, semantic or concatenated, got '" + text + "'");
}

void AblationConfig::validate() const {
  if (disable_semantic && disable_structural)
    throw ConfigError("disable_semantic and disable_structural cannot both be set");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(num_entities, "num_entities");
  positive(num_relations, "num_relations");
  positive(dim, "dim");
  positive(llm_dim, "llm_dim");
  positive(adapter_hidden, "adapter_hidden");
  positive(channels, "channels");
  positive(window, "window");
  if (kernel_width % 2 == 0) throw ConfigError("kernel_width must be odd");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  experts.validate();
  ablation.validate();
}

namespace {

std::size_t gate_input_dim(const ModelConfig& c) {
  return c.ablation.gate_input == GateInput::concatenated ? 2 * c.dim : c.dim;
}

}  // namespace

MeshModel::MeshModel(const ModelConfig& config, SemanticEmbeddingTable semantic)
    : config_(config), semantic_(std::move(semantic)) {
  config_.validate();
  if (semantic_.entities.rows() != config_.num_entities || semantic_.relations.rows() != config_.num_relations)
    throw ConfigError("semantic table covers " + std::to_string(semantic_.entities.rows()) + " entities and " +
                      std::to_string(semantic_.relations.rows()) + " relations; model needs " +
                      std::to_string(config_.num_entities) + " and " + std::to_string(config_.num_relations));
  if (semantic_.dim() != config_.llm_dim)
    throw ConfigError("semantic table width " + std::to_string(semantic_.dim()) + " differs from llm_dim " +
                      std::to_string(config_.llm_dim));

  const Rng root(config_.seed);
  Rng structural_rng = root.split(1), gdec_rng = root.split(2), ldec_rng = root.split(3);
  Rng ent_rng = root.split(4), rel_rng = root.split(5);

  StructuralConfig sc;
  sc.num_entities = config_.num_entities;
  sc.num_relations = config_.num_relations;
  sc.dim = config_.dim;
  sc.layers = config_.layers;
  sc.window = config_.window;
  sc.dropout = config_.dropout;
  sc.normalize = config_.normalize;
  structural = StructuralEncoder(sc, structural_rng);

  ConvTransEConfig dc;
  dc.dim = config_.dim;
  dc.channels = config_.channels;
  dc.kernel_width = config_.kernel_width;
  dc.dropout = config_.dropout;
  structural_decoder = ConvTransE("structural_decoder", dc, gdec_rng);
  semantic_decoder = ConvTransE("semantic_decoder", dc, ldec_rng);
  entity_adapter = Adapter("entity_adapter", config_.llm_dim, config_.adapter_hidden, config_.dim, ent_rng);
  relation_adapter = Adapter("relation_adapter", config_.llm_dim, config_.adapter_hidden, config_.dim, rel_rng);
  mixture = ExpertMixture(config_.experts, gate_input_dim(config_));
}

std::vector<Parameter*> MeshModel::parameters() {
  std::vector<Parameter*> out = structural.parameters();
  for (auto* group : {&structural_decoder, &semantic_decoder})
    for (Parameter* p : group->parameters()) out.push_back(p);
  for (auto* group : {&entity_adapter, &relation_adapter})
    for (Parameter* p : group->parameters()) out.push_back(p);
  for (Parameter* p : mixture.parameters()) out.push_back(p);
  return out;
}

Parameter* MeshModel::find(const std::string& name) {
  for (Parameter* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

StructuralEncoder::Output MeshModel::encode_structure(Tape& tape, std::span<const SnapshotGraph* const> history) {
  return structural.encode(tape, history);
}

Var MeshModel::semantic_rows(Tape& tape, const Tensor& table, std::span<const std::uint32_t> ids) {
  const std::size_t width = table.cols();
  Tensor rows({ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < table.rows(), "semantic lookup: id out of range");
    std::memcpy(rows.row(i).data(), table.row(ids[i]).data(), width * sizeof(Real));
  }
  return tape.constant(std::move(rows));
}

Var MeshModel::structural_logits(Tape& tape, const StructuralEncoder::Output& structure, const QueryBatch& batch) {
  Var q = structural_decoder.decode(tape, gather_rows(structure.entities, batch.subjects),
                                    gather_rows(structure.relations, batch.relations));
  return score_logits(q, structure.entities);
}

ForwardOutputs MeshModel::forward(Tape& tape, const StructuralEncoder::Output& structure, const QueryBatch& batch) {
  require(batch.size() > 0 && batch.relations.size() == batch.size(), "forward: empty or ragged batch");
  const AblationConfig& ab = config_.ablation;
  ab.validate();
  ForwardOutputs out;

  if (!ab.disable_structural)
    out.q_structural = structural_decoder.decode(tape, gather_rows(structure.entities, batch.subjects),
                                                 gather_rows(structure.relations, batch.relations));
  if (!ab.disable_semantic) {
    Var ent = entity_adapter.forward(tape, semantic_rows(tape, semantic_.entities, batch.subjects));
    Var rel = relation_adapter.forward(tape, semantic_rows(tape, semantic_.relations, batch.relations));
    out.q_semantic = semantic_decoder.decode(tape, ent, rel);
  }

  if (ab.disable_semantic) {
    out.fused.combined = out.q_structural;
    out.candidates = structure.entities;
  } else if (ab.disable_structural) {
    out.fused.combined = out.q_semantic;
    out.candidates = entity_adapter.forward(tape, tape.constant(semantic_.entities));
  } else {
    Var gate_in = out.q_structural;
    if (ab.gate_input == GateInput::semantic) {
      gate_in = out.q_semantic;
    } else if (ab.gate_input == GateInput::concatenated) {
      const Var parts[] = {out.q_structural, out.q_semantic};
      gate_in = concat(parts, 1);
    }
    const ExpertLayout& layout = mixture.layout();
    const std::size_t k = layout.total();
    out.gates = gate_values(gate_in, tape.param(mixture.gate_weight), tape.param(mixture.gate_bias));
    for (std::size_t i = 0; i < k; ++i)
      out.experts.push_back(expert_mix(slice_cols(out.gates, i, i + 1), out.q_structural, out.q_semantic));
    if (ab.disable_prediction_expert)
      out.weights = tape.constant(Tensor({batch.size(), k}, Real{1} / static_cast<Real>(k)));
    else
      out.weights = gate_values(gate_in, tape.param(mixture.predict_weight), tape.param(mixture.predict_bias));
    out.fused = fuse(out.weights, out.experts, layout);
    out.candidates = structure.entities;
    out.logits_historical = score_logits(out.fused.historical, out.candidates);
    out.logits_non_historical = score_logits(out.fused.non_historical, out.candidates);
  }
  out.logits = score_logits(out.fused.combined, out.candidates);
  return out;
}

}  // namespace mesh
