#pragma once

#include <string>
#include <vector>

#include "mesh/decoder.hpp"
#include "mesh/experts.hpp"
#include "mesh/semantic.hpp"
#include "mesh/structural.hpp"

namespace mesh {

enum class GateInput { structural, semantic, concatenated };

const char* gate_input_name(GateInput g);
GateInput parse_gate_input(const std::string& text);

struct AblationConfig {
  bool disable_semantic = false;           // predict from the structural query alone
  bool disable_structural = false;         // predict from the semantic query alone
  bool disable_event_aware = false;        // expert-loss weight forced to 0 while training
  bool disable_prediction_expert = false;  // final query is the plain mean of the experts
  GateInput gate_input = GateInput::structural;

  // Throws ConfigError when both encoders are disabled.
  void validate() const;
};

struct ModelConfig {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;  // including inverse relations
  std::size_t dim = 100;
  std::size_t llm_dim = 4096;
  std::size_t adapter_hidden = 256;
  std::size_t channels = 50;
  std::size_t kernel_width = 3;
  std::size_t window = 3;
  std::size_t layers = 2;
  Real dropout = Real{0.2};
  bool normalize = true;
  ExpertLayout experts;
  AblationConfig ablation;
  std::uint64_t seed = 0;

  void validate() const;
};

// Queries of one timestamp. `indicators[i]` is 1 when the answer triple has
// occurred before `t`.
struct QueryBatch {
  Timestamp t = 0;
  std::vector<EntityId> subjects;
  std::vector<RelationId> relations;
  std::vector<EntityId> objects;
  std::vector<int> indicators;

  [[nodiscard]] std::size_t size() const { return subjects.size(); }
};

struct ForwardOutputs {
  Var q_structural;
  Var q_semantic;
  Var gates;    // (batch x K) expert gates, empty without both encoders
  std::vector<Var> experts;
  Var weights;  // (batch x K) prediction-expert weights
  FusedQuery fused;
  Var candidates;  // entity table the queries are scored against
  Var logits;
  Var logits_historical;
  Var logits_non_historical;

  [[nodiscard]] bool has_experts() const { return !experts.empty(); }
};

class MeshModel {
 public:
  MeshModel(const ModelConfig& config, SemanticEmbeddingTable semantic);
  MeshModel(const MeshModel&) = delete;
  MeshModel& operator=(const MeshModel&) = delete;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const SemanticEmbeddingTable& semantic() const { return semantic_; }
  AblationConfig& ablation() { return config_.ablation; }

  StructuralEncoder::Output encode_structure(Tape& tape, std::span<const SnapshotGraph* const> history);

  // Structural-only logits q_g H_g^T used to pre-train the structural encoder.
  Var structural_logits(Tape& tape, const StructuralEncoder::Output& structure, const QueryBatch& batch);

  ForwardOutputs forward(Tape& tape, const StructuralEncoder::Output& structure, const QueryBatch& batch);

  // Every parameter in a fixed order; names are unique.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> structural_parameters() { return structural.parameters(); }
  Parameter* find(const std::string& name);

  StructuralEncoder structural;
  ConvTransE structural_decoder;
  ConvTransE semantic_decoder;
  Adapter entity_adapter;
  Adapter relation_adapter;
  ExpertMixture mixture;

 private:
  Var semantic_rows(Tape& tape, const Tensor& table, std::span<const std::uint32_t> ids);

  ModelConfig config_;
  SemanticEmbeddingTable semantic_;
};

}  // namespace mesh
