#pragma once

#include <memory>

#include "mesh/model.hpp"
#include "mesh/query_context.hpp"
#include "mesh/synthetic.hpp"
#include "mesh/training.hpp"

namespace mesh::testing {

// Small synthetic problem with a model sized for fast tests.
struct ModelFixture {
  std::unique_ptr<QueryContext> context;
  ModelConfig config;
  SemanticEmbeddingTable table;

  explicit ModelFixture(SyntheticSpec spec = small_spec(), std::uint64_t model_seed = 3) {
    context = std::make_unique<QueryContext>(synthetic_dataset(spec));
    config.num_entities = context->vocab().num_entities();
    config.num_relations = context->vocab().num_relations();
    config.dim = 8;
    config.llm_dim = 12;
    config.adapter_hidden = 10;
    config.channels = 3;
    config.window = 2;
    config.seed = model_seed;
    table = synthetic_embeddings(context->vocab(), config.llm_dim, 5);
  }

  static SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.entities = 12;
    s.relations = 3;
    s.timestamps = 20;
    s.facts_per_timestamp = 8;
    s.recurring_pool = 10;
    s.seed = 2;
    return s;
  }

  [[nodiscard]] std::unique_ptr<MeshModel> model() const { return std::make_unique<MeshModel>(config, table); }

  static TrainConfig quick_train(std::size_t stage0, std::size_t stage1) {
    TrainConfig t;
    t.stage0_epochs = stage0;
    t.stage1_epochs = stage1;
    t.learning_rate = Real{0.01};
    t.seed = 4;
    return t;
  }
};

// Gives every gate and prediction weight a non-trivial value.
inline void perturb_mixture(MeshModel& model, std::uint64_t seed) {
  Rng rng(seed);
  for (Parameter* p : model.mixture.parameters())
    for (Real& v : p->value.values()) v = static_cast<Real>(0.5 * rng.normal());
}

}  // namespace mesh::testing
