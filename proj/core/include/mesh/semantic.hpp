#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mesh/autodiff.hpp"
#include "mesh/tkg.hpp"

namespace mesh {

// Language-model representations of each entity and relation, one row per id.
struct SemanticEmbeddingTable {
  Tensor entities;   // |E| x d_LLM
  Tensor relations;  // |R| x d_LLM
  std::string source;

  [[nodiscard]] std::size_t dim() const { return entities.rank() == 2 ? entities.dim(1) : 0; }
};

struct PromptTemplate {
  std::string domain = "political";
  std::string datatype = "historical";
  std::string entity_template =
      "In the context of <DATA DOMAIN>, please provide <DATA TYPE> background about <ENTITY>.";
  std::string relation_template =
      "In the context of <DATA DOMAIN>, what are the <DATA TYPE> perspectives through which we can "
      "understand the <RELATION>?";

  // Throws ConfigError when a template lacks one of its placeholders.
  void validate() const;
  [[nodiscard]] std::string entity_prompt(const std::string& name) const;
  [[nodiscard]] std::string relation_prompt(const std::string& name) const;
};

// `E<TAB>id<TAB>prompt` lines for every entity, then `R<TAB>id<TAB>prompt`
// for every relation of the vocabulary.
std::string render_prompts(const Vocabulary& vocab, const PromptTemplate& prompt);
void emit_prompts(const Vocabulary& vocab, const PromptTemplate& prompt, const std::filesystem::path& file);

enum class EmbeddingEncoding { text, binary };

// Reads either encoding (detected after the header line) and checks that
// every vocabulary id has a row.
SemanticEmbeddingTable load_semantic_embeddings(const std::filesystem::path& file, const Vocabulary& vocab);
void save_semantic_embeddings(const SemanticEmbeddingTable& table, const std::filesystem::path& file,
                              EmbeddingEncoding encoding = EmbeddingEncoding::text);

// Rows of standard-normal variates, each a pure function of (seed, kind, id).
SemanticEmbeddingTable synthetic_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

// Two-layer perceptron: relu(x W1 + b1) W2 + b2.
class Adapter {
 public:
  Adapter() = default;
  Adapter(const std::string& name, std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng);

  Var forward(Tape& tape, Var x);
  std::vector<Parameter*> parameters() { return {&w1, &b1, &w2, &b2}; }
  [[nodiscard]] std::size_t in_dim() const { return w1.value.dim(0); }
  [[nodiscard]] std::size_t out_dim() const { return w2.value.dim(1); }

  Parameter w1, b1, w2, b2;
};

struct AdaptedTables {
  Var entities;   // H_l
  Var relations;  // R_l
};

// H_l = f_H(H_LLM), R_l = f_R(R_LLM) over the full tables.
AdaptedTables adapt(Tape& tape, const SemanticEmbeddingTable& table, Adapter& entity_adapter,
                    Adapter& relation_adapter);

}  // namespace mesh
