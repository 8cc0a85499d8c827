#pragma once

#include <span>
#include <vector>

#include "mesh/autodiff.hpp"

namespace mesh {

// The first `historical` experts specialize on repeated events, the next
// `non_historical` on first occurrences.
struct ExpertLayout {
  std::size_t historical = 1;
  std::size_t non_historical = 1;

  [[nodiscard]] std::size_t total() const { return historical + non_historical; }
  void validate() const;
};

// Per-expert sigmoid gates: column i of the result is sigmoid(x w_i + b_i).
// x: (batch x in), weight: (in x K), bias: (K). Also serves the prediction
// expert, whose components are independent sigmoids, not a softmax.
Var gate_values(Var x, Var weight, Var bias);

// q_i = alpha_i * q_g + (1 - alpha_i) * q_s with alpha: (batch x 1).
Var expert_mix(Var alpha, Var q_structural, Var q_semantic);

// Sum of weights[:, i] * experts[i] over i in [begin, end), left to right.
Var partial_fuse(Var weights, std::span<const Var> experts, std::size_t begin, std::size_t end);

struct FusedQuery {
  Var historical;      // sum over the first `historical` experts
  Var non_historical;  // sum over the rest
  Var combined;        // historical + non_historical
};

// The combined vector is defined as the sum of the two partials, so the
// decomposition holds exactly.
FusedQuery fuse(Var weights, std::span<const Var> experts, const ExpertLayout& layout);

// Pre-sigmoid entity scores q H^T: (batch x |E|).
Var score_logits(Var query, Var entities);
// sigmoid(q H^T).
Var score(Var query, Var entities);

// Trainable part of the mixture: expert gates and the prediction expert, both
// reading the same gate input.
// Everything starts at zero so every weight begins at exactly one half.
class ExpertMixture {
 public:
  ExpertMixture() = default;
  ExpertMixture(const ExpertLayout& layout, std::size_t input_dim);

  std::vector<Parameter*> parameters() { return {&gate_weight, &gate_bias, &predict_weight, &predict_bias}; }
  [[nodiscard]] const ExpertLayout& layout() const { return layout_; }

  Parameter gate_weight;     // input_dim x K
  Parameter gate_bias;       // K
  Parameter predict_weight;  // input_dim x K
  Parameter predict_bias;    // K

 private:
  ExpertLayout layout_;
};

}  // namespace mesh
