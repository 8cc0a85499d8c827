#include "mesh/experts.hpp"

namespace mesh {

void ExpertLayout::validate() const {
  if (historical < 1 || non_historical < 1)
    throw ConfigError("expert layout needs at least one historical and one non-historical expert");
}

Var gate_values(Var x, Var weight, Var bias) {
  require(weight.shape().size() == 2 && x.cols() == weight.rows(),
          "gate: input " + shape_string(x.shape()) + " does not match weight " + shape_string(weight.shape()));
  return sigmoid(add_bias(matmul(x, weight), bias));
}

Var expert_mix(Var alpha, Var q_structural, Var q_semantic) {
  require(q_structural.shape() == q_semantic.shape(), "expert_mix: query shapes differ");
  require(alpha.rows() == q_structural.rows() && alpha.cols() == 1, "expert_mix: alpha must be (batch x 1)");
  return mul_rows(q_structural, alpha) + mul_rows(q_semantic, add_scalar(scale(alpha, -1), 1));
}

Var partial_fuse(Var weights, std::span<const Var> experts, std::size_t begin, std::size_t end) {
  require(weights.cols() == experts.size(), "fuse: " + std::to_string(weights.cols()) + " weights for " +
                                                std::to_string(experts.size()) + " experts");
  require(begin < end && end <= experts.size(), "fuse: empty or out-of-range expert range");
  Var out = mul_rows(experts[begin], slice_cols(weights, begin, begin + 1));
  for (std::size_t i = begin + 1; i < end; ++i) out = out + mul_rows(experts[i], slice_cols(weights, i, i + 1));
  return out;
}

FusedQuery fuse(Var weights, std::span<const Var> experts, const ExpertLayout& layout) {
  require(experts.size() == layout.total(), "fuse: expert count does not match layout");
  FusedQuery out;
  out.historical = partial_fuse(weights, experts, 0, layout.historical);
  out.non_historical = partial_fuse(weights, experts, layout.historical, layout.total());
  out.combined = out.historical + out.non_historical;
  return out;
}

Var score_logits(Var query, Var entities) {
  require(query.cols() == entities.cols(), "score: query dim " + std::to_string(query.cols()) +
                                               " vs entity table " + shape_string(entities.shape()));
  return matmul(query, transpose(entities));
}

Var score(Var query, Var entities) { return sigmoid(score_logits(query, entities)); }

ExpertMixture::ExpertMixture(const ExpertLayout& layout, std::size_t input_dim)
    : gate_weight("experts.gate.weight", Tensor({input_dim, layout.total()})),
      gate_bias("experts.gate.bias", Tensor({layout.total()})),
      predict_weight("experts.predict.weight", Tensor({input_dim, layout.total()})),
      predict_bias("experts.predict.bias", Tensor({layout.total()})),
      layout_(layout) {
  layout.validate();
}

}  // namespace mesh
