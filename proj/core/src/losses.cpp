#include "mesh/losses.hpp"

namespace mesh {

const char* loss_mode_name(LossMode m) { return m == LossMode::literal ? "literal" : "cross_entropy"; }

LossMode parse_loss_mode(const std::string& text) {
  if (text == "literal") return LossMode::literal;
  if (text == "cross_entropy") return LossMode::cross_entropy;
  throw ConfigError("loss_mode must be literal or cross_entropy, got '" + text + "'");
}

namespace {

// Per-event score of the true object, (batch x 1).
Var true_object_terms(Var logits, std::span<const std::uint32_t> targets, LossMode mode) {
  require(logits.rows() == targets.size(), "loss: " + std::to_string(targets.size()) + " targets for " +
                                               std::to_string(logits.rows()) + " rows");
  for (std::uint32_t o : targets) require(o < logits.cols(), "loss: target outside the entity range");
  return pick(mode == LossMode::literal ? sigmoid(logits) : log_softmax(logits), targets);
}

}  // namespace

Var major_loss(Var logits, std::span<const std::uint32_t> targets, LossMode mode) {
  return scale(sum(true_object_terms(logits, targets, mode)), -1);
}

ExpertLosses expert_losses(Var logits_historical, Var logits_non_historical, std::span<const std::uint32_t> targets,
                           std::span<const int> indicators, LossMode mode) {
  require(indicators.size() == targets.size(), "expert_losses: indicator count differs from target count");
  Tensor his_mask({targets.size(), 1}), nhis_mask({targets.size(), 1});
  for (std::size_t i = 0; i < indicators.size(); ++i) {
    require(indicators[i] == 0 || indicators[i] == 1, "expert_losses: indicator must be 0 or 1");
    his_mask[i] = static_cast<Real>(indicators[i]);
    nhis_mask[i] = static_cast<Real>(1 - indicators[i]);
  }
  Tape& tape = logits_historical.tape();
  Var his = true_object_terms(logits_historical, targets, mode) * tape.constant(std::move(his_mask));
  Var nhis = true_object_terms(logits_non_historical, targets, mode) * tape.constant(std::move(nhis_mask));
  return {scale(sum(his), -1), scale(sum(nhis), -1)};
}

Var total_loss(Var major, const ExpertLosses& experts, Real weight) {
  require(weight >= 0, "total_loss: expert weight must be non-negative");
  return major + scale(experts.historical + experts.non_historical, weight);
}

Real total_loss(Real major, Real historical, Real non_historical, Real weight) {
  return major + weight * (historical + non_historical);
}

}  // namespace mesh
