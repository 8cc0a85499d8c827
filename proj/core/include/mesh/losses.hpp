#pragma once

#include <span>
#include <string>

#include "mesh/autodiff.hpp"

namespace mesh {

// literal: negative sum of sigmoid probabilities at the true object.
// cross_entropy: negative sum of log-softmax over logits at the true object.
enum class LossMode { literal, cross_entropy };

const char* loss_mode_name(LossMode m);
LossMode parse_loss_mode(const std::string& text);

// `logits`: (batch x |E|) pre-sigmoid scores; `targets[i]` the true object.
Var major_loss(Var logits, std::span<const std::uint32_t> targets, LossMode mode);

struct ExpertLosses {
  Var historical;
  Var non_historical;
};

// Each event feeds the historical term when its indicator is 1 and the
// non-historical term otherwise.
ExpertLosses expert_losses(Var logits_historical, Var logits_non_historical, std::span<const std::uint32_t> targets,
                           std::span<const int> indicators, LossMode mode);

// major + weight * (historical + non_historical).
Var total_loss(Var major, const ExpertLosses& experts, Real weight);
Real total_loss(Real major, Real historical, Real non_historical, Real weight);

}  // namespace mesh
