#pragma once

#include <string>
#include <vector>

#include "mesh/autodiff.hpp"

namespace mesh {

struct ConvTransEConfig {
  std::size_t dim = 100;
  std::size_t channels = 50;
  std::size_t kernel_width = 3;
  Real dropout = Real{0.2};
};

// ConvTransE query decoder: the (entity, relation) pair becomes a 2-channel
// signal of length d, passes through `channels` same-padded convolutions,
// relu and dropout, and is projected back to d.
class ConvTransE {
 public:
  ConvTransE() = default;
  ConvTransE(const std::string& name, const ConvTransEConfig& config, Rng& rng);

  // entity, relation: (batch x d). Returns (batch x d).
  Var decode(Tape& tape, Var entity, Var relation);

  std::vector<Parameter*> parameters() { return {&kernel, &kernel_bias, &projection, &projection_bias}; }
  [[nodiscard]] const ConvTransEConfig& config() const { return config_; }

  Parameter kernel;           // channels x 2 x width
  Parameter kernel_bias;      // channels
  Parameter projection;       // (channels * d) x d
  Parameter projection_bias;  // d

 private:
  ConvTransEConfig config_;
};

}  // namespace mesh
