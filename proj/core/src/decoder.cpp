#include "mesh/decoder.hpp"

#include "mesh/structural.hpp"

namespace mesh {

ConvTransE::ConvTransE(const std::string& name, const ConvTransEConfig& config, Rng& rng) : config_(config) {
  const std::size_t c = config.channels, w = config.kernel_width, d = config.dim;
  require(w % 2 == 1, "ConvTransE: kernel width must be odd");
  kernel = Parameter(name + ".kernel", xavier_uniform({c, 2, w}, 2 * w, c * w, rng));
  kernel_bias = Parameter(name + ".kernel_bias", Tensor({c}));
  projection = Parameter(name + ".projection", xavier_uniform({c * d, d}, c * d, d, rng));
  projection_bias = Parameter(name + ".projection_bias", Tensor({d}));
}

Var ConvTransE::decode(Tape& tape, Var entity, Var relation) {
  const std::size_t d = config_.dim;
  require(entity.shape() == relation.shape() && entity.cols() == d,
          "ConvTransE: expected two (batch x " + std::to_string(d) + ") inputs, got " +
              shape_string(entity.shape()) + " and " + shape_string(relation.shape()));
  const std::size_t batch = entity.rows();
  const Var channels[] = {reshape(entity, {batch, 1, d}), reshape(relation, {batch, 1, d})};
  Var stacked = concat(channels, 1);
  Var features = conv1d(stacked, tape.param(kernel), tape.param(kernel_bias));
  features = dropout(relu(features), config_.dropout);
  Var flat = reshape(features, {batch, config_.channels * d});
  return add_bias(matmul(flat, tape.param(projection)), tape.param(projection_bias));
}

}  // namespace mesh
