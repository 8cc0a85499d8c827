#pragma once

#include "mesh/tkg.hpp"

namespace mesh {

// A small temporal graph with learnable regularities: a pool of recurring
// triples that reappear over time, plus fresh facts whose object follows a
// fixed rule of (subject, relation), plus uniform noise.
struct SyntheticSpec {
  std::size_t entities = 40;
  std::size_t relations = 4;
  std::size_t timestamps = 20;
  std::size_t facts_per_timestamp = 24;
  std::size_t recurring_pool = 30;
  double repeat_probability = 0.5;
  double rule_probability = 0.35;  // remaining mass is uniform noise
  double holdout = 0.1;            // trailing fraction of timestamps for valid and for test
  std::uint64_t seed = 1;
};

Dataset synthetic_dataset(const SyntheticSpec& spec);

}  // namespace mesh
