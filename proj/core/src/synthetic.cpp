#include "mesh/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mesh/rng.hpp"

namespace mesh {

Dataset synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.entities < 2 || spec.relations < 1 || spec.timestamps < 3 || spec.facts_per_timestamp < 1)
    throw ConfigError("synthetic dataset: too small");
  Dataset ds;
  for (std::size_t e = 0; e < spec.entities; ++e) ds.vocab.entity_names.push_back("entity_" + std::to_string(e));
  for (std::size_t r = 0; r < spec.relations; ++r) ds.vocab.relation_names.push_back("relation_" + std::to_string(r));
  ds.vocab.base_relations = spec.relations;
  ds.vocab.num_timestamps = spec.timestamps;

  Rng rng(spec.seed);
  const auto ne = static_cast<std::uint32_t>(spec.entities);
  const auto nr = static_cast<std::uint32_t>(spec.relations);
  auto rule_object = [&](EntityId s, RelationId r) { return static_cast<EntityId>((3 * s + 7 * r + 1) % ne); };
  std::vector<Quadruple> pool;
  for (std::size_t i = 0; i < spec.recurring_pool; ++i) {
    const auto s = static_cast<EntityId>(rng.below(ne));
    const auto r = static_cast<RelationId>(rng.below(nr));
    EntityId o = static_cast<EntityId>(rng.below(ne));
    if (o == s) o = (o + 1) % ne;
    pool.push_back({s, r, o, 0});
  }

  const auto held = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.holdout * static_cast<double>(spec.timestamps))));
  const std::size_t test_from = spec.timestamps - held;
  const std::size_t valid_from = test_from - held;
  ds.train = TemporalKG(Split::train, valid_from);
  ds.valid = TemporalKG(Split::valid, test_from);
  ds.test = TemporalKG(Split::test, spec.timestamps);

  for (std::size_t t = 0; t < spec.timestamps; ++t) {
    std::set<std::tuple<EntityId, RelationId, EntityId>> seen;
    TemporalKG& target = t >= test_from ? ds.test : t >= valid_from ? ds.valid : ds.train;
    for (std::size_t attempts = 0; seen.size() < spec.facts_per_timestamp && attempts < 20 * spec.facts_per_timestamp;
         ++attempts) {
      const double u = rng.uniform();
      Quadruple q;
      if (!pool.empty() && u < spec.repeat_probability) {
        q = pool[rng.below(pool.size())];
      } else {
        q.s = static_cast<EntityId>(rng.below(ne));
        q.r = static_cast<RelationId>(rng.below(nr));
        q.o = u < spec.repeat_probability + spec.rule_probability ? rule_object(q.s, q.r)
                                                                  : static_cast<EntityId>(rng.below(ne));
      }
      q.t = static_cast<Timestamp>(t);
      if (seen.emplace(q.s, q.r, q.o).second) target.add(q);
    }
  }
  return ds;
}

}  // namespace mesh
