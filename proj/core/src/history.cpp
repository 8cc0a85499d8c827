#include "mesh/history.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mesh {

std::uint64_t FrequencyIndex::triple_key(EntityId s, RelationId r, EntityId o) {
  require(s < (1u << 24) && o < (1u << 24) && r < (1u << 16), "frequency index: id exceeds key width");
  return (std::uint64_t{s} << 40) | (std::uint64_t{r} << 24) | std::uint64_t{o};
}

std::uint64_t FrequencyIndex::pair_key(EntityId s, RelationId r) { return (std::uint64_t{s} << 32) | r; }

FrequencyIndex::FrequencyIndex(std::span<const Quadruple> facts) : fact_count_(facts.size()) {
  for (const Quadruple& q : facts) {
    occurrences_[triple_key(q.s, q.r, q.o)].push_back(q.t);
    ++pair_counts_[pair_key(q.s, q.r)][q.o];
    ++subject_counts_[q.s][q.o];
  }
  for (auto& [key, times] : occurrences_) std::sort(times.begin(), times.end());
}

FrequencyIndex FrequencyIndex::build(const TemporalKG& kg) {
  const auto facts = kg.facts();
  return FrequencyIndex(facts);
}

std::size_t FrequencyIndex::frequency(EntityId s, RelationId r, EntityId o, Timestamp t) const {
  const auto it = occurrences_.find(triple_key(s, r, o));
  if (it == occurrences_.end()) return 0;
  return static_cast<std::size_t>(std::lower_bound(it->second.begin(), it->second.end(), t) - it->second.begin());
}

const std::unordered_map<EntityId, std::size_t>* FrequencyIndex::pair_objects(EntityId s, RelationId r) const {
  const auto it = pair_counts_.find(pair_key(s, r));
  return it == pair_counts_.end() ? nullptr : &it->second;
}

const std::unordered_map<EntityId, std::size_t>* FrequencyIndex::subject_objects(EntityId s) const {
  const auto it = subject_counts_.find(s);
  return it == subject_counts_.end() ? nullptr : &it->second;
}

// ---- naive baseline ----------------------------------------------------------

const std::unordered_map<EntityId, std::size_t>* NaiveRanker::counts_for(EntityId s, RelationId r) const {
  if (const auto* pair = index_.pair_objects(s, r)) return pair;
  return index_.subject_objects(s);
}

std::vector<EntityId> NaiveRanker::rank(EntityId s, RelationId r) const {
  std::vector<std::size_t> count(num_entities_, 0);
  if (const auto* counts = counts_for(s, r))
    for (const auto& [o, c] : *counts) count[o] = c;
  std::vector<EntityId> order(num_entities_);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<EntityId>(i);
  std::stable_sort(order.begin(), order.end(), [&](EntityId a, EntityId b) { return count[a] > count[b]; });
  return order;
}

std::size_t NaiveRanker::position(EntityId s, RelationId r, EntityId o) const {
  const auto* counts = counts_for(s, r);
  std::size_t target = 0;
  if (counts) {
    const auto it = counts->find(o);
    if (it != counts->end()) target = it->second;
  }
  std::size_t ahead = 0;
  if (target == 0) {
    // Everything with a positive count, then zero-count ids below o.
    std::size_t positive = counts ? counts->size() : 0;
    std::size_t positive_below = 0;
    if (counts)
      for (const auto& [e, c] : *counts)
        if (e < o) ++positive_below;
    ahead = positive + (o - positive_below);
  } else {
    for (const auto& [e, c] : *counts)
      if (c > target || (c == target && e < o)) ++ahead;
  }
  return ahead + 1;
}

NaiveResult evaluate_naive(const Dataset& dataset) {
  const FrequencyIndex index = FrequencyIndex::build(dataset.train);
  const NaiveRanker ranker(index, dataset.vocab.num_entities());
  NaiveResult result;
  for (const auto& snap : dataset.test.snapshots()) {
    for (const Quadruple& q : snap) {
      const std::size_t pos = ranker.position(q.s, q.r, q.o);
      ++result.queries;
      result.mrr += 1.0 / static_cast<double>(pos);
      result.hits1 += pos <= 1;
      result.hits3 += pos <= 3;
      result.hits10 += pos <= 10;
    }
  }
  if (result.queries > 0) {
    const auto n = static_cast<double>(result.queries);
    result.mrr /= n;
    result.hits1 /= n;
    result.hits3 /= n;
    result.hits10 /= n;
  }
  return result;
}

// ---- statistics ------------------------------------------------------------

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats st;
  st.entities = dataset.vocab.num_entities();
  st.relations = dataset.vocab.base_relations;
  st.timestamps = dataset.vocab.num_timestamps;
  st.train = dataset.train.fact_count();
  st.valid = dataset.valid.fact_count();
  st.test = dataset.test.fact_count();
  const FrequencyIndex all = FrequencyIndex::build(dataset.merged());
  for (const auto& snap : dataset.test.snapshots())
    for (const Quadruple& q : snap) st.historical_test += static_cast<std::size_t>(all.indicator(q));
  return st;
}

std::string format_stats_table(const DatasetStats& st, const std::string& name) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-12s %8s %6s %9s %9s %9s %8s %9s\n"
                "%-12s %8zu %6zu %9zu %9zu %9zu %8zu %8.1f%%\n",
                "Dataset", "|E|", "|R|", "Train", "Valid", "Test", "|F_his|", "Rate_his", name.c_str(), st.entities,
                st.relations, st.train, st.valid, st.test, st.historical_test, 100.0 * st.historical_rate());
  return buf;
}

std::string format_stats_kv(const DatasetStats& st) {
  std::ostringstream out;
  out << "entities\t" << st.entities << '\n'
      << "relations\t" << st.relations << '\n'
      << "timestamps\t" << st.timestamps << '\n'
      << "train\t" << st.train << '\n'
      << "valid\t" << st.valid << '\n'
      << "test\t" << st.test << '\n'
      << "historical_test\t" << st.historical_test << '\n';
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.6f", st.historical_rate());
  out << "historical_rate\t" << rate << '\n';
  return out.str();
}

}  // namespace mesh
