#include "mesh/query_context.hpp"

#include <algorithm>

namespace mesh {

QueryContext::QueryContext(const Dataset& raw) {
  data_.vocab = add_inverse_relations(raw.vocab);
  data_.train = add_inverse_relations(raw.train, raw.vocab);
  data_.valid = add_inverse_relations(raw.valid, raw.vocab);
  data_.test = add_inverse_relations(raw.test, raw.vocab);
  merged_ = data_.merged();
  timeline_ = build_timeline(merged_, data_.vocab.num_timestamps);
  index_ = FrequencyIndex::build(merged_);
  answers_.resize(merged_.num_snapshots());
  for (std::size_t t = 0; t < merged_.num_snapshots(); ++t) {
    auto& bucket = answers_[t];
    for (const Quadruple& q : merged_.snapshot(t)) {
      auto& objects = bucket[FrequencyIndex::pair_key(q.s, q.r)];
      if (std::find(objects.begin(), objects.end(), q.o) == objects.end()) objects.push_back(q.o);
    }
  }
}

const TemporalKG& QueryContext::split(Split s) const {
  switch (s) {
    case Split::train: return data_.train;
    case Split::valid: return data_.valid;
    case Split::test: return data_.test;
    case Split::merged: return merged_;
  }
  return merged_;
}

std::vector<const SnapshotGraph*> QueryContext::history(Timestamp t, std::size_t window) const {
  return history_window(timeline_, t, window);
}

std::span<const EntityId> QueryContext::answers(EntityId s, RelationId r, Timestamp t) const {
  if (t >= answers_.size()) return {};
  const auto it = answers_[t].find(FrequencyIndex::pair_key(s, r));
  if (it == answers_[t].end()) return {};
  return it->second;
}

std::vector<QueryBatch> QueryContext::batches(Split s, std::size_t batch_size) const {
  const TemporalKG& kg = split(s);
  std::vector<QueryBatch> out;
  for (std::size_t t = 0; t < kg.num_snapshots(); ++t) {
    const auto& facts = kg.snapshot(t);
    const std::size_t chunk = batch_size == 0 ? facts.size() : batch_size;
    for (std::size_t begin = 0; begin < facts.size(); begin += chunk) {
      QueryBatch b;
      b.t = static_cast<Timestamp>(t);
      for (std::size_t i = begin; i < std::min(facts.size(), begin + chunk); ++i) {
        const Quadruple& q = facts[i];
        b.subjects.push_back(q.s);
        b.relations.push_back(q.r);
        b.objects.push_back(q.o);
        b.indicators.push_back(index_.indicator(q));
      }
      out.push_back(std::move(b));
    }
  }
  return out;
}

}  // namespace mesh
