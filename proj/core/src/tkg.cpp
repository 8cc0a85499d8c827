#include "mesh/tkg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "mesh/rng.hpp"

namespace mesh {

namespace fs = std::filesystem;

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::merged: return "merged";
  }
  return "?";
}

TemporalKG::TemporalKG(Split split, std::size_t num_timestamps) : split_(split), snapshots_(num_timestamps) {}

TemporalKG TemporalKG::from_facts(Split split, std::span<const Quadruple> facts, std::size_t num_timestamps) {
  TemporalKG kg(split, num_timestamps);
  for (const Quadruple& q : facts) kg.add(q);
  return kg;
}

void TemporalKG::add(const Quadruple& q) {
  if (q.t >= snapshots_.size()) snapshots_.resize(static_cast<std::size_t>(q.t) + 1);
  snapshots_[q.t].push_back(q);
}

const std::vector<Quadruple>& TemporalKG::snapshot(std::size_t t) const {
  static const std::vector<Quadruple> kEmpty;
  return t < snapshots_.size() ? snapshots_[t] : kEmpty;
}

std::size_t TemporalKG::fact_count() const {
  std::size_t n = 0;
  for (const auto& s : snapshots_) n += s.size();
  return n;
}

std::vector<Quadruple> TemporalKG::facts() const {
  std::vector<Quadruple> out;
  out.reserve(fact_count());
  for (const auto& s : snapshots_) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<Timestamp> TemporalKG::active_timestamps() const {
  std::vector<Timestamp> out;
  for (std::size_t t = 0; t < snapshots_.size(); ++t)
    if (!snapshots_[t].empty()) out.push_back(static_cast<Timestamp>(t));
  return out;
}

RelationId TemporalKG::max_relation() const {
  RelationId m = 0;
  for (const auto& s : snapshots_)
    for (const Quadruple& q : s) m = std::max(m, q.r);
  return m;
}

TemporalKG Dataset::merged() const {
  TemporalKG out(Split::merged, vocab.num_timestamps);
  for (const TemporalKG* kg : {&train, &valid, &test})
    for (const auto& snap : kg->snapshots())
      for (const Quadruple& q : snap) out.add(q);
  return out;
}

// ---- loading ---------------------------------------------------------------

namespace {

struct RawFact {
  std::uint64_t s, r, o;
  std::int64_t t;
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <class Int>
bool parse_int(std::string_view text, Int& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && !text.empty();
}

std::ifstream open_or_throw(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return in;
}

std::string where(const fs::path& file, std::size_t line) { return file.string() + ":" + std::to_string(line); }

std::vector<std::string> read_id_file(const fs::path& file) {
  std::ifstream in = open_or_throw(file);
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    std::size_t id = 0;
    if (fields.size() < 2 || !parse_int(fields[1], id))
      throw DataError(where(file, number) + ": expected name<TAB>id");
    rows.emplace_back(id, std::string(fields[0]));
  }
  std::vector<std::string> names(rows.size());
  std::vector<bool> seen(rows.size(), false);
  std::unordered_set<std::string> unique;
  for (const auto& [id, name] : rows) {
    if (id >= rows.size() || seen[id])
      throw DataError(file.string() + ": ids must be dense 0.." + std::to_string(rows.size() - 1) +
                      ", got " + std::to_string(id));
    if (!unique.insert(name).second) throw DataError(file.string() + ": duplicate name '" + name + "'");
    seen[id] = true;
    names[id] = name;
  }
  return names;
}

std::vector<RawFact> read_fact_file(const fs::path& file, std::size_t num_entities, std::size_t num_relations) {
  std::ifstream in = open_or_throw(file);
  std::vector<RawFact> facts;
  std::string line;
  std::size_t number = 0;
  std::int64_t previous_t = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    RawFact f{};
    if (fields.size() < 4 || !parse_int(fields[0], f.s) || !parse_int(fields[1], f.r) ||
        !parse_int(fields[2], f.o) || !parse_int(fields[3], f.t))
      throw DataError(where(file, number) + ": expected s<TAB>r<TAB>o<TAB>t with integer fields");
    if (f.s >= num_entities || f.o >= num_entities)
      throw DataError(where(file, number) + ": entity id out of range (|E|=" + std::to_string(num_entities) + ")");
    if (f.r >= num_relations)
      throw DataError(where(file, number) + ": relation id out of range (|R|=" + std::to_string(num_relations) + ")");
    if (f.t < 0) throw DataError(where(file, number) + ": negative timestamp");
    if (f.t < previous_t) throw DataError(where(file, number) + ": timestamps must be non-decreasing");
    previous_t = f.t;
    facts.push_back(f);
  }
  return facts;
}

}  // namespace

Dataset load_dataset(const fs::path& directory) {
  for (const char* name : {"train.txt", "valid.txt", "test.txt", "entity2id.txt", "relation2id.txt"})
    if (!fs::exists(directory / name)) throw DataError("missing dataset file " + (directory / name).string());

  Dataset ds;
  ds.vocab.entity_names = read_id_file(directory / "entity2id.txt");
  ds.vocab.relation_names = read_id_file(directory / "relation2id.txt");
  ds.vocab.base_relations = ds.vocab.relation_names.size();
  const std::size_t ne = ds.vocab.num_entities(), nr = ds.vocab.num_relations();

  const auto train = read_fact_file(directory / "train.txt", ne, nr);
  const auto valid = read_fact_file(directory / "valid.txt", ne, nr);
  const auto test = read_fact_file(directory / "test.txt", ne, nr);

  std::set<std::int64_t> times;
  for (const auto* split : {&train, &valid, &test})
    for (const RawFact& f : *split) times.insert(f.t);
  std::int64_t origin = 0, step = 1;
  if (!times.empty()) {
    origin = *times.begin();
    std::int64_t gap = std::numeric_limits<std::int64_t>::max();
    for (auto it = std::next(times.begin()); it != times.end(); ++it) gap = std::min(gap, *it - *std::prev(it));
    if (gap != std::numeric_limits<std::int64_t>::max()) step = gap;
  }
  auto normalize = [&](std::int64_t t) { return static_cast<Timestamp>((t - origin) / step); };
  ds.vocab.num_timestamps = times.empty() ? 0 : static_cast<std::size_t>(normalize(*times.rbegin())) + 1;

  auto build = [&](Split split, const std::vector<RawFact>& raw) {
    TemporalKG kg(split, 0);
    for (const RawFact& f : raw)
      kg.add({static_cast<EntityId>(f.s), static_cast<RelationId>(f.r), static_cast<EntityId>(f.o), normalize(f.t)});
    return kg;
  };
  ds.train = build(Split::train, train);
  ds.valid = build(Split::valid, valid);
  ds.test = build(Split::test, test);
  return ds;
}

void write_facts(const TemporalKG& kg, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& snap : kg.snapshots())
    for (const Quadruple& q : snap) out << q.s << '\t' << q.r << '\t' << q.o << '\t' << q.t << '\n';
}

void save_dataset(const Dataset& dataset, const fs::path& directory) {
  fs::create_directories(directory);
  write_facts(dataset.train, directory / "train.txt");
  write_facts(dataset.valid, directory / "valid.txt");
  write_facts(dataset.test, directory / "test.txt");
  auto write_names = [&](const std::vector<std::string>& names, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << i << '\n';
  };
  write_names(dataset.vocab.entity_names, directory / "entity2id.txt");
  const auto& rel = dataset.vocab.relation_names;
  write_names({rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(dataset.vocab.base_relations)},
              directory / "relation2id.txt");
}

// ---- transformations -------------------------------------------------------

Vocabulary add_inverse_relations(const Vocabulary& vocab) {
  require(!vocab.has_inverses(), "add_inverse_relations: vocabulary already augmented");
  Vocabulary out = vocab;
  out.base_relations = vocab.relation_names.size();
  for (const std::string& name : vocab.relation_names) out.relation_names.push_back(name + "_inverse");
  return out;
}

TemporalKG add_inverse_relations(const TemporalKG& kg, const Vocabulary& vocab) {
  const std::size_t base = vocab.base_relations;
  if (kg.fact_count() > 0 && kg.max_relation() >= base)
    throw ContractError("add_inverse_relations: graph already contains relation ids >= |R|");
  TemporalKG out(kg.split(), kg.num_snapshots());
  for (const auto& snap : kg.snapshots()) {
    for (const Quadruple& q : snap) out.add(q);
    for (const Quadruple& q : snap) out.add(inverse_of(q, base));
  }
  return out;
}

std::pair<TemporalKG, Vocabulary> add_inverse_relations_pair(const TemporalKG& kg, const Vocabulary& vocab) {
  TemporalKG g = add_inverse_relations(kg, vocab);
  return {std::move(g), add_inverse_relations(vocab)};
}

TemporalKG drop_history_fraction(const TemporalKG& kg, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("drop_history_fraction: fraction must lie in [0, 1], got " + std::to_string(fraction));
  const std::size_t n = kg.fact_count();
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < drop; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < drop; ++i) removed[order[i]] = true;

  TemporalKG out(kg.split(), kg.num_snapshots());
  std::size_t index = 0;
  for (const auto& snap : kg.snapshots())
    for (const Quadruple& q : snap)
      if (!removed[index++]) out.add(q);
  return out;
}

Dataset truncate_timestamps(const Dataset& dataset, std::size_t limit, double holdout) {
  Dataset out;
  out.vocab = dataset.vocab;
  out.vocab.num_timestamps = std::min(limit, dataset.vocab.num_timestamps);
  auto keep = [&](const TemporalKG& kg) {
    TemporalKG k(kg.split(), 0);
    for (std::size_t t = 0; t < std::min(limit, kg.num_snapshots()); ++t)
      for (const Quadruple& q : kg.snapshot(t)) k.add(q);
    return k;
  };
  out.train = keep(dataset.train);
  out.valid = keep(dataset.valid);
  out.test = keep(dataset.test);
  if (out.valid.fact_count() > 0 && out.test.fact_count() > 0) return out;

  const TemporalKG timeline = out.merged();
  const auto active = timeline.active_timestamps();
  const std::size_t n = active.size();
  const auto held = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(holdout * static_cast<double>(n))));
  if (n < 3 * held) throw DataError("truncate_timestamps: too few timestamps to re-split");
  const Timestamp test_from = active[n - held];
  const Timestamp valid_from = active[n - 2 * held];
  out.train = TemporalKG(Split::train, 0);
  out.valid = TemporalKG(Split::valid, 0);
  out.test = TemporalKG(Split::test, 0);
  for (const auto& snap : timeline.snapshots())
    for (const Quadruple& q : snap) (q.t >= test_from ? out.test : q.t >= valid_from ? out.valid : out.train).add(q);
  return out;
}

}  // namespace mesh
