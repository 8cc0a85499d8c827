#include "mesh/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace mesh {

Rank rank_query(std::span<const Real> scores, EntityId o, std::span<const EntityId> filter) {
  require(o < scores.size(), "rank_query: true object outside the score vector");
  const Real target = scores[o];
  std::size_t higher = 0, ties = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (e == o) continue;
    higher += scores[e] > target;
    ties += scores[e] == target;
  }
  std::size_t f_higher = higher, f_ties = ties;
  for (EntityId e : filter) {
    require(e != o, "rank_query: the true object is in the filter set");
    require(e < scores.size(), "rank_query: filter entity outside the score vector");
    f_higher -= scores[e] > target;
    f_ties -= scores[e] == target;
  }
  return {1.0 + static_cast<double>(higher) + 0.5 * static_cast<double>(ties),
          1.0 + static_cast<double>(f_higher) + 0.5 * static_cast<double>(f_ties)};
}

MetricsReport compute_metrics(std::span<const double> ranks) {
  require(!ranks.empty(), "compute_metrics: no ranks");
  MetricsReport m;
  m.count = ranks.size();
  for (double r : ranks) {
    m.mrr += 1.0 / r;
    m.hits1 += r <= 1.0;
    m.hits3 += r <= 3.0;
    m.hits10 += r <= 10.0;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

SplitReport split_metrics(std::span<const double> ranks, std::span<const int> indicators) {
  require(ranks.size() == indicators.size(), "split_metrics: one indicator per rank");
  SplitReport out;
  std::vector<double> his, nhis;
  for (std::size_t i = 0; i < ranks.size(); ++i) (indicators[i] ? his : nhis).push_back(ranks[i]);
  if (!ranks.empty()) out.overall = compute_metrics(ranks);
  if (!his.empty()) out.historical = compute_metrics(his);
  if (!nhis.empty()) out.non_historical = compute_metrics(nhis);
  return out;
}

SplitReport split_metrics(std::span<const RankResult> ranks) {
  std::vector<double> r;
  std::vector<int> ind;
  for (const RankResult& x : ranks) {
    r.push_back(x.filtered_rank);
    ind.push_back(x.indicator);
  }
  return split_metrics(r, ind);
}

namespace {

SampleSummary summarize(const std::vector<double>& xs) {
  SampleSummary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace

GateStats gate_statistics(std::span<const double> alpha, std::span<const int> indicators) {
  require(alpha.size() == indicators.size(), "gate_statistics: one indicator per sample");
  std::vector<double> his, nhis;
  for (std::size_t i = 0; i < alpha.size(); ++i) (indicators[i] ? his : nhis).push_back(alpha[i]);
  GateStats g;
  g.historical = summarize(his);
  g.non_historical = summarize(nhis);
  if (his.size() < 2 || nhis.size() < 2) return g;

  const double n1 = static_cast<double>(his.size()), n2 = static_cast<double>(nhis.size());
  const double v1 = g.historical.stddev * g.historical.stddev / n1;
  const double v2 = g.non_historical.stddev * g.non_historical.stddev / n2;
  const double diff = g.historical.mean - g.non_historical.mean;
  const double se = std::sqrt(v1 + v2);
  if (se == 0) {
    const double inf = std::numeric_limits<double>::infinity();
    g.t_statistic = diff > 0 ? inf : diff < 0 ? -inf : 0.0;
    g.degrees_of_freedom = n1 + n2 - 2;
    g.p_value = diff > 0 ? 0.0 : diff < 0 ? 1.0 : 0.5;
    return g;
  }
  const double t = diff / se;
  const double df = (v1 + v2) * (v1 + v2) / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1));
  const boost::math::students_t dist(df);
  g.t_statistic = t;
  g.degrees_of_freedom = df;
  g.p_value = boost::math::cdf(boost::math::complement(dist, t));
  return g;
}

EvaluationResult evaluate(MeshModel& model, const QueryContext& context, Split split,
                          const EvaluationOptions& options) {
  EvaluationResult result;
  const std::size_t window = model.config().window;
  for (const QueryBatch& batch : context.batches(split)) {
    Tape tape(false, Rng{0}, false);
    const auto history = context.history(batch.t, window);
    StructuralEncoder::Output structure;
    if (options.structural_only || !model.config().ablation.disable_structural)
      structure = model.encode_structure(tape, history);
    Var logits;
    Var weights;
    if (options.structural_only) {
      logits = model.structural_logits(tape, structure, batch);
    } else {
      const ForwardOutputs fw = model.forward(tape, structure, batch);
      logits = fw.logits;
      weights = fw.weights;
    }
    const Tensor& scores = logits.value();
    if (!scores.all_finite())
      throw NumericError("non-finite scores while evaluating " + std::string(split_name(split)) +
                         " timestamp " + std::to_string(batch.t));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      RankResult r;
      r.s = batch.subjects[i];
      r.r = batch.relations[i];
      r.o = batch.objects[i];
      r.t = batch.t;
      r.indicator = batch.indicators[i];
      r.direct = context.is_direct(r.r);
      std::vector<EntityId> filter;
      for (EntityId e : context.answers(r.s, r.r, r.t))
        if (e != r.o) filter.push_back(e);
      const auto row = scores.row(i);
      const Rank rank = rank_query({row.data(), row.size()}, r.o, filter);
      r.raw_rank = rank.raw;
      r.filtered_rank = rank.filtered;
      result.ranks.push_back(r);
      if (r.direct && weights.valid()) {
        result.gate_alpha.push_back(static_cast<double>(weights.value().at(i, 0)));
        result.gate_indicators.push_back(r.indicator);
      }
    }
    if (options.keep_logits) result.logits.push_back(scores);
  }
  result.metrics = split_metrics(result.ranks);
  result.gates = gate_statistics(result.gate_alpha, result.gate_indicators);
  return result;
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_metrics_text(const SplitReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s %8s\n", "bucket", "queries", "MRR", "H@1", "H@3", "H@10");
  out += line;
  auto row = [&](const char* name, const MetricsReport& m) {
    if (m.empty()) {
      std::snprintf(line, sizeof line, "%-16s %8zu %8s %8s %8s %8s\n", name, m.count, "n/a", "n/a", "n/a", "n/a");
    } else {
      std::snprintf(line, sizeof line, "%-16s %8zu %8s %8s %8s %8s\n", name, m.count, percent(m.mrr).c_str(),
                    percent(m.hits1).c_str(), percent(m.hits3).c_str(), percent(m.hits10).c_str());
    }
    out += line;
  };
  row("overall", report.overall);
  row("historical", report.historical);
  row("non_historical", report.non_historical);
  return out;
}

std::string format_metrics_tsv(const SplitReport& report) {
  std::string out;
  auto rows = [&](const char* bucket, const MetricsReport& m) {
    out += std::string("count\t") + bucket + "\t" + std::to_string(m.count) + "\n";
    if (m.empty()) return;
    const std::pair<const char*, double> values[] = {
        {"mrr", m.mrr}, {"hits@1", m.hits1}, {"hits@3", m.hits3}, {"hits@10", m.hits10}};
    for (const auto& [name, v] : values) out += std::string(name) + "\t" + bucket + "\t" + fixed(100.0 * v, 4) + "\n";
  };
  rows("overall", report.overall);
  rows("historical", report.historical);
  rows("non_historical", report.non_historical);
  return out;
}

std::string format_gate_table(const GateStats& stats) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %14s %14s\n", "alpha_1", "Historical", "Non-Historical");
  out += line;
  auto cell = [](const SampleSummary& s, double v, std::size_t need) {
    return s.count >= need ? fixed(v, 4) : std::string("n/a");
  };
  std::snprintf(line, sizeof line, "%-8s %14s %14s\n", "Mean", cell(stats.historical, stats.historical.mean, 1).c_str(),
                cell(stats.non_historical, stats.non_historical.mean, 1).c_str());
  out += line;
  std::snprintf(line, sizeof line, "%-8s %14s %14s\n", "Std", cell(stats.historical, stats.historical.stddev, 2).c_str(),
                cell(stats.non_historical, stats.non_historical.stddev, 2).c_str());
  out += line;
  std::string p = "unavailable (a bucket has fewer than 2 samples)";
  if (stats.p_value) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.3g (t=%.4f, df=%.1f, n=%zu/%zu)", *stats.p_value, *stats.t_statistic,
                  *stats.degrees_of_freedom, stats.historical.count, stats.non_historical.count);
    p = buf;
  }
  out += "p-value  " + p + "\n";
  return out;
}

}  // namespace mesh
