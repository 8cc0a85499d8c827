#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mesh/query_context.hpp"

namespace mesh {

struct RankResult {
  EntityId s = 0;
  RelationId r = 0;
  EntityId o = 0;
  Timestamp t = 0;
  double raw_rank = 1;
  double filtered_rank = 1;
  int indicator = 0;
  bool direct = true;
};

struct Rank {
  double raw = 1;
  double filtered = 1;
};

// 1 + #(strictly higher) + #(exact ties) / 2. The filtered rank ignores the
// entities in `filter`, which must not contain `o`.
Rank rank_query(std::span<const Real> scores, EntityId o, std::span<const EntityId> filter);

struct MetricsReport {
  std::size_t count = 0;
  double mrr = 0;
  double hits1 = 0, hits3 = 0, hits10 = 0;

  [[nodiscard]] bool empty() const { return count == 0; }
};

// Over filtered ranks. Throws ContractError on an empty list.
MetricsReport compute_metrics(std::span<const double> ranks);

struct SplitReport {
  MetricsReport overall;
  MetricsReport historical;      // empty when no query is historical
  MetricsReport non_historical;  // empty when every query is historical
};

SplitReport split_metrics(std::span<const double> ranks, std::span<const int> indicators);
SplitReport split_metrics(std::span<const RankResult> ranks);

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0;
  double stddev = 0;  // sample standard deviation, n - 1 denominator
};

struct GateStats {
  SampleSummary historical;
  SampleSummary non_historical;
  // Welch one-sided test of mean(historical) > mean(non_historical);
  // absent when a bucket has fewer than two samples.
  std::optional<double> t_statistic;
  std::optional<double> degrees_of_freedom;
  std::optional<double> p_value;
};

GateStats gate_statistics(std::span<const double> alpha, std::span<const int> indicators);

struct EvaluationOptions {
  // Rank with the structural decoder alone, as during encoder pre-training.
  bool structural_only = false;
  bool keep_logits = false;
};

struct EvaluationResult {
  std::vector<RankResult> ranks;
  SplitReport metrics;
  // First prediction-expert weight of every direct query with its indicator.
  std::vector<double> gate_alpha;
  std::vector<int> gate_indicators;
  GateStats gates;
  std::vector<Tensor> logits;  // per batch, when requested
};

// Direct and inverse queries of `split`, each conditioned on the snapshots
// before its timestamp.
EvaluationResult evaluate(MeshModel& model, const QueryContext& context, Split split,
                          const EvaluationOptions& options = {});

std::string format_metrics_text(const SplitReport& report);
// `metric<TAB>bucket<TAB>value` lines.
std::string format_metrics_tsv(const SplitReport& report);
std::string format_gate_table(const GateStats& stats);

}  // namespace mesh
