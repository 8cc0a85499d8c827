#include <gtest/gtest.h>

#include <cmath>

#include "mesh/structural.hpp"
#include "support/fixtures.hpp"

namespace mesh {
namespace {

StructuralConfig small_config(bool normalize = true) {
  StructuralConfig c;
  c.num_entities = 6;
  c.num_relations = 4;
  c.dim = 5;
  c.layers = 2;
  c.window = 3;
  c.dropout = Real{0.2};
  c.normalize = normalize;
  return c;
}

std::vector<SnapshotGraph> small_timeline(std::size_t timestamps) {
  const auto facts = testing::random_facts(40, 6, 4, timestamps, 3);
  return build_timeline(TemporalKG::from_facts(Split::merged, facts, timestamps), timestamps);
}

TEST(StructuralEncoder, EmptyHistoryReturnsInitialTables) {
  Rng rng(1);
  StructuralEncoder enc(small_config(), rng);
  Tape tape;
  const auto out = enc.encode(tape, {});
  EXPECT_EQ(out.entities.value(), enc.entity_init.value);
  EXPECT_EQ(out.relations.value(), enc.relation_init.value);
}

TEST(StructuralEncoder, ZeroWeightsFollowHandEvaluatedCell) {
  StructuralConfig c;
  c.num_entities = 2;
  c.num_relations = 2;
  c.dim = 2;
  c.layers = 2;
  c.normalize = false;
  Rng rng(2);
  StructuralEncoder enc(c, rng);
  for (Parameter* p : enc.parameters()) p->value.fill(0);
  enc.entity_init.value = Tensor::matrix(2, 2, {0.3, -0.6, 0.9, 0.1});
  enc.relation_init.value = Tensor::matrix(2, 2, {0.5, -0.2, 0.4, 0.7});
  enc.time_gate_bias.value = Tensor({2}, std::vector<Real>{0.4, -1.1});
  enc.gru_bias_ih.value = Tensor({6}, std::vector<Real>{0.2, -0.3, 0.5, 0.1, 0.6, -0.4});
  enc.gru_bias_hh.value = Tensor({6}, std::vector<Real>{-0.1, 0.2, 0.3, -0.5, 0.7, 0.9});
  const std::vector<Quadruple> edge = {{0, 0, 1, 0}};
  const SnapshotGraph g = SnapshotGraph::from_facts(0, edge);
  const SnapshotGraph* history[] = {&g};
  Tape tape;
  const auto out = enc.encode(tape, history);

  auto sig = [](double x) { return 1 / (1 + std::exp(-x)); };
  const double bih[6] = {0.2, -0.3, 0.5, 0.1, 0.6, -0.4};
  const double bhh[6] = {-0.1, 0.2, 0.3, -0.5, 0.7, 0.9};
  const double rel0[2][2] = {{0.5, -0.2}, {0.4, 0.7}};
  for (int r = 0; r < 2; ++r)
    for (int j = 0; j < 2; ++j) {
      const double reset = sig(bih[j] + bhh[j]);
      const double update = sig(bih[2 + j] + bhh[2 + j]);
      const double cand = std::tanh(bih[4 + j] + reset * bhh[4 + j]);
      EXPECT_NEAR(out.relations.value().at(r, j), (1 - update) * cand + update * rel0[r][j], 1e-15);
    }
  // Aggregation output is zero, so entities shrink by (1 - gate).
  const double ent0[2][2] = {{0.3, -0.6}, {0.9, 0.1}};
  const double gate_bias[2] = {0.4, -1.1};
  for (int e = 0; e < 2; ++e)
    for (int j = 0; j < 2; ++j)
      EXPECT_NEAR(out.entities.value().at(e, j), (1 - sig(gate_bias[j])) * ent0[e][j], 1e-15);
}

TEST(StructuralEncoder, OutputShapesFollowVocabulary) {
  Rng rng(3);
  StructuralEncoder enc(small_config(), rng);
  const auto timeline = small_timeline(8);
  for (Timestamp t : {0u, 1u, 5u, 8u}) {
    const auto history = history_window(timeline, t, 3);
    Tape tape;
    const auto out = enc.encode(tape, history);
    EXPECT_EQ(out.entities.shape(), (Shape{6, 5}));
    EXPECT_EQ(out.relations.shape(), (Shape{4, 5}));
  }
}

TEST(StructuralEncoder, NormalizedRowsHaveUnitLength) {
  Rng rng(4);
  StructuralEncoder enc(small_config(), rng);
  const auto timeline = small_timeline(6);
  Tape tape;
  const auto out = enc.encode(tape, history_window(timeline, 6, 3));
  for (std::size_t e = 0; e < 6; ++e) {
    double n = 0;
    for (Real v : out.entities.value().row(e)) n += v * v;
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(HistoryWindow, ReadsOnlyEarlierSnapshots) {
  const auto timeline = small_timeline(10);
  for (Timestamp t = 0; t <= 10; ++t) {
    const auto h = history_window(timeline, t, 3);
    EXPECT_LE(h.size(), 3u);
    for (std::size_t i = 0; i < h.size(); ++i) {
      EXPECT_LT(h[i]->t, t);
      if (i > 0) {
        EXPECT_LT(h[i - 1]->t, h[i]->t);
      }
    }
  }
}

TEST(HistoryWindow, SkipsEmptySnapshots) {
  const std::vector<Quadruple> facts = {{0, 0, 1, 0}, {1, 0, 2, 3}};
  const auto timeline = build_timeline(TemporalKG::from_facts(Split::merged, facts, 5), 5);
  const auto h = history_window(timeline, 5, 3);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0]->t, 0u);
  EXPECT_EQ(h[1]->t, 3u);
}

TEST(StructuralEncoder, CausalInFutureSnapshots) {
  Rng rng(5);
  StructuralEncoder enc(small_config(), rng);
  auto timeline = small_timeline(10);
  const Timestamp t = 6;
  Tape before;
  const Tensor reference = enc.encode(before, history_window(timeline, t, 3)).entities.value();
  // Rewrite every snapshot at or after t.
  const auto other = testing::random_facts(30, 6, 4, 4, 99);
  for (Timestamp k = t; k < 10; ++k) {
    std::vector<Quadruple> replaced;
    for (Quadruple q : other) replaced.push_back({q.s, q.r, q.o, k});
    timeline[k] = SnapshotGraph::from_facts(k, replaced);
  }
  Tape after;
  EXPECT_EQ(enc.encode(after, history_window(timeline, t, 3)).entities.value(), reference);
}

TEST(StructuralEncoder, EvalEncodingIsBitIdentical) {
  Rng rng(6);
  StructuralEncoder enc(small_config(), rng);
  enc.set_frozen(true);
  const auto timeline = small_timeline(7);
  const auto history = history_window(timeline, 7, 3);
  Tape a, b;
  const auto first = enc.encode(a, history);
  const auto second = enc.encode(b, history);
  EXPECT_EQ(first.entities.value(), second.entities.value());
  EXPECT_EQ(first.relations.value(), second.relations.value());
}

TEST(StructuralEncoder, GradientsMatchFiniteDifferences) {
  StructuralConfig c = small_config();
  c.dim = 3;
  c.num_entities = 4;
  c.num_relations = 2;
  Rng rng(7);
  StructuralEncoder enc(c, rng);
  const std::vector<Quadruple> facts = {{0, 0, 1, 0}, {2, 1, 3, 0}, {1, 0, 3, 1}, {3, 1, 0, 1}};
  const auto timeline = build_timeline(TemporalKG::from_facts(Split::merged, facts, 2), 2);
  const auto history = history_window(timeline, 2, 3);
  const Tensor weights = testing::random_tensor({4, 3}, 8);
  // Perturb the initial entity table through grad_check.
  auto f = [&](Tape& tape, std::span<const Var>) {
    return sum(mul(enc.encode(tape, history).entities, tape.constant(weights)));
  };
  const Tensor original = enc.entity_init.value;
  double max_error = 0;
  Tape tape;
  enc.entity_init.zero_grad();
  tape.backward(f(tape, {}));
  const Tensor analytic = enc.entity_init.grad;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double eps = 1e-5;
    enc.entity_init.value[i] = original[i] + eps;
    Tape up;
    const double fu = f(up, {}).value()[0];
    enc.entity_init.value[i] = original[i] - eps;
    Tape down;
    const double fd = f(down, {}).value()[0];
    enc.entity_init.value[i] = original[i];
    const double numeric = (fu - fd) / (2 * eps);
    max_error = std::max(max_error, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  EXPECT_LT(max_error, 1e-4);
}

TEST(StructuralEncoder, MissingSnapshotIsContractError) {
  Rng rng(8);
  StructuralEncoder enc(small_config(), rng);
  const SnapshotGraph* history[] = {nullptr};
  Tape tape;
  EXPECT_THROW(enc.encode(tape, history), ContractError);
}

TEST(SnapshotGraph, IncidencesAreUnique) {
  const std::vector<Quadruple> facts = {{0, 1, 2, 0}, {0, 1, 2, 0}, {2, 1, 0, 0}};
  const auto g = SnapshotGraph::from_facts(0, facts);
  EXPECT_EQ(g.src.size(), 3u);
  EXPECT_EQ(g.incidence_relation.size(), 2u);  // (1,0) and (1,2)
}

}  // namespace
}  // namespace mesh
