#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mesh/experts.hpp"
#include "mesh/optim.hpp"
#include "support/fixtures.hpp"

namespace mesh {
namespace {

using testing::random_tensor;

double sig(double x) { return 1 / (1 + std::exp(-x)); }

TEST(ExpertLayout, RequiresBothKinds) {
  EXPECT_THROW((ExpertLayout{0, 1}.validate()), ConfigError);
  EXPECT_THROW((ExpertLayout{1, 0}.validate()), ConfigError);
  EXPECT_EQ((ExpertLayout{2, 3}.total()), 5u);
}

TEST(ExpertMix, ZeroGateIsExactHalf) {
  Tape tape;
  const Tensor qg = random_tensor({3, 4}, 1), qs = random_tensor({3, 4}, 2);
  Var alpha = gate_values(tape.constant(qg), tape.constant(Tensor({4, 1})), tape.constant(Tensor({1})));
  for (Real a : alpha.value().values()) EXPECT_EQ(a, 0.5);
  const Tensor q = expert_mix(alpha, tape.constant(qg), tape.constant(qs)).value();
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], (qg[i] + qs[i]) / 2, 1e-15);
}

TEST(ExpertMix, SaturatedGateSelectsStructuralQuery) {
  Tape tape;
  const Tensor qg = random_tensor({2, 5}, 3), qs = random_tensor({2, 5}, 4);
  Var alpha = gate_values(tape.constant(qg), tape.constant(Tensor({5, 1})), tape.constant(Tensor({1}, Real{50})));
  const Tensor q = expert_mix(alpha, tape.constant(qg), tape.constant(qs)).value();
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], qg[i], 1e-15);
}

TEST(ExpertMix, GradientsMatchFiniteDifferences) {
  auto f = [](Tape&, std::span<const Var> v) {
    Var alpha = gate_values(v[0], v[2], v[3]);
    return sum(expert_mix(alpha, v[0], v[1]));
  };
  const std::vector<Tensor> inputs = {random_tensor({3, 5}, 5), random_tensor({3, 5}, 6), random_tensor({5, 1}, 7),
                                      random_tensor({1}, 8)};
  EXPECT_LT(grad_check(f, inputs).max_error, 1e-4);
}

TEST(ExpertMix, GateOutputsStayInsideUnitInterval) {
  Tape tape;
  const Var alpha = gate_values(tape.constant(random_tensor({50, 4}, 9, 3.0)), tape.constant(random_tensor({4, 3}, 10)),
                                tape.constant(random_tensor({3}, 11)));
  for (Real a : alpha.value().values()) {
    EXPECT_GT(a, 0);
    EXPECT_LT(a, 1);
  }
}

TEST(PredictionWeights, ZeroParametersGiveHalves) {
  const ExpertMixture mixture(ExpertLayout{1, 1}, 6);
  Tape tape;
  const Tensor w = gate_values(tape.constant(random_tensor({4, 6}, 12)), tape.constant(mixture.predict_weight.value),
                               tape.constant(mixture.predict_bias.value))
                       .value();
  EXPECT_EQ(w.shape(), (Shape{4, 2}));
  for (Real v : w.values()) EXPECT_EQ(v, 0.5);
}

TEST(PredictionWeights, HandSetWeightsAreIndependentSigmoids) {
  const Tensor q = Tensor::matrix(1, 4, {1, -1, 0.5, 2});
  const Tensor W = Tensor::matrix(4, 2, {0.2, -0.1, 0.4, 0.3, -0.6, 0.0, 0.1, 0.5});
  const Tensor b({2}, std::vector<Real>{0.05, -0.25});
  Tape tape;
  const Tensor w = gate_values(tape.constant(q), tape.constant(W), tape.constant(b)).value();
  const double z0 = 1 * 0.2 + -1 * 0.4 + 0.5 * -0.6 + 2 * 0.1 + 0.05;
  const double z1 = 1 * -0.1 + -1 * 0.3 + 0.5 * 0.0 + 2 * 0.5 - 0.25;
  EXPECT_NEAR(w[0], sig(z0), 1e-15);
  EXPECT_NEAR(w[1], sig(z1), 1e-15);
  EXPECT_NE(w[0] + w[1], 1.0);
}

TEST(Fuse, EqualWeightsAverage) {
  Tape tape;
  const Tensor q1 = random_tensor({2, 3}, 13), q2 = random_tensor({2, 3}, 14);
  const std::vector<Var> experts = {tape.constant(q1), tape.constant(q2)};
  const FusedQuery f = fuse(tape.constant(Tensor({2, 2}, Real{0.5})), experts, ExpertLayout{1, 1});
  for (std::size_t i = 0; i < q1.size(); ++i) EXPECT_NEAR(f.combined.value()[i], 0.5 * (q1[i] + q2[i]), 1e-15);
}

TEST(Fuse, PartialsSumExactly) {
  for (std::size_t m = 1; m <= 3; ++m)
    for (std::size_t n = 1; n <= 3; ++n) {
      Tape tape;
      std::vector<Var> experts;
      for (std::size_t i = 0; i < m + n; ++i) experts.push_back(tape.constant(random_tensor({4, 5}, 100 + i)));
      const Var w = tape.constant(random_tensor({4, m + n}, 200 + m * 10 + n));
      const FusedQuery f = fuse(w, experts, ExpertLayout{m, n});
      const Tensor& h = f.historical.value();
      const Tensor& nh = f.non_historical.value();
      for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(f.combined.value()[i], h[i] + nh[i]);
    }
}

TEST(Fuse, MatchesExplicitSummation) {
  Tape tape;
  std::vector<Tensor> q = {random_tensor({3, 4}, 21), random_tensor({3, 4}, 22), random_tensor({3, 4}, 23)};
  const Tensor w = random_tensor({3, 3}, 24);
  std::vector<Var> experts;
  for (const Tensor& t : q) experts.push_back(tape.constant(t));
  const FusedQuery f = fuse(tape.constant(w), experts, ExpertLayout{2, 1});
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t j = 0; j < 4; ++j) {
      const double his = w.at(b, 0) * q[0].at(b, j) + w.at(b, 1) * q[1].at(b, j);
      const double nhis = w.at(b, 2) * q[2].at(b, j);
      EXPECT_NEAR(f.historical.value().at(b, j), his, 1e-15);
      EXPECT_NEAR(f.non_historical.value().at(b, j), nhis, 1e-15);
      EXPECT_NEAR(f.combined.value().at(b, j), his + nhis, 1e-15);
    }
}

TEST(Fuse, SizeMismatchIsContractError) {
  Tape tape;
  const std::vector<Var> experts = {tape.constant(Tensor({1, 2})), tape.constant(Tensor({1, 2}))};
  EXPECT_THROW(fuse(tape.constant(Tensor({1, 3})), experts, ExpertLayout{1, 1}), ContractError);
  EXPECT_THROW(fuse(tape.constant(Tensor({1, 2})), experts, ExpertLayout{2, 1}), ContractError);
}

TEST(Score, ZeroQueryGivesHalves) {
  Tape tape;
  const Tensor p = score(tape.constant(Tensor({2, 3})), tape.constant(random_tensor({5, 3}, 30))).value();
  for (Real v : p.values()) EXPECT_EQ(v, 0.5);
}

TEST(Score, HandSetDotProducts) {
  Tape tape;
  const Tensor q = Tensor::matrix(1, 2, {0.5, -1});
  const Tensor H = Tensor::matrix(3, 2, {1, 0, 0, 1, 2, 2});
  const Tensor p = score(tape.constant(q), tape.constant(H)).value();
  EXPECT_NEAR(p[0], sig(0.5), 1e-15);
  EXPECT_NEAR(p[1], sig(-1), 1e-15);
  EXPECT_NEAR(p[2], sig(-1), 1e-15);
}

TEST(Score, ArgmaxInvariantToOrthogonalShift) {
  // Rows of H live in the first three coordinates; shift q along the fourth.
  Tensor H = random_tensor({6, 4}, 31);
  for (std::size_t e = 0; e < 6; ++e) H.at(e, 3) = 0;
  const Tensor q = random_tensor({1, 4}, 32);
  Tensor shifted = q;
  shifted[3] += 7.5;
  Tape tape;
  const Tensor a = score(tape.constant(q), tape.constant(H)).value();
  const Tensor b = score(tape.constant(shifted), tape.constant(H)).value();
  const auto argmax = [](const Tensor& t) { return std::max_element(t.values().begin(), t.values().end()) - t.values().begin(); };
  EXPECT_EQ(argmax(a), argmax(b));
}

TEST(Score, RankingMatchesLogits) {
  Tape tape;
  const Var q = tape.constant(random_tensor({1, 5}, 33));
  const Var H = tape.constant(random_tensor({9, 5}, 34));
  const Tensor logits = score_logits(q, H).value();
  const Tensor p = score(q, H).value();
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(logits[i] < logits[j], p[i] < p[j]);
}

TEST(Score, ShapeMismatchIsContractError) {
  Tape tape;
  EXPECT_THROW(score(tape.constant(Tensor({1, 3})), tape.constant(Tensor({4, 2}))), ContractError);
}

TEST(Pipeline, ScoreFuseMixGradientsMatchFiniteDifferences) {
  const std::size_t d = 5, E = 7;
  const Tensor target_weights = random_tensor({2, E}, 40);
  auto f = [&](Tape& tape, std::span<const Var> v) {
    // v: q_g, q_s, gate W, gate b, predict W, predict b, H
    Var gates = gate_values(v[0], v[2], v[3]);
    Var weights = gate_values(v[0], v[4], v[5]);
    const std::vector<Var> experts = {expert_mix(slice_cols(gates, 0, 1), v[0], v[1]),
                                      expert_mix(slice_cols(gates, 1, 2), v[0], v[1])};
    const FusedQuery fq = fuse(weights, experts, ExpertLayout{1, 1});
    return sum(mul(score(fq.combined, v[6]), tape.constant(target_weights)));
  };
  const std::vector<Tensor> inputs = {random_tensor({2, d}, 41),      random_tensor({2, d}, 42),
                                      random_tensor({d, 2}, 43, 0.5), random_tensor({2}, 44, 0.5),
                                      random_tensor({d, 2}, 45, 0.5), random_tensor({2}, 46, 0.5),
                                      random_tensor({E, d}, 47)};
  EXPECT_LT(grad_check(f, inputs).max_error, 1e-4);
}

TEST(ExpertMixture, ParametersStartAtZero) {
  ExpertMixture m(ExpertLayout{2, 1}, 8);
  EXPECT_EQ(m.gate_weight.value.shape(), (Shape{8, 3}));
  EXPECT_EQ(m.predict_bias.value.shape(), (Shape{3}));
  for (Parameter* p : m.parameters())
    for (Real v : p->value.values()) EXPECT_EQ(v, 0);
}

}  // namespace
}  // namespace mesh
