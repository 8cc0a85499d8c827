#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mesh/losses.hpp"
#include "mesh/optim.hpp"
#include "support/fixtures.hpp"

namespace mesh {
namespace {

using testing::random_tensor;

double sig(double x) { return 1 / (1 + std::exp(-x)); }

double log_softmax_at(const Tensor& logits, std::size_t row, std::size_t col) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Real v : logits.row(row)) mx = std::max<double>(mx, v);
  double z = 0;
  for (Real v : logits.row(row)) z += std::exp(v - mx);
  return logits.at(row, col) - mx - std::log(z);
}

TEST(MajorLoss, LiteralSaturatedTarget) {
  const std::uint32_t target[] = {1};
  Tape tape;
  // sigmoid(+inf) = 1 and sigmoid(-inf) = 0 exactly.
  const Real inf = std::numeric_limits<Real>::infinity();
  EXPECT_EQ(major_loss(tape.constant(Tensor::matrix(1, 3, {0, inf, 0})), target, LossMode::literal).value()[0], -1);
  EXPECT_EQ(major_loss(tape.constant(Tensor::matrix(1, 3, {0, -inf, 0})), target, LossMode::literal).value()[0], 0);
}

TEST(MajorLoss, LiteralMatchesSummationOracle) {
  const Tensor logits = random_tensor({4, 6}, 1);
  const std::uint32_t targets[] = {0, 5, 2, 2};
  Tape tape;
  const double got = major_loss(tape.constant(logits), targets, LossMode::literal).value()[0];
  double expected = 0;
  for (std::size_t i = 0; i < 4; ++i) expected -= sig(logits.at(i, targets[i]));
  EXPECT_NEAR(got, expected, 1e-12);
}

TEST(MajorLoss, CrossEntropyMatchesSummationOracle) {
  const Tensor logits = random_tensor({4, 6}, 2, 3.0);
  const std::uint32_t targets[] = {1, 3, 3, 0};
  Tape tape;
  const double got = major_loss(tape.constant(logits), targets, LossMode::cross_entropy).value()[0];
  double expected = 0;
  for (std::size_t i = 0; i < 4; ++i) expected -= log_softmax_at(logits, i, targets[i]);
  EXPECT_NEAR(got, expected, 1e-12);
}

TEST(MajorLoss, GradientsMatchFiniteDifferences) {
  const std::uint32_t targets[] = {2, 0, 1};
  for (LossMode mode : {LossMode::literal, LossMode::cross_entropy}) {
    auto f = [&](Tape&, std::span<const Var> v) { return major_loss(v[0], targets, mode); };
    const std::vector<Tensor> inputs = {random_tensor({3, 5}, 3)};
    EXPECT_LT(grad_check(f, inputs).max_error, 1e-4);
  }
}

TEST(ExpertLosses, AllHistoricalLeavesOtherTermZero) {
  const std::uint32_t targets[] = {0, 1, 2};
  const int ones[] = {1, 1, 1};
  const int zeros[] = {0, 0, 0};
  Tape tape;
  const Var a = tape.constant(random_tensor({3, 4}, 4)), b = tape.constant(random_tensor({3, 4}, 5));
  for (LossMode mode : {LossMode::literal, LossMode::cross_entropy}) {
    const ExpertLosses his = expert_losses(a, b, targets, ones, mode);
    EXPECT_EQ(his.non_historical.value()[0], 0);
    EXPECT_NE(his.historical.value()[0], 0);
    const ExpertLosses nhis = expert_losses(a, b, targets, zeros, mode);
    EXPECT_EQ(nhis.historical.value()[0], 0);
    EXPECT_NE(nhis.non_historical.value()[0], 0);
  }
}

TEST(ExpertLosses, MixedBatchMatchesPerEventLoop) {
  const Tensor his = random_tensor({6, 5}, 6), nhis = random_tensor({6, 5}, 7);
  const std::uint32_t targets[] = {0, 4, 2, 1, 3, 3};
  const int indicators[] = {1, 0, 0, 1, 1, 0};
  for (LossMode mode : {LossMode::literal, LossMode::cross_entropy}) {
    Tape tape;
    const ExpertLosses got = expert_losses(tape.constant(his), tape.constant(nhis), targets, indicators, mode);
    double expect_his = 0, expect_nhis = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      auto term = [&](const Tensor& l) {
        return mode == LossMode::literal ? sig(l.at(i, targets[i])) : log_softmax_at(l, i, targets[i]);
      };
      if (indicators[i] == 1)
        expect_his -= term(his);
      else
        expect_nhis -= term(nhis);
    }
    EXPECT_NEAR(got.historical.value()[0], expect_his, 1e-12);
    EXPECT_NEAR(got.non_historical.value()[0], expect_nhis, 1e-12);
  }
}

TEST(ExpertLosses, EachEventFeedsExactlyOneTerm) {
  const std::uint32_t targets[] = {1, 2};
  const int indicators[] = {1, 0};
  Tape tape;
  Var his = tape.leaf(random_tensor({2, 3}, 8));
  Var nhis = tape.leaf(random_tensor({2, 3}, 9));
  const ExpertLosses l = expert_losses(his, nhis, targets, indicators, LossMode::cross_entropy);
  tape.backward(add(l.historical, l.non_historical));
  const Tensor gh = his.grad(), gn = nhis.grad();
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(gh.at(1, c), 0);  // event 1 is non-historical
    EXPECT_EQ(gn.at(0, c), 0);  // event 0 is historical
  }
}

TEST(ExpertLosses, IndicatorOutsideBinaryIsContractError) {
  const std::uint32_t targets[] = {0};
  const int bad[] = {2};
  Tape tape;
  const Var a = tape.constant(Tensor({1, 2}));
  EXPECT_THROW(expert_losses(a, a, targets, bad, LossMode::literal), ContractError);
}

TEST(TotalLoss, WeightedSum) {
  EXPECT_EQ(total_loss(Real{-1}, Real{-1}, Real{-1}, Real{1}), -3);
  EXPECT_NEAR(total_loss(Real{-0.5}, Real{-0.2}, Real{-0.3}, Real{0.6}), -0.8, 1e-15);
  EXPECT_EQ(total_loss(Real{-0.7}, Real{-5}, Real{-9}, Real{0}), Real{-0.7});
  Tape tape;
  const Var m = tape.constant(Tensor::scalar(-0.5));
  const ExpertLosses e{tape.constant(Tensor::scalar(-0.2)), tape.constant(Tensor::scalar(-0.3))};
  EXPECT_NEAR(total_loss(m, e, Real{0.6}).value()[0], -0.8, 1e-15);
  EXPECT_EQ(total_loss(m, e, Real{0}).value()[0], Real{-0.5});
}

TEST(LossMode, Names) {
  EXPECT_EQ(parse_loss_mode("literal"), LossMode::literal);
  EXPECT_EQ(parse_loss_mode(loss_mode_name(LossMode::cross_entropy)), LossMode::cross_entropy);
  EXPECT_THROW(parse_loss_mode("hinge"), ConfigError);
}

}  // namespace
}  // namespace mesh
