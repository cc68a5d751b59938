#include "vhd/scl.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "vhd/gradcheck.hpp"

using namespace vhd;

namespace {
using D = Tensor<double>;
using F = Tensor<float>;
}  // namespace

TEST(Temperature, StoredAsLogStaysPositive) {
  auto t = TemperatureParam<float>::init(3.1f);
  EXPECT_NEAR(t.current(), 3.1f, 1e-5);
  // Even a large downward step on the log parameter keeps the value positive.
  t.log_value.data()[0] -= 10.0f;
  EXPECT_GT(t.current(), 0.0f);
  EXPECT_THROW(TemperatureParam<float>::init(0.0f), std::invalid_argument);
}

TEST(PairwiseSimilarity, SpecExamples) {
  auto ortho = F::from({2, 2}, {1, 0, 0, 1});
  auto s = pairwise_similarity(ortho, ortho);
  EXPECT_FLOAT_EQ(s.at(0, 0), 1.0f);
  EXPECT_FLOAT_EQ(s.at(0, 1), 0.0f);
  EXPECT_FLOAT_EQ(s.at(1, 0), 0.0f);
  EXPECT_FLOAT_EQ(s.at(1, 1), 1.0f);

  auto z = pairwise_similarity(F::zeros({3, 4}), F::uniform({3, 4}, -1.0f, 1.0f, 1));
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);

  auto a = F::from({2, 2}, {1, 2, 3, 4});
  auto v = F::from({2, 2}, {5, 6, 7, 8});
  auto m = pairwise_similarity(a, v);
  EXPECT_FLOAT_EQ(m.at(0, 0), 17.0f);  // [1,2].[5,6]
  EXPECT_FLOAT_EQ(m.at(0, 1), 23.0f);  // [1,2].[7,8]
  EXPECT_FLOAT_EQ(m.at(1, 0), 39.0f);
  EXPECT_FLOAT_EQ(m.at(1, 1), 53.0f);

  EXPECT_THROW(pairwise_similarity(F::zeros({2, 3}), F::zeros({3, 3})), std::invalid_argument);
}

TEST(SclLoss, SingletonBatchIsZero) {
  auto t = TemperatureParam<float>::init(3.1f);
  auto loss = scl_loss(F::from({1, 1}, {0.37f}), t, SclVariant::clip_infonce);
  EXPECT_NEAR(loss.item(), 0.0f, 1e-7);
}

TEST(SclLoss, IdentityFixture) {
  // S = I, temperature 1: loss = -log(e / (e + 1)) ~ 0.3133.
  auto t = TemperatureParam<float>::init(1.0f);
  auto loss = scl_loss(F::from({2, 2}, {1, 0, 0, 1}), t, SclVariant::clip_infonce);
  EXPECT_NEAR(loss.item(), 0.31326169f, 1e-5);
}

TEST(SclLoss, PerfectAlignmentLimit) {
  auto t = TemperatureParam<float>::init(1.0f);
  float last = 10.0f;
  for (float c : {2.0f, 5.0f, 12.0f, 30.0f}) {
    auto s = F::from({2, 2}, {c, 0, 0, c});
    const float loss = scl_loss(s, t, SclVariant::clip_infonce).item();
    EXPECT_LT(loss, last);
    last = loss;
  }
  EXPECT_NEAR(last, 0.0f, 1e-4);
}

TEST(SclLoss, InvariantUnderPairedPermutation) {
  auto t = TemperatureParam<double>::init(2.0);
  auto ra = D::uniform({5, 3}, -1.0, 1.0, 7);
  auto rv = D::uniform({5, 3}, -1.0, 1.0, 8);
  const std::vector<std::int64_t> perm{4, 2, 0, 3, 1};
  for (auto variant : {SclVariant::clip_infonce, SclVariant::literal_stabilized}) {
    const double base =
        scl_loss(pairwise_similarity(ra, rv), t, variant).item();
    const double permuted =
        scl_loss(pairwise_similarity(gather_rows(ra, perm), gather_rows(rv, perm)), t, variant)
            .item();
    EXPECT_NEAR(base, permuted, 1e-9);
  }
}

TEST(SclLoss, GradientPullsDiagonalUpPushesOffDiagonalDown) {
  auto t = TemperatureParam<double>::init(1.7);
  for (auto variant : {SclVariant::clip_infonce, SclVariant::literal_stabilized}) {
    auto s = D::uniform({4, 4}, -0.8, 0.8, 11, true);
    Graph<double> g;
    auto loss = scl_loss(s, t, variant);
    g.backward(loss);
    for (std::int64_t i = 0; i < 4; ++i)
      for (std::int64_t j = 0; j < 4; ++j) {
        const double grad = s.grad()[static_cast<std::size_t>(i * 4 + j)];
        if (i == j)
          EXPECT_LT(grad, 0.0) << "diagonal " << i;
        else
          EXPECT_GT(grad, 0.0) << "off-diagonal " << i << "," << j;
      }
  }
}

TEST(SclLoss, GradCheckIncludingTemperature) {
  auto ra = D::uniform({4, 3}, -1.0, 1.0, 21);
  auto rv = D::uniform({4, 3}, -1.0, 1.0, 22);
  auto t = TemperatureParam<double>::init(3.1);
  for (auto variant : {SclVariant::clip_infonce, SclVariant::literal_stabilized}) {
    const double err = grad_check<double>(
        [&] {
          auto na = l2_normalize_rows(ra, 1e-12);
          auto nv = l2_normalize_rows(rv, 1e-12);
          return scl_loss(pairwise_similarity(na, nv), t, variant);
        },
        {ra, rv, t.log_value}, 1e-6);
    EXPECT_LT(err, 1e-6);
  }
}

TEST(SclLoss, LiteralVariantRejectsNonSquare) {
  auto t = TemperatureParam<float>::init(1.0f);
  EXPECT_THROW(scl_loss(F::zeros({2, 3}), t, SclVariant::literal_stabilized),
               std::invalid_argument);
}

TEST(L2NormalizeRows, UnitNormsAndZeroRowSafety) {
  auto x = F::from({2, 3}, {3, 0, 4, 0, 0, 0});
  auto n = l2_normalize_rows(x, 1e-12f);
  EXPECT_NEAR(n.at(0, 0), 0.6f, 1e-6);
  EXPECT_NEAR(n.at(0, 2), 0.8f, 1e-6);
  for (std::int64_t j = 0; j < 3; ++j) EXPECT_EQ(n.at(1, j), 0.0f);
}
