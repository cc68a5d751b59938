#include "vhd/rasl.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vhd/gradcheck.hpp"

using namespace vhd;

namespace {

using D = Tensor<double>;
using F = Tensor<float>;

template <typename T>
RaslParams<T> params(std::int64_t c, std::int64_t c_out, std::int64_t proj, std::int64_t k,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return RaslParams<T>::init(c, c_out, proj, k, rng);
}

// Full-sort reference for the selectors.
template <typename T>
std::vector<std::int64_t> sort_oracle(const std::vector<T>& s, std::int64_t k, bool top) {
  std::vector<std::int64_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)])
      return top ? s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)]
                 : s[static_cast<std::size_t>(a)] < s[static_cast<std::size_t>(b)];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)])
      return s[static_cast<std::size_t>(a)] < s[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

}  // namespace

TEST(ComputeActivations, ZeroWeightsGiveZeroActivations) {
  auto p = params<float>(3, 3, 3, 2, 1);
  p.channel_weights = F::zeros({3}, true);
  auto rep = F::uniform({6, 3}, -1.0f, 1.0f, 2);
  auto acts = compute_activations(rep, p);
  ASSERT_EQ(acts.activations.shape(), (Shape{6}));
  for (float v : acts.activations.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ComputeActivations, IdentityPointwiseOneHotSelectsChannel) {
  auto p = params<float>(3, 3, 3, 2, 3);
  // pointwise = identity (kernel 1), one-hot weights at channel 1
  p.pointwise.kernels = F::from({3, 3, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
  p.pointwise.bias = F::zeros({3}, true);
  p.channel_weights = F::from({3}, {0, 1, 0}, true);
  auto rep = F::uniform({5, 3}, -1.0f, 1.0f, 4);
  auto acts = compute_activations(rep, p);
  for (std::int64_t i = 0; i < 5; ++i) EXPECT_NEAR(acts.activations.at(i), rep.at(i, 1), 1e-6);
}

TEST(ComputeActivations, MatchesDotProductOracle) {
  auto p = params<double>(3, 4, 4, 2, 5);
  auto rep = D::uniform({4, 3}, -1.0, 1.0, 6);
  auto acts = compute_activations(rep, p);
  // Oracle: z_i = K r_i + b (kernel-1 conv), s_i = <w, z_i>.
  for (std::int64_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::int64_t co = 0; co < 4; ++co) {
      double z = p.pointwise.bias.at(co);
      for (std::int64_t ci = 0; ci < 3; ++ci)
        z += p.pointwise.kernels.at(co * 3 + ci) * rep.at(i, ci);
      EXPECT_NEAR(acts.processed.at(i, co), z, 1e-9);
      s += p.channel_weights.at(co) * z;
    }
    EXPECT_NEAR(acts.activations.at(i), s, 1e-6);
  }
}

TEST(Select, SpecExamples) {
  std::vector<float> s{0.9f, 0.1f, 0.5f, 0.7f};
  EXPECT_EQ(select_topk<float>(s, 2), (std::vector<std::int64_t>{3, 0}));
  EXPECT_EQ(select_bottomk<float>(s, 2), (std::vector<std::int64_t>{1, 2}));

  // k = length: both are the full ascending argsort
  const std::vector<std::int64_t> full{1, 2, 3, 0};
  EXPECT_EQ(select_topk<float>(s, 4), full);
  EXPECT_EQ(select_bottomk<float>(s, 4), full);

  std::vector<float> equal{0.3f, 0.3f, 0.3f, 0.3f};
  EXPECT_EQ(select_topk<float>(equal, 2), (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(select_bottomk<float>(equal, 2), (std::vector<std::int64_t>{0, 1}));

  EXPECT_THROW(select_topk<float>(s, 5), std::invalid_argument);
  EXPECT_THROW(select_bottomk<float>(s, 0), std::invalid_argument);
}

TEST(Select, AgreesWithSortOracleIncludingDuplicates) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 40);
    std::vector<double> s(static_cast<std::size_t>(n));
    for (auto& v : s)
      v = static_cast<double>(rng() % 8) / 4.0;  // coarse grid forces duplicates
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
    EXPECT_EQ(select_topk<double>(s, k), sort_oracle(s, k, true)) << "trial " << trial;
    EXPECT_EQ(select_bottomk<double>(s, k), sort_oracle(s, k, false)) << "trial " << trial;
  }
}

TEST(Select, OrderingInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(17);
    for (auto& v : s) v = static_cast<double>(rng() % 1000) / 250.0 - 2.0;
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(0.7 * s[i]) + 3.0;
    EXPECT_EQ(select_topk<double>(s, 5), select_topk<double>(t, 5));
    EXPECT_EQ(select_bottomk<double>(s, 5), select_bottomk<double>(t, 5));
  }
}

TEST(KPointLoss, Ln2Fixtures) {
  auto p = params<float>(3, 3, 3, 2, 7);
  // All selected activations zero -> eta = 0 -> loss = ln 2.
  auto s = F::zeros({6}, true);
  auto z = F::uniform({6, 3}, -1.0f, 1.0f, 8, true);
  auto loss = kpoint_contrastive_loss(s, z, {0, 1}, {2, 3}, p);
  EXPECT_NEAR(loss.item(), std::log(2.0f), 1e-6);

  // Collapsed representations: sim = 1 for every pair -> eta = 0 -> ln 2.
  auto p2 = params<float>(3, 3, 3, 2, 9);
  p2.proj_top = p2.proj_bottom;  // same projection
  auto s2 = F::uniform({6}, 0.5f, 1.5f, 10, true);
  auto z_same = F::uniform({1, 3}, -1.0f, 1.0f, 11);
  std::vector<float> rows;
  for (int i = 0; i < 6; ++i)
    rows.insert(rows.end(), z_same.data().begin(), z_same.data().end());
  auto z2 = F::from({6, 3}, std::move(rows), true);
  auto loss2 = kpoint_contrastive_loss(s2, z2, {0, 1}, {2, 3}, p2);
  EXPECT_NEAR(loss2.item(), std::log(2.0f), 1e-5);
}

TEST(KPointLoss, ClosedFormSinglePair) {
  // k=1, s_hat=2, sim=0 -> eta = 2 -> loss = ln(1 + e^-2) ~ 0.1269.
  auto p = params<float>(3, 3, 3, 1, 13);
  p.pointwise.kernels = F::from({3, 3, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
  p.pointwise.bias = F::zeros({3}, true);
  p.proj_top = F::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
  p.proj_bottom = p.proj_top;
  auto s = F::from({2}, {2.0f, -1.0f}, true);
  // Both rows already have zero mean, so layer norm only rescales them;
  // [1,0,-1] and [1,-2,1] stay orthogonal and sim = 0.
  auto z = F::from({2, 3}, {1.0f, 0.0f, -1.0f, 1.0f, -2.0f, 1.0f}, true);
  auto loss = kpoint_contrastive_loss(s, z, {0}, {1}, p);
  EXPECT_NEAR(loss.item(), std::log(1.0f + std::exp(-2.0f)), 1e-5);
}

TEST(KPointLoss, EmptySelectionRejected) {
  auto p = params<float>(3, 3, 3, 2, 14);
  auto s = F::zeros({4}, true);
  auto z = F::zeros({4, 3}, true);
  EXPECT_THROW(kpoint_contrastive_loss(s, z, {}, {}, p), std::invalid_argument);
  EXPECT_THROW(kpoint_contrastive_loss(s, z, {0, 1}, {2}, p), std::invalid_argument);
}

TEST(KPointLoss, StrictlyDecreasingInEta) {
  // -log(sigmoid(eta)) decreases in eta; equals ln 2 at 0; stays positive.
  auto p = params<float>(2, 2, 2, 1, 15);
  double last = std::numeric_limits<double>::infinity();
  for (float scale : {-2.0f, -0.5f, 0.0f, 0.5f, 2.0f, 5.0f}) {
    auto s = F::from({2}, {scale, 0.0f}, true);
    auto z = F::from({2, 2}, {1.0f, -0.5f, -0.3f, 0.8f}, true);
    auto loss = kpoint_contrastive_loss(s, z, {0}, {1}, p);
    EXPECT_GT(loss.item(), 0.0f);
    EXPECT_LT(loss.item(), last);
    last = loss.item();
  }
}

TEST(KPointLoss, GradCheck) {
  auto p = params<double>(3, 4, 4, 2, 16);
  auto rep = D::uniform({9, 3}, -1.0, 1.0, 17, true);
  std::vector<D> leaves{rep, p.pointwise.kernels, p.pointwise.bias, p.channel_weights,
                        p.proj_top, p.proj_bottom, p.norm_gain, p.norm_bias};
  const double err = grad_check<double>(
      [&] {
        auto acts = compute_activations(rep, p);
        auto top = select_topk<double>(acts.activations.data(), 2);
        auto bottom = select_bottomk<double>(acts.activations.data(), 2);
        return kpoint_contrastive_loss(acts.activations, acts.processed, top, bottom, p);
      },
      leaves, 1e-6);
  EXPECT_LT(err, 1e-6);
}

TEST(KPointLoss, MinimizingItWidensTopBottomGap) {
  // 50 plain gradient steps on the module parameters alone must widen
  // mean(s[top]) - mean(s[bottom]) monotonically (checked at every step).
  auto p = params<double>(4, 4, 4, 3, 18);
  auto rep = D::uniform({12, 4}, -1.0, 1.0, 19);
  std::vector<D> leaves{p.pointwise.kernels, p.pointwise.bias, p.channel_weights,
                        p.proj_top, p.proj_bottom, p.norm_gain, p.norm_bias};
  auto gap = [&] {
    auto acts = compute_activations(rep, p);
    auto top = select_topk<double>(acts.activations.data(), 3);
    auto bottom = select_bottomk<double>(acts.activations.data(), 3);
    double t = 0, b = 0;
    for (auto i : top) t += acts.activations.at(i);
    for (auto i : bottom) b += acts.activations.at(i);
    return (t - b) / 3.0;
  };
  double last_gap = gap();
  for (int step = 0; step < 50; ++step) {
    for (auto& leaf : leaves) leaf.zero_grad();
    {
      Graph<double> g;
      auto acts = compute_activations(rep, p);
      auto top = select_topk<double>(acts.activations.data(), 3);
      auto bottom = select_bottomk<double>(acts.activations.data(), 3);
      auto loss = kpoint_contrastive_loss(acts.activations, acts.processed, top, bottom, p);
      g.backward(loss);
    }
    for (auto& leaf : leaves) {
      auto data = leaf.data();
      auto grad = leaf.grad();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] -= 0.05 * grad[i];
    }
    const double g2 = gap();
    EXPECT_GE(g2, last_gap - 1e-9) << "step " << step;
    last_gap = g2;
  }
  EXPECT_GT(last_gap, 0.0);
}

TEST(WeightRepresentations, SpecExamples) {
  auto rep = F::uniform({4, 3}, -1.0f, 1.0f, 20);
  auto ones = weight_representations(F::constant({4}, 1.0f), rep);
  for (std::size_t i = 0; i < rep.data().size(); ++i) EXPECT_EQ(ones.data()[i], rep.data()[i]);

  auto zeros = weight_representations(F::zeros({4}), rep);
  for (float v : zeros.data()) EXPECT_EQ(v, 0.0f);

  auto one_row = weight_representations(F::from({1}, {2.0f}), F::from({1, 2}, {1.0f, -1.0f}));
  EXPECT_FLOAT_EQ(one_row.at(0, 0), 2.0f);
  EXPECT_FLOAT_EQ(one_row.at(0, 1), -2.0f);

  EXPECT_THROW(weight_representations(F::zeros({3}), F::zeros({4, 2})), std::invalid_argument);
}
