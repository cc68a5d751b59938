#include "vhd/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace vhd;

namespace {

// Independent AP oracle: walk the precision-recall staircase, accumulating
// precision at each recall step. Ties are resolved by the same lower-index
// rule so both routes rank identically.
double ap_oracle(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::size_t total_pos = 0;
  for (auto l : labels) total_pos += l != 0;
  double ap = 0;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!labels[order[r]]) continue;
    ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(r + 1);
    const double recall_step = 1.0 / static_cast<double>(total_pos);
    ap += precision * recall_step;
  }
  return ap;
}

}  // namespace

TEST(AveragePrecision, SpecExamples) {
  // Perfect ranking
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<float>{0.9f, 0.8f, 0.2f},
                                      std::vector<std::uint8_t>{1, 1, 0}),
                   1.0);

  // Hand example: (1/1 + 2/3) / 2
  const auto ap = average_precision(std::vector<float>{0.9f, 0.8f, 0.2f},
                                    std::vector<std::uint8_t>{1, 0, 1});
  EXPECT_NEAR(*ap, (1.0 + 2.0 / 3.0) / 2.0, 1e-9);

  // Single positive ranked last out of n: AP = 1/n.
  for (std::size_t n : {3u, 5u, 8u}) {
    std::vector<float> scores;
    std::vector<std::uint8_t> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) scores.push_back(static_cast<float>(n - i));
    labels[n - 1] = 1;
    EXPECT_NEAR(*average_precision(scores, labels), 1.0 / static_cast<double>(n), 1e-12);
  }

  // No positives: undefined, reported as skip.
  EXPECT_FALSE(average_precision(std::vector<float>{0.1f, 0.2f},
                                 std::vector<std::uint8_t>{0, 0})
                   .has_value());
}

TEST(AveragePrecision, MatchesBruteForceOracleOnAllLabelings) {
  // All labelings of length <= 8, scores drawn with deliberate ties.
  std::mt19937_64 rng(7);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (int draw = 0; draw < 3; ++draw) {
      std::vector<float> scores(n);
      for (auto& s : scores) s = static_cast<float>(rng() % 5) / 4.0f;
      for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = (bits >> i) & 1;
        const auto got = average_precision(scores, labels);
        ASSERT_TRUE(got.has_value());
        EXPECT_NEAR(*got, ap_oracle(scores, labels), 1e-12)
            << "n=" << n << " bits=" << bits << " draw=" << draw;
      }
    }
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> scores(12);
    std::vector<std::uint8_t> labels(12);
    for (auto& s : scores) s = static_cast<float>(rng() % 100) / 25.0f - 2.0f;
    bool any = false;
    for (auto& l : labels) {
      l = rng() & 1;
      any |= l != 0;
    }
    if (!any) labels[0] = 1;
    std::vector<float> transformed(12);
    for (std::size_t i = 0; i < 12; ++i) transformed[i] = std::exp(0.5f * scores[i]) + 1.0f;
    EXPECT_NEAR(*average_precision(scores, labels), *average_precision(transformed, labels),
                1e-12);
  }
}

TEST(ThresholdSegments, SpecExamples) {
  std::vector<float> scores{0.0f, 1.0f, 1.0f, 0.0f, 1.0f};
  auto segs = threshold_segments(scores, 0.5f, 1);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].start, 1);
  EXPECT_EQ(segs[0].end, 2);
  EXPECT_EQ(segs[1].start, 4);
  EXPECT_EQ(segs[1].end, 4);

  auto whole = threshold_segments(scores, 0.0f, 1);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].start, 0);
  EXPECT_EQ(whole[0].end, 4);

  EXPECT_TRUE(threshold_segments(scores, 1.0f + 1e-6f, 1).empty());

  auto min_len = threshold_segments(scores, 0.5f, 2);
  ASSERT_EQ(min_len.size(), 1u);
  EXPECT_EQ(min_len[0].start, 1);
}

TEST(MapAndTopk, PerfectRankingGivesOnes) {
  std::vector<ScoredVideo> videos;
  for (int v = 0; v < 3; ++v) {
    ScoredVideo sv;
    sv.id = "v" + std::to_string(v);
    for (int t = 0; t < 100; ++t) {
      const bool hl = t >= 40 && t < 60;
      sv.labels.push_back(hl ? 1.0f : 0.0f);
      sv.scores.push_back(hl ? 0.9f : 0.1f);
    }
    videos.push_back(std::move(sv));
  }
  EvalOptions opts;
  opts.segment_len = 10;
  opts.binarize = BinarizeRule::threshold;
  opts.binarize_value = 0.5;
  auto report = map_and_topk(videos, opts);
  EXPECT_DOUBLE_EQ(report.map, 1.0);
  EXPECT_DOUBLE_EQ(report.topk_map, 1.0);
  EXPECT_EQ(report.evaluated, 3);
  EXPECT_EQ(report.skipped, 0);
}

TEST(MapAndTopk, SingleVideoReducesToAveragePrecision) {
  ScoredVideo sv;
  sv.id = "only";
  sv.scores = {0.9f, 0.8f, 0.2f};
  sv.labels = {1.0f, 0.0f, 1.0f};
  auto report = map_and_topk({sv}, EvalOptions{});
  EXPECT_NEAR(report.map, (1.0 + 2.0 / 3.0) / 2.0, 1e-9);
}

TEST(MapAndTopk, UnlabeledVideoSkippedWithWarning) {
  ScoredVideo labeled;
  labeled.id = "a";
  labeled.scores = {0.9f, 0.1f};
  labeled.labels = {1.0f, 0.0f};
  ScoredVideo unlabeled;
  unlabeled.id = "b";
  unlabeled.scores = {0.5f, 0.5f};
  unlabeled.labels = {0.0f, 0.0f};
  auto report = map_and_topk({labeled, unlabeled}, EvalOptions{});
  EXPECT_EQ(report.evaluated, 1);
  EXPECT_EQ(report.skipped, 1);
  EXPECT_FALSE(report.videos[1].ap.has_value());
  EXPECT_DOUBLE_EQ(report.map, 1.0);
}

TEST(Distinctiveness, UniformVideoCountsWholeWindow) {
  FeatureVectorSequence fvs;
  fvs.n = 40;
  fvs.d = 3;
  fvs.data.assign(static_cast<std::size_t>(fvs.n * fvs.d), 1.0f);
  std::vector<float> labels(40, 0.0f);
  labels[5] = 1.0f;
  // window of 4 seconds at 5 steps/s -> 20 steps -> half-width 10
  auto report = distinctiveness_analysis(fvs, labels, 4.0, 0.5, 5.0);
  EXPECT_EQ(report.window_steps, 20);
  // interior timesteps see the full +/-10 neighborhood
  EXPECT_GT(report.background_mean_neighbors, 15.0);
  EXPECT_DOUBLE_EQ(report.highlight_mean_neighbors, 15.0);  // t=5 has 5 left + 10 right
}

TEST(Distinctiveness, ZeroThresholdOnDistinctRowsCountsNothing) {
  FeatureVectorSequence fvs;
  fvs.n = 20;
  fvs.d = 2;
  for (std::int64_t t = 0; t < 20; ++t) {
    fvs.data.push_back(static_cast<float>(t));
    fvs.data.push_back(static_cast<float>(-t));
  }
  std::vector<float> labels(20, 0.0f);
  labels[3] = 1.0f;
  auto report = distinctiveness_analysis(fvs, labels, 2.0, 1e-9, 5.0);
  EXPECT_DOUBLE_EQ(report.highlight_mean_neighbors, 0.0);
  EXPECT_DOUBLE_EQ(report.background_mean_neighbors, 0.0);
}

TEST(Distinctiveness, DegenerateWindowRejected) {
  FeatureVectorSequence fvs;
  fvs.n = 10;
  fvs.d = 1;
  fvs.data.assign(10, 0.0f);
  std::vector<float> labels(10, 0.0f);
  EXPECT_THROW(distinctiveness_analysis(fvs, labels, 0.1, 0.5, 5.0), std::invalid_argument);
  EXPECT_THROW(distinctiveness_analysis(fvs, std::vector<float>(3, 0.0f), 30.0, 0.5, 5.0),
               std::invalid_argument);
}
