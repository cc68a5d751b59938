#include "vhd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vhd {

namespace {

// Descending by score, lower index first on ties.
std::vector<std::int64_t> ranking(std::span<const float> scores) {
  std::vector<std::int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

}  // namespace

std::optional<double> average_precision(std::span<const float> scores,
                                        std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("average_precision: scores and labels differ in length");
  std::int64_t positives = 0;
  for (auto l : labels) positives += l != 0;
  if (positives == 0) return std::nullopt;

  const auto order = ranking(scores);
  double sum = 0;
  std::int64_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[static_cast<std::size_t>(order[rank])]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

std::vector<Segment> threshold_segments(std::span<const float> scores, float tau,
                                        std::int64_t min_len) {
  std::vector<Segment> segments;
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  std::int64_t i = 0;
  while (i < n) {
    if (scores[static_cast<std::size_t>(i)] < tau) {
      ++i;
      continue;
    }
    std::int64_t j = i;
    float peak = scores[static_cast<std::size_t>(i)];
    while (j + 1 < n && scores[static_cast<std::size_t>(j + 1)] >= tau) {
      ++j;
      peak = std::max(peak, scores[static_cast<std::size_t>(j)]);
    }
    if (j - i + 1 >= min_len) segments.push_back({i, j, peak});
    i = j + 1;
  }
  return segments;
}

namespace {

struct SegmentScores {
  std::vector<float> predicted;   // mean predicted score per segment
  std::vector<float> importance;  // mean label importance per segment
};

SegmentScores segment_means(const ScoredVideo& video, std::int64_t segment_len) {
  SegmentScores out;
  const std::int64_t n = static_cast<std::int64_t>(video.scores.size());
  for (std::int64_t start = 0; start < n; start += segment_len) {
    const std::int64_t end = std::min(n, start + segment_len);
    double ps = 0, is = 0;
    for (std::int64_t i = start; i < end; ++i) {
      ps += video.scores[static_cast<std::size_t>(i)];
      is += video.labels[static_cast<std::size_t>(i)];
    }
    const double w = static_cast<double>(end - start);
    out.predicted.push_back(static_cast<float>(ps / w));
    out.importance.push_back(static_cast<float>(is / w));
  }
  return out;
}

std::vector<std::uint8_t> binarize_segments(std::span<const float> importance,
                                            const EvalOptions& opts) {
  std::vector<std::uint8_t> binary(importance.size(), 0);
  if (opts.binarize == BinarizeRule::threshold) {
    for (std::size_t i = 0; i < importance.size(); ++i)
      binary[i] = importance[i] >= static_cast<float>(opts.binarize_value);
    return binary;
  }
  const auto count = static_cast<std::int64_t>(
      std::llround(opts.binarize_value * static_cast<double>(importance.size())));
  if (count <= 0) return binary;
  const auto order = ranking(importance);
  for (std::int64_t i = 0; i < std::min<std::int64_t>(count, static_cast<std::int64_t>(order.size())); ++i)
    binary[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return binary;
}

// AP over only the top-k ranked segments, normalized by min(k, positives).
std::optional<double> ap_at_k(std::span<const float> predicted,
                              std::span<const std::uint8_t> binary, std::int64_t k) {
  std::int64_t positives = 0;
  for (auto b : binary) positives += b != 0;
  if (positives == 0) return std::nullopt;
  const auto order = ranking(predicted);
  const std::int64_t depth = std::min<std::int64_t>(k, static_cast<std::int64_t>(order.size()));
  double sum = 0;
  std::int64_t hits = 0;
  for (std::int64_t rank = 0; rank < depth; ++rank) {
    if (binary[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(std::min(k, positives));
}

}  // namespace

EvalReport map_and_topk(const std::vector<ScoredVideo>& videos, const EvalOptions& opts) {
  if (opts.segment_len < 1) throw std::invalid_argument("map_and_topk: segment_len must be >= 1");
  EvalReport report;
  double ap_sum = 0, topk_sum = 0;
  std::int64_t ap_count = 0, topk_count = 0;
  for (const auto& video : videos) {
    if (video.scores.size() != video.labels.size())
      throw std::invalid_argument("map_and_topk: score/label length mismatch for " + video.id);
    VideoEval ve;
    ve.id = video.id;
    std::vector<std::uint8_t> binary(video.labels.size());
    for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = video.labels[i] >= 0.5f;
    for (auto b : binary) ve.positives += b != 0;
    ve.ap = average_precision(video.scores, binary);
    const auto segs = segment_means(video, opts.segment_len);
    ve.ap_topk = ap_at_k(segs.predicted, binarize_segments(segs.importance, opts),
                         opts.top_k_segments);
    if (ve.ap) {
      ap_sum += *ve.ap;
      ++ap_count;
    }
    if (ve.ap_topk) {
      topk_sum += *ve.ap_topk;
      ++topk_count;
    }
    report.videos.push_back(std::move(ve));
  }
  report.evaluated = ap_count;
  report.skipped = static_cast<std::int64_t>(videos.size()) - ap_count;
  report.map = ap_count ? ap_sum / static_cast<double>(ap_count) : 0.0;
  report.topk_map = topk_count ? topk_sum / static_cast<double>(topk_count) : 0.0;
  return report;
}

DistinctivenessReport distinctiveness_analysis(const FeatureVectorSequence& fvs,
                                               std::span<const float> labels,
                                               double window_seconds, double threshold,
                                               double rate) {
  if (static_cast<std::int64_t>(labels.size()) != fvs.n)
    throw std::invalid_argument("distinctiveness: label length mismatch");
  const auto window_steps = static_cast<std::int64_t>(std::llround(window_seconds * rate));
  const std::int64_t half = window_steps / 2;
  if (half < 1) throw std::invalid_argument("distinctiveness: window covers fewer than 2 timesteps");

  auto mse = [&](std::int64_t a, std::int64_t b) {
    const float* ra = fvs.data.data() + a * fvs.d;
    const float* rb = fvs.data.data() + b * fvs.d;
    double acc = 0;
    for (std::int64_t j = 0; j < fvs.d; ++j) {
      const double diff = static_cast<double>(ra[j]) - static_cast<double>(rb[j]);
      acc += diff * diff;
    }
    return acc / static_cast<double>(fvs.d);
  };

  if (threshold <= 0) {
    // Self-calibrate: a quarter of the mean in-window pair MSE.
    double total = 0;
    std::int64_t pairs = 0;
    for (std::int64_t t = 0; t < fvs.n; ++t) {
      for (std::int64_t u = t + 1; u <= std::min(fvs.n - 1, t + half); ++u) {
        total += mse(t, u);
        ++pairs;
      }
    }
    threshold = pairs ? 0.25 * total / static_cast<double>(pairs) : 1.0;
  }

  DistinctivenessReport report;
  report.threshold = threshold;
  report.window_steps = window_steps;
  double hl_sum = 0, bg_sum = 0;
  for (std::int64_t t = 0; t < fvs.n; ++t) {
    std::int64_t count = 0;
    const std::int64_t lo = std::max<std::int64_t>(0, t - half);
    const std::int64_t hi = std::min(fvs.n - 1, t + half);
    for (std::int64_t u = lo; u <= hi; ++u) {
      if (u == t) continue;
      if (mse(t, u) < threshold) ++count;
    }
    if (labels[static_cast<std::size_t>(t)] >= 0.5f) {
      hl_sum += static_cast<double>(count);
      ++report.highlight_count;
    } else {
      bg_sum += static_cast<double>(count);
      ++report.background_count;
    }
  }
  if (report.highlight_count) report.highlight_mean_neighbors = hl_sum / static_cast<double>(report.highlight_count);
  if (report.background_count) report.background_mean_neighbors = bg_sum / static_cast<double>(report.background_count);
  report.ratio = report.background_mean_neighbors > 0
                     ? report.highlight_mean_neighbors / report.background_mean_neighbors
                     : 0.0;
  return report;
}

}  // namespace vhd
