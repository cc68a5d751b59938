#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhd/fvs.hpp"

namespace vhd {

/// Mean over positives, in descending-score order, of the precision at that
/// positive's rank. Score ties rank the lower index first. Returns nullopt
/// when there is no positive label (undefined, reported as a skip upstream).
std::optional<double> average_precision(std::span<const float> scores,
                                        std::span<const std::uint8_t> labels);

struct Segment {
  std::int64_t start = 0;  // inclusive
  std::int64_t end = 0;    // inclusive
  float peak = 0;
};

/// Maximal runs of scores >= tau, dropping runs shorter than min_len.
std::vector<Segment> threshold_segments(std::span<const float> scores, float tau,
                                        std::int64_t min_len);

enum class BinarizeRule {
  top_fraction,  // highest-importance fraction of segments is positive
  threshold,     // segment positive when its mean importance >= value
};

struct EvalOptions {
  std::int64_t segment_len = 25;  // uniform segment width for segment-level metrics
  BinarizeRule binarize = BinarizeRule::top_fraction;
  double binarize_value = 0.25;
  std::int64_t top_k_segments = 5;
};

struct VideoEval {
  std::string id;
  std::optional<double> ap;
  std::optional<double> ap_topk;
  std::int64_t positives = 0;
};

struct EvalReport {
  std::vector<VideoEval> videos;
  double map = 0;        // mean AP over videos with at least one positive
  double topk_map = 0;   // mean segment-level AP over the top-k ranked segments
  std::int64_t evaluated = 0;
  std::int64_t skipped = 0;
  std::string config_echo;
};

struct ScoredVideo {
  std::string id;
  std::vector<float> scores;
  std::vector<float> labels;  // per-timestep importance (binary or graded)
};

/// Timestep-level mAP plus segment-level top-k mAP. Importance scores are
/// averaged per uniform segment and binarized by the configured rule;
/// timestep labels are binarized at 0.5. Videos without any positive are
/// skipped with a warning entry.
EvalReport map_and_topk(const std::vector<ScoredVideo>& videos, const EvalOptions& opts);

struct DistinctivenessReport {
  double highlight_mean_neighbors = 0;
  double background_mean_neighbors = 0;
  double ratio = 0;  // highlight / background (0 when background mean is 0)
  double threshold = 0;
  std::int64_t window_steps = 0;
  std::int64_t highlight_count = 0;
  std::int64_t background_count = 0;
};

/// For each timestep, counts temporal neighbors within +/- half the window
/// whose rowwise MSE falls below the threshold, then averages the counts per
/// class. threshold <= 0 self-calibrates to a quarter of the mean in-window
/// MSE.
DistinctivenessReport distinctiveness_analysis(const FeatureVectorSequence& fvs,
                                               std::span<const float> labels,
                                               double window_seconds, double threshold,
                                               double rate);

}  // namespace vhd
