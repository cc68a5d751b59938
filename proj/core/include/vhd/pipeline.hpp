#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vhd/metrics.hpp"
#include "vhd/model.hpp"
#include "vhd/trainer.hpp"

namespace vhd {

struct InferOptions {
  float threshold = 0.5f;
  std::int64_t min_segment_len = 1;
};

struct HighlightResult {
  std::string id;
  std::vector<float> scores;  // one per original timestep, min-max normalized to [0, 1]
  std::vector<Segment> segments;
};

/// Linear upsampling with aligned endpoints.
std::vector<float> upsample_linear(std::span<const float> values, std::int64_t target);

/// In-place min-max normalization to [0, 1]; a constant input maps to zeros.
void minmax_normalize(std::span<float> values);

/// Scores one fixed-length window at encoder temporal resolution and
/// upsamples to the window length. Forward-only, no graph.
std::vector<float> score_window(std::span<const float> window_data, std::int64_t window_len,
                                const BranchParams<float>& branch, const TrainConfig& cfg);

/// Visual-only inference: split into windows, score each, place scores back
/// on the original timeline (repeat-padded tails are discarded), min-max
/// normalize over the whole video, then segment by threshold.
HighlightResult infer(const FeatureVectorSequence& visual, const ModelState<float>& model,
                      const InferOptions& opts);

// Score-file round trip: CSV with header "timestep,score".
void write_scores_csv(std::span<const float> scores, const std::string& path);
std::vector<float> read_scores_csv(const std::string& path);

/// Simple polyline score curve with a horizontal threshold line.
void write_scores_svg(std::span<const float> scores, float threshold, const std::string& path);

}  // namespace vhd
