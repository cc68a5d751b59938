#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vhd/config.hpp"
#include "vhd/fvs.hpp"
#include "vhd/model.hpp"

namespace vhd {

/// RMSprop: v <- alpha*v + (1-alpha)*g^2; theta <- theta - lr*g/(sqrt(v)+eps).
/// One squared-gradient accumulator per registry entry, in registry order.
template <typename T>
struct RmsPropState {
  T alpha{};
  T eps{};
  T lr{};
  std::vector<std::vector<T>> accum;

  static RmsPropState init(const std::vector<std::pair<std::string, Tensor<T>>>& registry,
                           const TrainConfig& cfg);
  void step(const std::vector<std::pair<std::string, Tensor<T>>>& registry);
};

/// One paired pretraining window. Audio has been pooled to the visual length
/// and resampled to the visual feature width before windowing.
struct TrainingClip {
  std::string video_id;
  std::int64_t window_index = 0;
  std::int64_t window_len = 0;
  std::int64_t dim = 0;
  std::vector<float> visual;  // window_len x dim (empty for audio-only runs)
  std::vector<float> audio;   // window_len x dim (empty for visual-only runs)
};

/// Loads every manifest entry, aligns the modalities, and windows them.
/// Throws on an empty manifest, a missing pairing, or feature-width drift
/// across files.
std::vector<TrainingClip> prepare_clips(const DatasetManifest& manifest, const TrainConfig& cfg);

struct TraceRow {
  std::int64_t step = 0;
  float total = 0, recon_v = 0, kpoint_v = 0, aux_v = 0;
  float recon_a = 0, kpoint_a = 0, aux_a = 0, scl = 0;
};

std::string trace_csv_header();
std::string trace_csv_row(const TraceRow& row);

struct PretrainResult {
  ModelState<float> model;
  RmsPropState<float> optimizer;
  std::vector<TraceRow> trace;
  std::int64_t next_step = 0;  // first step not yet run
};

/// Algorithm: per step, sample a batch of clips, run the main and the masked
/// branch passes per modality, add the cross-modal contrastive term, average
/// the per-clip totals, backpropagate, and apply one RMSprop step. Batch
/// sampling and mask draws are a pure function of (seed, step), so resuming
/// from a checkpoint reproduces an uninterrupted run exactly.
PretrainResult pretrain(const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::function<void(const TraceRow&)>& on_step = nullptr);

/// Continues a run from `start_step` (exclusive of already-finished steps)
/// until cfg.steps.
PretrainResult pretrain_resume(ModelState<float> model, RmsPropState<float> optimizer,
                               std::int64_t start_step, const DatasetManifest& manifest,
                               const std::function<void(const TraceRow&)>& on_step = nullptr);

/// Binary checkpoint: magic "RASLCKPT", format version, progress step,
/// config echo, then named parameter records (name, shape, f32 payload) in
/// registry order, with the optimizer accumulators appended under an "opt."
/// name prefix. Round-trips are bit-exact.
void checkpoint_save(const ModelState<float>& model, const RmsPropState<float>& optimizer,
                     std::int64_t step, const std::string& path);

struct Checkpoint {
  ModelState<float> model;
  RmsPropState<float> optimizer;
  std::int64_t step = 0;
};

Checkpoint checkpoint_load(const std::string& path);

}  // namespace vhd
