#pragma once

#include <cstdint>
#include <string>

#include "vhd/fvs.hpp"

namespace vhd {

/// Recipe for a paired-modality dataset with planted highlights. Background
/// timesteps sit near a few per-video cluster centers (mutually similar);
/// highlight timesteps are fresh isotropic latents (distinct). Both modality
/// rows are fixed random linear images of the same latent, so the pairing is
/// genuine. The per-modality signal gains control how much of the highlight
/// component each modality sees, which makes audio-dominant datasets
/// possible. Optional outliers are isolated distinct timesteps labeled as
/// background.
struct SynthSpec {
  std::int64_t videos = 20;
  std::int64_t min_timesteps = 300;
  std::int64_t max_timesteps = 600;
  std::int64_t d_v = 128;
  std::int64_t d_a = 128;
  std::int64_t latent_dim = 32;
  double highlight_fraction = 0.2;  // in (0, 0.5]
  std::int64_t clusters = 5;
  double coupling = 1.0;     // 1 = audio shares the visual latent exactly
  double audio_noise = 0.1;  // additive gaussian noise on audio rows
  double visual_gain = 1.0;  // highlight component scale seen by the visual rows
  double audio_gain = 1.0;   // highlight component scale seen by the audio rows
  std::int64_t outliers_per_video = 0;
  double outlier_gain = 3.0;
  std::int64_t min_segment = 20;
  std::int64_t max_segment = 40;
  double background_jitter = 0.05;
  float timestep_seconds = 0.2f;
  std::uint64_t seed = 0;
};

/// Writes v###_visual.fvs / v###_audio.fvs / v###_labels.fvs per video plus
/// manifest.tsv into out_dir; returns the manifest with resolved paths.
/// Bitwise deterministic per seed.
DatasetManifest synth_generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace vhd
