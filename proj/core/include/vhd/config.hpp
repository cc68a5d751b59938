#pragma once

#include <cstdint>
#include <string>

#include "vhd/scl.hpp"

namespace vhd {

enum class RaslMode {
  kpoint,     // k-point contrastive objective
  mean_topk,  // eta = mean of the top-k activations (ablation)
  off,        // activations frozen to 1, no activation loss (ablation)
};

enum class Modality { both, visual_only, audio_only };

/// Every knob of model construction and pretraining. Serialized one
/// "key = value" line per field; parsing rejects unknown keys.
struct TrainConfig {
  std::int64_t k = 10;
  double gamma0 = 3.1;
  double lr = 0.001;
  double mask_ratio = 0.5;
  std::int64_t batch = 8;
  std::int64_t steps = 2000;
  std::uint64_t seed = 0;
  SclVariant scl_variant = SclVariant::clip_infonce;
  std::int64_t d_v = 128;
  std::int64_t d_a = 128;
  std::int64_t hidden1 = 64;
  std::int64_t hidden2 = 64;
  std::int64_t channels = 64;       // encoder output width C
  std::int64_t rasl_channels = 64;  // processed width C'
  std::int64_t proj_dim = 64;       // contrastive projection width P
  std::int64_t kernel = 3;
  std::int64_t window = 150;
  bool use_sa = true;
  RaslMode rasl_mode = RaslMode::kpoint;
  bool use_auxiliary = true;
  Modality modality = Modality::both;
  bool scl_pool_batch = false;
  bool early_stop = false;
  double rms_alpha = 0.9;
  double rms_eps = 1e-8;

  /// Feature width seen by both branches (audio is resampled to d_v).
  std::int64_t model_dim() const { return d_v; }

  void validate() const;  // throws std::invalid_argument on a bad combination
};

std::string to_string(SclVariant v);
std::string to_string(RaslMode m);
std::string to_string(Modality m);

/// One "key = value" line per field, in a fixed order.
std::string serialize_config(const TrainConfig& cfg);

/// Parses serialize_config output or a hand-written config file. '#' starts
/// a comment. Unknown keys and malformed values throw std::invalid_argument.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config_file(const std::string& path);

}  // namespace vhd
