#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vhd/config.hpp"
#include "vhd/fvs.hpp"
#include "vhd/nn.hpp"
#include "vhd/rasl.hpp"
#include "vhd/scl.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

/// All learnable weights of one modality branch. The self-attention block is
/// absent under the no-SA ablation and the activation module is absent when
/// rasl_mode == off; absent blocks contribute nothing to the registry.
template <typename T>
struct BranchParams {
  std::optional<SelfAttentionParams<T>> sa;
  AutoencoderParams<T> autoencoder;
  std::optional<RaslParams<T>> rasl;

  static BranchParams init(const TrainConfig& cfg, std::mt19937_64& rng);
};

/// The full model: one branch per trained modality plus the shared
/// contrastive temperature (present only when both branches exist). The
/// construction config travels with the state so checkpoints and inference
/// see the exact architecture.
template <typename T>
struct ModelState {
  TrainConfig cfg;
  std::optional<BranchParams<T>> visual;
  std::optional<BranchParams<T>> audio;
  std::optional<TemperatureParam<T>> temperature;

  /// Deterministic construction from cfg.seed: one RNG stream filled in
  /// registry order.
  static ModelState init(const TrainConfig& cfg);

  /// Named learnable tensors in a fixed order covering every parameter
  /// exactly once. The order defines checkpoint layout and optimizer-slot
  /// alignment.
  std::vector<std::pair<std::string, Tensor<T>>> registry() const;

  const BranchParams<T>& scoring_branch() const;  // visual if present, else audio
};

/// Effective selection count: the configured k clamped so the top and bottom
/// sets cannot be forced to overlap (2k <= N').
std::int64_t effective_k(std::int64_t configured_k, std::int64_t rep_len);

template <typename T>
struct BranchOutputs {
  Tensor<T> rep;              // [N' x C]
  Tensor<T> processed;        // [N' x C'], undefined when rasl is off
  Tensor<T> activations;      // [N']; all-ones constant when rasl is off
  Tensor<T> recon;            // [N x d]
  Tensor<T> recon_loss;       // scalar
  Tensor<T> activation_loss;  // scalar, undefined when rasl is off
  std::vector<std::int64_t> top, bottom;
};

/// Mean absolute error over all N*d entries.
template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& target, const Tensor<T>& recon);

/// One branch pass: self-attention, encode, activations, top/bottom
/// selection, activation-weighted decode, reconstruction loss against
/// `target`. Passing a masked input with the clean target gives the
/// auxiliary objective.
template <typename T>
BranchOutputs<T> branch_forward(const Tensor<T>& input, const Tensor<T>& target,
                                const BranchParams<T>& params, const TrainConfig& cfg);

/// Rows of fvs whose mask bit is set are zeroed.
template <typename T>
Tensor<T> apply_mask_rows(const Tensor<T>& fvs, const BitMask& mask);

/// Reconstruction loss of the masked pass against the unmasked input;
/// activations are recomputed inside the masked pass. Throws if every row
/// is masked.
template <typename T>
Tensor<T> masked_auxiliary_loss(const Tensor<T>& fvs, const BitMask& mask,
                                const BranchParams<T>& params, const TrainConfig& cfg);

/// The seven loss terms; ablated terms stay undefined and are skipped.
template <typename T>
struct LossTerms {
  Tensor<T> recon_v, kpoint_v, aux_v;
  Tensor<T> recon_a, kpoint_a, aux_a;
  Tensor<T> scl;
};

/// Sum of the defined terms in declaration order (fixed float addition
/// order). A non-finite term throws std::domain_error naming the term.
template <typename T>
Tensor<T> total_loss(const LossTerms<T>& terms);

/// Forward-only scoring path: encode the window and read the activation
/// sequence at encoder resolution.
template <typename T>
struct EncodeScores {
  Tensor<T> rep;          // [N' x C]
  Tensor<T> activations;  // [N']
};
template <typename T>
EncodeScores<T> encode_with_activations(const Tensor<T>& window, const BranchParams<T>& params,
                                        const TrainConfig& cfg);

struct ModelStats {
  std::int64_t parameters = 0;
  std::int64_t branch_forward_macs = 0;  // one modality, one window
  std::int64_t pretrain_clip_macs = 0;   // all branches, main + auxiliary passes + contrastive
};

/// Exact parameter total from the registry plus an analytic multiply-add
/// tally for a forward pass over a length-n window.
template <typename T>
ModelStats count_params_flops(const ModelState<T>& model, std::int64_t n);

}  // namespace vhd
