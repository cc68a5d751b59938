#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vhd/nn.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

/// Parameters of the representation-activation module: a pointwise
/// convolution over encoder representations, a bias-free channel weighting
/// that turns each processed vector into one scalar activation, and the
/// projection pair (plus a shared layer-norm affine) used by the k-point
/// contrastive loss.
template <typename T>
struct RaslParams {
  Conv1dLayer<T> pointwise;    // kernel size 1, C -> C'
  Tensor<T> channel_weights;   // [C'], no bias
  Tensor<T> proj_top;          // [P x C']
  Tensor<T> proj_bottom;       // [P x C']
  Tensor<T> norm_gain;         // [P]
  Tensor<T> norm_bias;         // [P]
  std::int64_t k = 10;

  std::int64_t in_channels() const { return pointwise.kernels.shape()[1]; }
  std::int64_t out_channels() const { return pointwise.kernels.shape()[0]; }

  static RaslParams init(std::int64_t channels, std::int64_t out_channels,
                         std::int64_t proj_dim, std::int64_t k, std::mt19937_64& rng);
};

template <typename T>
struct ActivationResult {
  Tensor<T> processed;    // z: [N' x C']
  Tensor<T> activations;  // s: [N']
};

/// z_i = pointwise(r_i); s_i = sum_c channel_weights[c] * z_i[c].
/// Differentiable end to end.
template <typename T>
ActivationResult<T> compute_activations(const Tensor<T>& rep, const RaslParams<T>& p);

/// Original indices of the k largest activations, ordered ascending by
/// activation value. Selection prefers the lower original index on ties, and
/// equal values in the output are also ordered by lower index first.
template <typename T>
std::vector<std::int64_t> select_topk(std::span<const T> s, std::int64_t k);

/// Indices of the k smallest activations, ordered ascending by value,
/// same tie rule.
template <typename T>
std::vector<std::int64_t> select_bottomk(std::span<const T> s, std::int64_t k);

/// k-point contrastive objective. With top indices phi and bottom indices pi
/// (rank i of phi pairs with rank i of pi):
///   eta = (1/k) * sum_i s[phi[i]] * (1 - sim(norm(Wt z[phi[i]]), norm(Wb z[pi[i]])))
///   loss = -log(sigmoid(eta))
/// The index sets are detached; gradients reach s and z only through the
/// gathered values.
template <typename T>
Tensor<T> kpoint_contrastive_loss(const Tensor<T>& s, const Tensor<T>& z,
                                  const std::vector<std::int64_t>& top,
                                  const std::vector<std::int64_t>& bottom,
                                  const RaslParams<T>& p);

/// Ablation of the contrastive pairing: eta = mean of the top-k activations,
/// same outer -log(sigmoid(eta)).
template <typename T>
Tensor<T> mean_topk_loss(const Tensor<T>& s, const std::vector<std::int64_t>& top);

/// Row i of the output is s[i] * rep[i].
template <typename T>
Tensor<T> weight_representations(const Tensor<T>& s, const Tensor<T>& rep);

}  // namespace vhd
