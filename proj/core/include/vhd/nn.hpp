#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "vhd/tensor.hpp"

namespace vhd {

/// Fills a tensor with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) draws from
/// the given engine. All parameter initialization goes through this so a
/// single seeded stream reproduces a whole model.
template <typename T>
Tensor<T> init_uniform_fan_in(Shape shape, std::int64_t fan_in, std::mt19937_64& rng);

template <typename T>
struct SelfAttentionParams {
  Tensor<T> query, key, value, out;  // each [d x d]

  std::int64_t dim() const { return query.shape()[0]; }
  static SelfAttentionParams init(std::int64_t d, std::mt19937_64& rng);
};

/// One residual single-head self-attention block:
///   out = x + softmax(x Wq (x Wk)^T / sqrt(d)) x Wv Wo
/// x: [N x d]. Rows of the attention matrix sum to 1. No positional encoding,
/// so the block is permutation-equivariant over the temporal axis.
template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const SelfAttentionParams<T>& p);

template <typename T>
struct Conv1dLayer {
  Tensor<T> kernels;  // conv: [C_out x C_in x K]; transposed: [C_in x C_out x K]
  Tensor<T> bias;     // [C_out]
  std::int64_t stride = 1;

  static Conv1dLayer init(std::int64_t c_in, std::int64_t c_out, std::int64_t k,
                          std::int64_t stride, bool transposed, std::mt19937_64& rng);
};

/// Three stride-2 conv layers down, three stride-2 transposed layers back up.
/// Channel plan: d -> hidden1 -> hidden2 -> channels on the way down and the
/// mirror on the way up. ReLU after every layer except the final decoder
/// layer, which stays linear so negative reconstruction targets are reachable.
template <typename T>
struct AutoencoderParams {
  std::array<Conv1dLayer<T>, 3> encoder;
  std::array<Conv1dLayer<T>, 3> decoder;

  std::int64_t input_dim() const { return encoder[0].kernels.shape()[1]; }
  std::int64_t rep_channels() const { return encoder[2].kernels.shape()[0]; }

  static AutoencoderParams init(std::int64_t d, std::int64_t hidden1, std::int64_t hidden2,
                                std::int64_t channels, std::int64_t kernel, std::mt19937_64& rng);
};

constexpr std::int64_t kEncoderLayers = 3;
constexpr std::int64_t kMinEncodeLength = 8;

/// Temporal lengths through the encoder: {N, ceil(N/2), ceil(N/4), ceil(N/8)}.
std::array<std::int64_t, 4> encoder_lengths(std::int64_t n);

/// [N x d] -> [N' x C]. Requires N >= kMinEncodeLength.
template <typename T>
Tensor<T> encode(const Tensor<T>& fvs, const AutoencoderParams<T>& p);

/// [N' x C] -> [N x d], inverting the encoder geometry for temporal length
/// target_len. Each transposed layer is cropped with the padding amounts of
/// its conv twin, which keeps the layer pair an exact adjoint.
template <typename T>
Tensor<T> decode(const Tensor<T>& rep, const AutoencoderParams<T>& p, std::int64_t target_len);

}  // namespace vhd
