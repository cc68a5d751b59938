#include "vhd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace vhd {

template <typename T>
Tensor<T> init_uniform_fan_in(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
  const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<T>((2.0 * u - 1.0) * static_cast<double>(bound));
  }
  return Tensor<T>::from(std::move(shape), std::move(v), true);
}

template <typename T>
SelfAttentionParams<T> SelfAttentionParams<T>::init(std::int64_t d, std::mt19937_64& rng) {
  SelfAttentionParams<T> p;
  p.query = init_uniform_fan_in<T>({d, d}, d, rng);
  p.key = init_uniform_fan_in<T>({d, d}, d, rng);
  p.value = init_uniform_fan_in<T>({d, d}, d, rng);
  p.out = init_uniform_fan_in<T>({d, d}, d, rng);
  return p;
}

template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const SelfAttentionParams<T>& p) {
  if (x.rank() != 2 || x.shape()[1] != p.dim())
    throw std::invalid_argument("self_attention: input " + shape_str(x.shape()) +
                                " does not match width " + std::to_string(p.dim()));
  const T scale = T(1) / std::sqrt(static_cast<T>(p.dim()));
  Tensor<T> q = matmul(x, p.query);
  Tensor<T> k = matmul(x, p.key);
  Tensor<T> v = matmul(x, p.value);
  Tensor<T> attn = softmax(scalar_mul(matmul(q, transpose(k)), scale), 1);
  return add(x, matmul(matmul(attn, v), p.out));
}

template <typename T>
Conv1dLayer<T> Conv1dLayer<T>::init(std::int64_t c_in, std::int64_t c_out, std::int64_t k,
                                    std::int64_t stride, bool transposed, std::mt19937_64& rng) {
  Conv1dLayer<T> layer;
  const std::int64_t fan_in = c_in * k;
  layer.kernels = transposed ? init_uniform_fan_in<T>({c_in, c_out, k}, fan_in, rng)
                             : init_uniform_fan_in<T>({c_out, c_in, k}, fan_in, rng);
  layer.bias = init_uniform_fan_in<T>({c_out}, fan_in, rng);
  layer.stride = stride;
  return layer;
}

template <typename T>
AutoencoderParams<T> AutoencoderParams<T>::init(std::int64_t d, std::int64_t hidden1,
                                                std::int64_t hidden2, std::int64_t channels,
                                                std::int64_t kernel, std::mt19937_64& rng) {
  AutoencoderParams<T> p;
  p.encoder[0] = Conv1dLayer<T>::init(d, hidden1, kernel, 2, false, rng);
  p.encoder[1] = Conv1dLayer<T>::init(hidden1, hidden2, kernel, 2, false, rng);
  p.encoder[2] = Conv1dLayer<T>::init(hidden2, channels, kernel, 2, false, rng);
  p.decoder[0] = Conv1dLayer<T>::init(channels, hidden2, kernel, 2, true, rng);
  p.decoder[1] = Conv1dLayer<T>::init(hidden2, hidden1, kernel, 2, true, rng);
  p.decoder[2] = Conv1dLayer<T>::init(hidden1, d, kernel, 2, true, rng);
  return p;
}

std::array<std::int64_t, 4> encoder_lengths(std::int64_t n) {
  std::array<std::int64_t, 4> lens;
  lens[0] = n;
  for (int i = 1; i <= kEncoderLayers; ++i) lens[i] = (lens[i - 1] + 1) / 2;
  return lens;
}

template <typename T>
Tensor<T> encode(const Tensor<T>& fvs, const AutoencoderParams<T>& p) {
  if (fvs.rank() != 2) throw std::invalid_argument("encode: [N x d] input required");
  if (fvs.shape()[0] < kMinEncodeLength)
    throw std::invalid_argument("encode: sequence length " + std::to_string(fvs.shape()[0]) +
                                " shorter than minimum " + std::to_string(kMinEncodeLength));
  Tensor<T> x = transpose(fvs);  // [d x N]
  for (const auto& layer : p.encoder)
    x = relu(conv1d(x, layer.kernels, layer.bias, layer.stride, Pad::same));
  return transpose(x);  // [N' x C]
}

template <typename T>
Tensor<T> decode(const Tensor<T>& rep, const AutoencoderParams<T>& p, std::int64_t target_len) {
  if (rep.rank() != 2) throw std::invalid_argument("decode: [N' x C] input required");
  const auto lens = encoder_lengths(target_len);
  if (rep.shape()[0] != lens[3])
    throw std::invalid_argument("decode: temporal length " + std::to_string(rep.shape()[0]) +
                                " does not match encoder geometry for N=" + std::to_string(target_len));
  Tensor<T> x = transpose(rep);  // [C x N']
  for (int i = 0; i < kEncoderLayers; ++i) {
    const auto& layer = p.decoder[static_cast<std::size_t>(i)];
    const std::int64_t target = lens[static_cast<std::size_t>(kEncoderLayers - 1 - i)];
    x = transposed_conv1d(x, layer.kernels, layer.bias, layer.stride);
    // Undo the conv twin's "same" padding: crop pad_left / pad_right, then
    // right-pad if the natural length fell short of the target.
    const std::int64_t produced = x.shape()[1];
    const std::int64_t total = std::max<std::int64_t>(0, produced - target);
    const std::int64_t pad_left = total / 2;
    x = slice_cols(x, pad_left, std::min<std::int64_t>(target, produced - pad_left));
    if (x.shape()[1] < target) x = pad_cols(x, 0, target - x.shape()[1]);
    if (i + 1 < kEncoderLayers) x = relu(x);  // final layer stays linear
  }
  return transpose(x);  // [N x d]
}

#define VHD_INSTANTIATE_NN(T)                                                                \
  template Tensor<T> init_uniform_fan_in(Shape, std::int64_t, std::mt19937_64&);             \
  template struct SelfAttentionParams<T>;                                                    \
  template Tensor<T> self_attention(const Tensor<T>&, const SelfAttentionParams<T>&);        \
  template struct Conv1dLayer<T>;                                                            \
  template struct AutoencoderParams<T>;                                                      \
  template Tensor<T> encode(const Tensor<T>&, const AutoencoderParams<T>&);                  \
  template Tensor<T> decode(const Tensor<T>&, const AutoencoderParams<T>&, std::int64_t);

VHD_INSTANTIATE_NN(float)
VHD_INSTANTIATE_NN(double)

#undef VHD_INSTANTIATE_NN

}  // namespace vhd
