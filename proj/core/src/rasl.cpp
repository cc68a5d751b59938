#include "vhd/rasl.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vhd {

template <typename T>
RaslParams<T> RaslParams<T>::init(std::int64_t channels, std::int64_t out_channels,
                                  std::int64_t proj_dim, std::int64_t k, std::mt19937_64& rng) {
  RaslParams<T> p;
  p.pointwise = Conv1dLayer<T>::init(channels, out_channels, 1, 1, false, rng);
  p.channel_weights = init_uniform_fan_in<T>({out_channels}, out_channels, rng);
  p.proj_top = init_uniform_fan_in<T>({proj_dim, out_channels}, out_channels, rng);
  p.proj_bottom = init_uniform_fan_in<T>({proj_dim, out_channels}, out_channels, rng);
  p.norm_gain = Tensor<T>::constant({proj_dim}, T(1), true);
  p.norm_bias = Tensor<T>::zeros({proj_dim}, true);
  p.k = k;
  return p;
}

template <typename T>
ActivationResult<T> compute_activations(const Tensor<T>& rep, const RaslParams<T>& p) {
  if (rep.rank() != 2 || rep.shape()[1] != p.in_channels())
    throw std::invalid_argument("compute_activations: representation " + shape_str(rep.shape()) +
                                " does not match " + std::to_string(p.in_channels()) + " channels");
  Tensor<T> z = transpose(conv1d(transpose(rep), p.pointwise.kernels, p.pointwise.bias,
                                 p.pointwise.stride, Pad::valid));  // [N' x C']
  Tensor<T> s = reshape(matmul(z, reshape(p.channel_weights, {p.out_channels(), 1})),
                        {rep.shape()[0]});
  return {std::move(z), std::move(s)};
}

namespace {

// Ascending-by-value with lower original index on ties.
template <typename T>
bool value_then_index_less(std::span<const T> s, std::int64_t a, std::int64_t b) {
  if (s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)])
    return s[static_cast<std::size_t>(a)] < s[static_cast<std::size_t>(b)];
  return a < b;
}

template <typename T>
std::vector<std::int64_t> select_k(std::span<const T> s, std::int64_t k, bool top) {
  const std::int64_t n = static_cast<std::int64_t>(s.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("select: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (top) {
    // Largest values first, lower index preferred on equal values.
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      if (s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)])
        return s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)];
      return a < b;
    });
  } else {
    std::sort(order.begin(), order.end(),
              [&](std::int64_t a, std::int64_t b) { return value_then_index_less(s, a, b); });
  }
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end(),
            [&](std::int64_t a, std::int64_t b) { return value_then_index_less(s, a, b); });
  return order;
}

}  // namespace

template <typename T>
std::vector<std::int64_t> select_topk(std::span<const T> s, std::int64_t k) {
  return select_k(s, k, true);
}

template <typename T>
std::vector<std::int64_t> select_bottomk(std::span<const T> s, std::int64_t k) {
  return select_k(s, k, false);
}

template <typename T>
Tensor<T> kpoint_contrastive_loss(const Tensor<T>& s, const Tensor<T>& z,
                                  const std::vector<std::int64_t>& top,
                                  const std::vector<std::int64_t>& bottom,
                                  const RaslParams<T>& p) {
  if (top.empty() || top.size() != bottom.size())
    throw std::invalid_argument("kpoint_contrastive_loss: index sets must be non-empty and equal-sized");
  const T eps = T(1e-5);
  Tensor<T> top_act = gather_rows(s, top);                              // [k]
  Tensor<T> top_proj = matmul(gather_rows(z, top), transpose(p.proj_top));      // [k x P]
  Tensor<T> bot_proj = matmul(gather_rows(z, bottom), transpose(p.proj_bottom));  // [k x P]
  auto normed = [&](const Tensor<T>& m) {
    return add_rowvec(mul_rowvec(layer_norm(m, eps), p.norm_gain), p.norm_bias);
  };
  Tensor<T> sim = cosine_similarity_rows(normed(top_proj), normed(bot_proj));  // [k]
  Tensor<T> bracket = sub(Tensor<T>::scalar(T(1)), sim);
  Tensor<T> eta = reduce_mean(mul(top_act, bracket));
  return scalar_mul(log(sigmoid(eta)), T(-1));
}

template <typename T>
Tensor<T> mean_topk_loss(const Tensor<T>& s, const std::vector<std::int64_t>& top) {
  if (top.empty()) throw std::invalid_argument("mean_topk_loss: empty index set");
  Tensor<T> eta = reduce_mean(gather_rows(s, top));
  return scalar_mul(log(sigmoid(eta)), T(-1));
}

template <typename T>
Tensor<T> weight_representations(const Tensor<T>& s, const Tensor<T>& rep) {
  if (s.rank() != 1 || rep.rank() != 2 || s.shape()[0] != rep.shape()[0])
    throw std::invalid_argument("weight_representations: lengths differ, " + shape_str(s.shape()) +
                                " vs " + shape_str(rep.shape()));
  return scale_rows(rep, s);
}

#define VHD_INSTANTIATE_RASL(T)                                                               \
  template struct RaslParams<T>;                                                              \
  template ActivationResult<T> compute_activations(const Tensor<T>&, const RaslParams<T>&);   \
  template std::vector<std::int64_t> select_topk(std::span<const T>, std::int64_t);           \
  template std::vector<std::int64_t> select_bottomk(std::span<const T>, std::int64_t);        \
  template Tensor<T> kpoint_contrastive_loss(const Tensor<T>&, const Tensor<T>&,              \
                                             const std::vector<std::int64_t>&,                \
                                             const std::vector<std::int64_t>&,                \
                                             const RaslParams<T>&);                           \
  template Tensor<T> mean_topk_loss(const Tensor<T>&, const std::vector<std::int64_t>&);      \
  template Tensor<T> weight_representations(const Tensor<T>&, const Tensor<T>&);

VHD_INSTANTIATE_RASL(float)
VHD_INSTANTIATE_RASL(double)

#undef VHD_INSTANTIATE_RASL

}  // namespace vhd
