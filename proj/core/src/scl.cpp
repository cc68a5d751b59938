#include "vhd/scl.hpp"

#include <cmath>
#include <stdexcept>

namespace vhd {

template <typename T>
TemperatureParam<T> TemperatureParam<T>::init(T initial) {
  if (!(initial > T(0))) throw std::invalid_argument("temperature must be positive");
  return TemperatureParam<T>{Tensor<T>::scalar(std::log(initial), true)};
}

template <typename T>
Tensor<T> pairwise_similarity(const Tensor<T>& rep_a, const Tensor<T>& rep_v) {
  if (rep_a.rank() != 2 || rep_a.shape() != rep_v.shape())
    throw std::invalid_argument("pairwise_similarity: equal [N x C] shapes required, got " +
                                shape_str(rep_a.shape()) + " vs " + shape_str(rep_v.shape()));
  return matmul(rep_a, transpose(rep_v));
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps) {
  if (x.rank() != 2) throw std::invalid_argument("l2_normalize_rows: rank-2 tensor required");
  Tensor<T> sq_norms = add(reduce_sum(mul(x, x), 1), Tensor<T>::scalar(eps));
  Tensor<T> inv_norms = vhd::exp(scalar_mul(vhd::log(sq_norms), T(-0.5)));
  return scale_rows(x, inv_norms);
}

namespace {

template <typename T>
std::vector<std::int64_t> diagonal_indices(std::int64_t n) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i * n + i;
  return idx;
}

// Mean over rows of -log softmax(logits)[i][i].
template <typename T>
Tensor<T> diagonal_cross_entropy(const Tensor<T>& logits) {
  const std::int64_t n = logits.shape()[0];
  Tensor<T> probs = softmax(logits, 1);
  Tensor<T> diag = gather_rows(reshape(probs, {n * n}), diagonal_indices<T>(n));
  return scalar_mul(reduce_mean(vhd::log(diag)), T(-1));
}

}  // namespace

template <typename T>
Tensor<T> scl_loss(const Tensor<T>& similarity, const TemperatureParam<T>& temperature,
                   SclVariant variant) {
  if (similarity.rank() != 2 || similarity.shape()[0] != similarity.shape()[1])
    throw std::invalid_argument("scl_loss: square similarity matrix required, got " +
                                shape_str(similarity.shape()));
  const std::int64_t n = similarity.shape()[0];
  Tensor<T> temp = temperature.value();

  if (variant == SclVariant::clip_infonce) {
    Tensor<T> logits = mul(similarity, temp);
    Tensor<T> by_rows = diagonal_cross_entropy(logits);
    Tensor<T> by_cols = diagonal_cross_entropy(transpose(logits));
    return scalar_mul(add(by_rows, by_cols), T(0.5));
  }

  // literal_stabilized
  Tensor<T> log_sig = vhd::log(sigmoid(similarity));
  Tensor<T> total = reduce_sum(log_sig);
  Tensor<T> diag = reduce_sum(gather_rows(reshape(log_sig, {n * n}), diagonal_indices<T>(n)));
  // diag - (total - diag) = 2*diag - total
  Tensor<T> margin = sub(scalar_mul(diag, T(2)), total);
  return scalar_mul(mul(margin, temp), T(-1));
}

#define VHD_INSTANTIATE_SCL(T)                                                       \
  template struct TemperatureParam<T>;                                               \
  template Tensor<T> pairwise_similarity(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&, T);                         \
  template Tensor<T> scl_loss(const Tensor<T>&, const TemperatureParam<T>&, SclVariant);

VHD_INSTANTIATE_SCL(float)
VHD_INSTANTIATE_SCL(double)

#undef VHD_INSTANTIATE_SCL

}  // namespace vhd
