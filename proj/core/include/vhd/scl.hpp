#pragma once

#include <cmath>
#include <cstdint>

#include "vhd/tensor.hpp"

namespace vhd {

/// Learnable contrastive temperature, stored as its log so the effective
/// value stays strictly positive under unconstrained gradient steps.
template <typename T>
struct TemperatureParam {
  Tensor<T> log_value;  // scalar

  static TemperatureParam init(T initial);
  /// exp(log_value), recorded on the active graph.
  Tensor<T> value() const { return vhd::exp(log_value); }
  T current() const { return std::exp(log_value.item()); }
};

enum class SclVariant {
  clip_infonce,        // symmetric cross-entropy over temperature-scaled similarities
  literal_stabilized,  // sigmoid-safe diagonal-vs-off-diagonal log split
};

/// S[i][j] = dot(a_row_i, v_row_j) for [N' x C] inputs.
template <typename T>
Tensor<T> pairwise_similarity(const Tensor<T>& rep_a, const Tensor<T>& rep_v);

/// Rows rescaled to unit L2 norm (eps keeps zero rows finite).
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps);

/// Symmetric contrastive loss over a square similarity matrix whose diagonal
/// holds the paired entries. Both variants decrease when diagonal entries
/// grow relative to off-diagonal ones.
///   clip_infonce:  0.5 * (row-wise CE + column-wise CE) of temperature * S
///                  against diagonal targets.
///   literal_stabilized:  -temperature * (sum_i log sig(S_ii)
///                                        - sum_{i != j} log sig(S_ij)).
template <typename T>
Tensor<T> scl_loss(const Tensor<T>& similarity, const TemperatureParam<T>& temperature,
                   SclVariant variant);

}  // namespace vhd
