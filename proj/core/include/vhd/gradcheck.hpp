#pragma once

#include <functional>
#include <vector>

#include "vhd/tensor.hpp"

namespace vhd {

/// Compares reverse-mode gradients of a deterministic scalar-valued
/// computation against central finite differences, coordinate by coordinate,
/// over every listed parameter. Returns the maximum of
/// |analytic - (f(x+eps*e) - f(x-eps*e)) / (2*eps)| / (|analytic| + eps).
template <typename T>
T grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& params, T eps);

/// Single-input convenience wrapper.
template <typename T>
T grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, T eps);

}  // namespace vhd
