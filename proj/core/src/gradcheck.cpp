#include "vhd/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace vhd {

template <typename T>
T grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& params, T eps) {
  for (auto& p : params) const_cast<Tensor<T>&>(p).set_requires_grad(true);
  for (auto& p : params) const_cast<Tensor<T>&>(p).zero_grad();

  std::vector<std::vector<T>> analytic;
  {
    Graph<T> g;
    Tensor<T> loss = f();
    if (loss.numel() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
    g.backward(loss);
  }
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  T worst = T(0);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T> p = params[pi];
    auto data = p.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T saved = data[i];
      data[i] = saved + eps;
      const T hi = f().item();
      data[i] = saved - eps;
      const T lo = f().item();
      data[i] = saved;
      const T fd = (hi - lo) / (T(2) * eps);
      const T a = analytic[pi][i];
      const T rel = std::abs(a - fd) / (std::abs(a) + eps);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

template <typename T>
T grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, T eps) {
  return grad_check<T>([&] { return f(x); }, {x}, eps);
}

template float grad_check(const std::function<Tensor<float>()>&, const std::vector<Tensor<float>>&, float);
template double grad_check(const std::function<Tensor<double>()>&, const std::vector<Tensor<double>>&, double);
template float grad_check(const std::function<Tensor<float>(const Tensor<float>&)>&, Tensor<float>, float);
template double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>&, Tensor<double>, double);

}  // namespace vhd
