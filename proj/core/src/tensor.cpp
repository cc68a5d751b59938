#include "vhd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#ifdef VHD_WITH_BLAS
#include <cblas.h>
// Keep BLAS single-threaded: batch elements are the parallelism unit and
// reproducibility requires a fixed reduction order.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));
namespace {
struct BlasThreadPin {
  BlasThreadPin() {
    if (openblas_set_num_threads) openblas_set_num_threads(1);
  }
} const blas_thread_pin;
}  // namespace
#endif

namespace vhd {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e < 1) throw std::invalid_argument("invalid shape " + shape_str(shape) + ": extents must be >= 1");
  }
}

// Deterministic engine-to-float helpers. Draws are independent of the
// standard library's distribution implementations so that seeded content is
// stable across toolchains.
double unit_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;  // [0, 1)
}

// C = alpha * op(A) * op(B) + beta * C, row-major.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          T alpha, const T* a, const T* b, T beta, T* c) {
#ifdef VHD_WITH_BLAS
  const std::int64_t lda = trans_a ? m : k;
  const std::int64_t ldb = trans_b ? k : n;
  if constexpr (std::is_same_v<T, float>) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
                static_cast<int>(n));
    return;
  } else if constexpr (std::is_same_v<T, double>) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
                static_cast<int>(n));
    return;
  }
#endif
  if (beta == T(0)) {
    std::fill(c, c + m * n, T(0));
  } else if (beta != T(1)) {
    for (std::int64_t i = 0; i < m * n; ++i) c[i] *= beta;
  }
  auto at_a = [&](std::int64_t i, std::int64_t p) { return trans_a ? a[p * m + i] : a[i * k + p]; };
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = alpha * at_a(i, p);
      const T* brow = trans_b ? nullptr : b + p * n;
      T* crow = c + i * n;
      if (trans_b) {
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
using StoragePtr = std::shared_ptr<detail::Storage<T>>;

template <typename T>
void accumulate(const StoragePtr<T>& st, const std::vector<T>& g) {
  if (!st->requires_grad) return;
  st->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) st->grad[i] += g[i];
}

// Records a node when grad flow is possible. The wrapped callback no-ops if
// the output never received a gradient (node off the loss path).
template <typename T>
void record(const char* op, const Tensor<T>& out, std::function<void()> fn) {
  auto* g = Graph<T>::current();
  if (!g || !out.requires_grad()) return;
  g->record(op, out.storage(), std::move(fn));
}

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> ts) {
  for (auto* t : ts)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

}  // namespace

template <typename T>
Tensor<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  auto st = std::make_shared<detail::Storage<T>>();
  st->shape = std::move(shape);
  st->data = std::move(values);
  st->requires_grad = requires_grad;
  return Tensor<T>(std::move(st));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)), T(0));
  return make_tensor<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, T value, bool requires_grad) {
  check_shape(shape);
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)), value);
  return make_tensor<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, T lo, T hi, std::uint64_t seed, bool requires_grad) {
  check_shape(shape);
  std::mt19937_64 eng(seed);
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = lo + (hi - lo) * static_cast<T>(unit_uniform(eng));
  return make_tensor<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::gaussian(Shape shape, T mean, T stddev, std::uint64_t seed, bool requires_grad) {
  check_shape(shape);
  std::mt19937_64 eng(seed);
  const std::size_t n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<T> v(n);
  // Box-Muller, pairwise; the spare draw of an odd tail is discarded.
  for (std::size_t i = 0; i < n; i += 2) {
    double u1 = unit_uniform(eng);
    double u2 = unit_uniform(eng);
    while (u1 <= 0.0) u1 = unit_uniform(eng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = mean + stddev * static_cast<T>(r * std::cos(2.0 * M_PI * u2));
    if (i + 1 < n) v[i + 1] = mean + stddev * static_cast<T>(r * std::sin(2.0 * M_PI * u2));
  }
  return make_tensor<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("from(): " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  return make_tensor<T>(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return make_tensor<T>(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor has no gradient; run backward first");
  return {st_->grad.data(), st_->grad.size()};
}

template <typename T>
std::span<T> Tensor<T>::grad_mut() {
  st_->ensure_grad();
  return {st_->grad.data(), st_->grad.size()};
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return st_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return make_tensor<T>(st_->shape, st_->data, st_->requires_grad);
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Graph<T>*& current_graph() {
  static thread_local Graph<T>* g = nullptr;
  return g;
}

template <typename T>
Graph<T>::Graph() {
  if (current_graph<T>() != nullptr)
    throw std::runtime_error("a Graph is already active on this thread");
  current_graph<T>() = this;
}

template <typename T>
Graph<T>::~Graph() {
  current_graph<T>() = nullptr;
}

template <typename T>
Graph<T>* Graph<T>::current() {
  return current_graph<T>();
}

template <typename T>
void Graph<T>::record(const char* op, std::shared_ptr<detail::Storage<T>> out, std::function<void()> fn) {
  nodes_.push_back(Node{op, std::move(out), std::move(fn)});
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
  loss.storage()->ensure_grad();
  loss.storage()->grad[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // never reached from the loss
    it->fn();
  }
  nodes_.clear();
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

enum class Broadcast { none, left_scalar, right_scalar };

template <typename T>
Broadcast binary_broadcast(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.numel() == 1) return Broadcast::right_scalar;
  if (a.numel() == 1) return Broadcast::left_scalar;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, Bwd bwd) {
  const Broadcast bc = binary_broadcast(a, b, name);
  const Tensor<T>& big = (bc == Broadcast::left_scalar) ? b : a;
  std::vector<T> out(static_cast<std::size_t>(big.numel()));
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T av = (bc == Broadcast::left_scalar) ? ad[0] : ad[i];
    const T bv = (bc == Broadcast::right_scalar) ? bd[0] : bd[i];
    out[i] = fwd(av, bv);
  }
  auto r = make_tensor<T>(big.shape(), std::move(out),
                          any_requires_grad<T>({&a, &b}));
  record<T>(name, r, [sa = a.storage(), sb = b.storage(), so = r.storage(), bc, bwd] {
    const auto& og = so->grad;
    for (std::size_t i = 0; i < og.size(); ++i) {
      const T av = (bc == Broadcast::left_scalar) ? sa->data[0] : sa->data[i];
      const T bv = (bc == Broadcast::right_scalar) ? sb->data[0] : sb->data[i];
      T da, db;
      bwd(av, bv, og[i], da, db);
      if (sa->requires_grad) {
        sa->ensure_grad();
        sa->grad[(bc == Broadcast::left_scalar) ? 0 : i] += da;
      }
      if (sb->requires_grad) {
        sb->ensure_grad();
        sb->grad[(bc == Broadcast::right_scalar) ? 0 : i] += db;
      }
    }
  });
  return r;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Bwd bwd) {
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  auto r = make_tensor<T>(x.shape(), std::move(out), x.requires_grad());
  record<T>(name, r, [sx = x.storage(), so = r.storage(), bwd] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::size_t i = 0; i < so->grad.size(); ++i)
      sx->grad[i] += bwd(sx->data[i], so->data[i]) * so->grad[i];
  });
  return r;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>("add", a, b, [](T x, T y) { return x + y; },
                      [](T, T, T g, T& da, T& db) { da = g; db = g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>("sub", a, b, [](T x, T y) { return x - y; },
                      [](T, T, T g, T& da, T& db) { da = g; db = -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>("mul", a, b, [](T x, T y) { return x * y; },
                      [](T x, T y, T g, T& da, T& db) { da = g * y; db = g * x; });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T c) {
  return unary_op<T>("scalar_mul", a, [c](T x) { return c * x; },
                     [c](T, T) { return c; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                     [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto sig = [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  };
  return unary_op<T>("sigmoid", x, sig, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.data())
    if (!(v > T(0)))
      throw std::domain_error("log of non-positive entry " + std::to_string(static_cast<double>(v)));
  return unary_op<T>("log", x, [](T v) { return std::log(v); },
                     [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op<T>("exp", x, [](T v) { return std::exp(v); },
                     [](T, T y) { return y; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary_op<T>("abs", x, [](T v) { return std::abs(v); },
                     [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  auto r = make_tensor<T>(Shape{1}, std::vector<T>{acc}, x.requires_grad());
  record<T>("sum", r, [sx = x.storage(), so = r.storage()] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    const T g = so->grad[0];
    for (auto& gv : sx->grad) gv += g;
  });
  return r;
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
  return scalar_mul(reduce_sum(x), T(1) / static_cast<T>(x.numel()));
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& x, std::int64_t axis, bool mean) {
  if (axis < 0 || axis >= x.rank())
    throw std::invalid_argument("reduce: axis " + std::to_string(axis) + " out of range for " +
                                shape_str(x.shape()));
  const auto& shape = x.shape();
  Shape out_shape;
  for (std::int64_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::int64_t i = axis + 1; i < x.rank(); ++i) inner *= shape[i];
  const std::int64_t extent = shape[axis];
  const T scale = mean ? T(1) / static_cast<T>(extent) : T(1);

  std::vector<T> out(static_cast<std::size_t>(outer * inner), T(0));
  const auto xd = x.data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t e = 0; e < extent; ++e)
      for (std::int64_t i = 0; i < inner; ++i)
        out[static_cast<std::size_t>(o * inner + i)] += xd[static_cast<std::size_t>((o * extent + e) * inner + i)];
  if (mean)
    for (auto& v : out) v *= scale;

  auto r = make_tensor<T>(std::move(out_shape), std::move(out), x.requires_grad());
  record<T>("reduce_axis", r, [sx = x.storage(), so = r.storage(), outer, inner, extent, scale] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t e = 0; e < extent; ++e)
        for (std::int64_t i = 0; i < inner; ++i)
          sx->grad[static_cast<std::size_t>((o * extent + e) * inner + i)] +=
              scale * so->grad[static_cast<std::size_t>(o * inner + i)];
  });
  return r;
}

}  // namespace

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::int64_t axis) {
  return reduce_axis(x, axis, false);
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, std::int64_t axis) {
  return reduce_axis(x, axis, true);
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const std::int64_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(m * p));
  gemm<T>(false, false, m, p, k, T(1), a.data().data(), b.data().data(), T(0), out.data());
  auto r = make_tensor<T>(Shape{m, p}, std::move(out), any_requires_grad<T>({&a, &b}));
  record<T>("matmul", r, [sa = a.storage(), sb = b.storage(), so = r.storage(), m, k, p] {
    const T* g = so->grad.data();
    if (sa->requires_grad) {
      sa->ensure_grad();  // dA += dC * B^T
      gemm<T>(false, true, m, k, p, T(1), g, sb->data.data(), T(1), sa->grad.data());
    }
    if (sb->requires_grad) {
      sb->ensure_grad();  // dB += A^T * dC
      gemm<T>(true, false, k, p, m, T(1), sa->data.data(), g, T(1), sb->grad.data());
    }
  });
  return r;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
  const std::int64_t n = x.shape()[0], m = x.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(n * m));
  const auto xd = x.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      out[static_cast<std::size_t>(j * n + i)] = xd[static_cast<std::size_t>(i * m + j)];
  auto r = make_tensor<T>(Shape{m, n}, std::move(out), x.requires_grad());
  record<T>("transpose", r, [sx = x.storage(), so = r.storage(), n, m] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < m; ++j)
        sx->grad[static_cast<std::size_t>(i * m + j)] += so->grad[static_cast<std::size_t>(j * n + i)];
  });
  return r;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::int64_t axis) {
  if (x.rank() > 2) throw std::invalid_argument("softmax: rank must be 1 or 2");
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("softmax: bad axis");
  for (T v : x.data())
    if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite input");

  const bool rows = (x.rank() == 1) || axis == 1;
  const std::int64_t n = x.rank() == 1 ? 1 : x.shape()[0];
  const std::int64_t m = x.rank() == 1 ? x.shape()[0] : x.shape()[1];
  // Lane layout: "rows" normalizes contiguous slices, otherwise columns.
  const std::int64_t lanes = rows ? n : m;
  const std::int64_t len = rows ? m : n;
  auto idx = [rows, lanes, len](std::int64_t lane, std::int64_t i) {
    return static_cast<std::size_t>(rows ? lane * len + i : i * lanes + lane);
  };

  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xd = x.data();
  for (std::int64_t lane = 0; lane < lanes; ++lane) {
    T mx = xd[idx(lane, 0)];
    for (std::int64_t i = 1; i < len; ++i) mx = std::max(mx, xd[idx(lane, i)]);
    T sum = T(0);
    for (std::int64_t i = 0; i < len; ++i) {
      const T e = std::exp(xd[idx(lane, i)] - mx);
      out[idx(lane, i)] = e;
      sum += e;
    }
    const T inv = T(1) / sum;
    for (std::int64_t i = 0; i < len; ++i) out[idx(lane, i)] *= inv;
  }
  auto r = make_tensor<T>(x.shape(), std::move(out), x.requires_grad());
  record<T>("softmax", r, [sx = x.storage(), so = r.storage(), lanes, len, idx] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t lane = 0; lane < lanes; ++lane) {
      T dot = T(0);
      for (std::int64_t i = 0; i < len; ++i) dot += so->grad[idx(lane, i)] * so->data[idx(lane, i)];
      for (std::int64_t i = 0; i < len; ++i)
        sx->grad[idx(lane, i)] += (so->grad[idx(lane, i)] - dot) * so->data[idx(lane, i)];
    }
  });
  return r;
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::int64_t pad_left = 0;
  std::int64_t pad_right = 0;
  std::int64_t out_len = 0;
};

ConvGeometry conv_geometry(std::int64_t len, std::int64_t kernel, std::int64_t stride, Pad pad) {
  ConvGeometry g;
  if (pad == Pad::same) {
    g.out_len = (len + stride - 1) / stride;
    const std::int64_t total = std::max<std::int64_t>(0, (g.out_len - 1) * stride + kernel - len);
    g.pad_left = total / 2;
    g.pad_right = total - g.pad_left;
  } else {
    if (len < kernel) throw std::invalid_argument("conv1d: input length " + std::to_string(len) +
                                                  " shorter than kernel " + std::to_string(kernel));
    g.out_len = (len - kernel) / stride + 1;
  }
  return g;
}

}  // namespace

namespace {

// Lowered patch matrix: cols[(ci*K + kk)][l] = padded x[ci][l*stride + kk - pad_left].
// Kernels stored [C_out x C_in x K] are already the matching [C_out x C_in*K]
// row-major matrix, so the convolution is one GEMM over the lowering.
template <typename T>
std::vector<T> im2col(const T* x, std::int64_t c_in, std::int64_t len, std::int64_t k,
                      std::int64_t stride, const ConvGeometry& geo) {
  std::vector<T> cols(static_cast<std::size_t>(c_in * k * geo.out_len), T(0));
  for (std::int64_t ci = 0; ci < c_in; ++ci) {
    const T* xrow = x + ci * len;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      T* crow = cols.data() + (ci * k + kk) * geo.out_len;
      const std::int64_t off = kk - geo.pad_left;
      std::int64_t l0 = 0;
      if (off < 0) l0 = (-off + stride - 1) / stride;
      for (std::int64_t l = l0; l < geo.out_len; ++l) {
        const std::int64_t pos = l * stride + off;
        if (pos >= len) break;
        crow[l] = xrow[pos];
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add patch values back onto the input layout.
template <typename T>
void col2im_accumulate(const T* cols, std::int64_t c_in, std::int64_t len, std::int64_t k,
                       std::int64_t stride, const ConvGeometry& geo, T* x_grad) {
  for (std::int64_t ci = 0; ci < c_in; ++ci) {
    T* grow = x_grad + ci * len;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const T* crow = cols + (ci * k + kk) * geo.out_len;
      const std::int64_t off = kk - geo.pad_left;
      std::int64_t l0 = 0;
      if (off < 0) l0 = (-off + stride - 1) / stride;
      for (std::int64_t l = l0; l < geo.out_len; ++l) {
        const std::int64_t pos = l * stride + off;
        if (pos >= len) break;
        grow[pos] += crow[l];
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::int64_t stride, Pad pad) {
  if (x.rank() != 2 || kernels.rank() != 3)
    throw std::invalid_argument("conv1d: x must be [C_in x L], kernels [C_out x C_in x K]");
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  const std::int64_t c_in = x.shape()[0], len = x.shape()[1];
  const std::int64_t c_out = kernels.shape()[0], kc_in = kernels.shape()[1], k = kernels.shape()[2];
  if (kc_in != c_in)
    throw std::invalid_argument("conv1d: kernel input channels " + std::to_string(kc_in) +
                                " != input channels " + std::to_string(c_in));
  if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != c_out))
    throw std::invalid_argument("conv1d: bias must be [C_out]");
  const ConvGeometry geo = conv_geometry(len, k, stride, pad);
  if (len + geo.pad_left + geo.pad_right < k)
    throw std::invalid_argument("conv1d: padded length shorter than kernel");

  auto cols = std::make_shared<std::vector<T>>(im2col(x.data().data(), c_in, len, k, stride, geo));
  std::vector<T> out(static_cast<std::size_t>(c_out * geo.out_len), T(0));
  if (bias.defined()) {
    for (std::int64_t co = 0; co < c_out; ++co) {
      const T b = bias.data()[static_cast<std::size_t>(co)];
      T* orow = out.data() + co * geo.out_len;
      for (std::int64_t l = 0; l < geo.out_len; ++l) orow[l] = b;
    }
  }
  gemm<T>(false, false, c_out, geo.out_len, c_in * k, T(1), kernels.data().data(), cols->data(),
          T(1), out.data());

  auto r = make_tensor<T>(Shape{c_out, geo.out_len}, std::move(out),
                          any_requires_grad<T>({&x, &kernels, &bias}));
  record<T>("conv1d", r, [sx = x.storage(), sk = kernels.storage(),
                          sb = bias.defined() ? bias.storage() : nullptr, so = r.storage(),
                          cols = std::move(cols), c_in, c_out, len, k, stride, geo] {
    const T* g = so->grad.data();
    if (sb && sb->requires_grad) {
      sb->ensure_grad();
      for (std::int64_t co = 0; co < c_out; ++co) {
        T acc = T(0);
        for (std::int64_t l = 0; l < geo.out_len; ++l) acc += g[co * geo.out_len + l];
        sb->grad[static_cast<std::size_t>(co)] += acc;
      }
    }
    if (sk->requires_grad) {
      sk->ensure_grad();  // dK += dY * cols^T
      gemm<T>(false, true, c_out, c_in * k, geo.out_len, T(1), g, cols->data(), T(1),
              sk->grad.data());
    }
    if (sx->requires_grad) {
      sx->ensure_grad();  // dcols = K^T * dY, scattered back through the lowering
      std::vector<T> dcols(static_cast<std::size_t>(c_in * k * geo.out_len));
      gemm<T>(true, false, c_in * k, geo.out_len, c_out, T(1), sk->data.data(), g, T(0),
              dcols.data());
      col2im_accumulate(dcols.data(), c_in, len, k, stride, geo, sx->grad.data());
    }
  });
  return r;
}

template <typename T>
Tensor<T> transposed_conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                            std::int64_t stride) {
  if (x.rank() != 2 || kernels.rank() != 3)
    throw std::invalid_argument("transposed_conv1d: x must be [C_in x L], kernels [C_in x C_out x K]");
  if (stride < 1) throw std::invalid_argument("transposed_conv1d: stride must be >= 1");
  const std::int64_t c_in = x.shape()[0], len = x.shape()[1];
  const std::int64_t kc_in = kernels.shape()[0], c_out = kernels.shape()[1], k = kernels.shape()[2];
  if (kc_in != c_in)
    throw std::invalid_argument("transposed_conv1d: kernel input channels " + std::to_string(kc_in) +
                                " != input channels " + std::to_string(c_in));
  if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != c_out))
    throw std::invalid_argument("transposed_conv1d: bias must be [C_out]");
  const std::int64_t out_len = stride * (len - 1) + k;

  // patches = K_mat^T * x with K_mat = [C_in x C_out*K]; scatter each
  // patches[(co*K + kk)][l] onto out[co][l*stride + kk].
  std::vector<T> patches(static_cast<std::size_t>(c_out * k * len));
  gemm<T>(true, false, c_out * k, len, c_in, T(1), kernels.data().data(), x.data().data(), T(0),
          patches.data());
  std::vector<T> out(static_cast<std::size_t>(c_out * out_len), T(0));
  if (bias.defined()) {
    for (std::int64_t co = 0; co < c_out; ++co) {
      const T b = bias.data()[static_cast<std::size_t>(co)];
      T* orow = out.data() + co * out_len;
      for (std::int64_t l = 0; l < out_len; ++l) orow[l] = b;
    }
  }
  for (std::int64_t co = 0; co < c_out; ++co) {
    T* orow = out.data() + co * out_len;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const T* prow = patches.data() + (co * k + kk) * len;
      for (std::int64_t l = 0; l < len; ++l) orow[l * stride + kk] += prow[l];
    }
  }

  auto r = make_tensor<T>(Shape{c_out, out_len}, std::move(out),
                          any_requires_grad<T>({&x, &kernels, &bias}));
  record<T>("transposed_conv1d", r, [sx = x.storage(), sk = kernels.storage(),
                                     sb = bias.defined() ? bias.storage() : nullptr,
                                     so = r.storage(), c_in, c_out, len, k, stride, out_len] {
    const T* g = so->grad.data();
    if (sb && sb->requires_grad) {
      sb->ensure_grad();
      for (std::int64_t co = 0; co < c_out; ++co) {
        T acc = T(0);
        for (std::int64_t l = 0; l < out_len; ++l) acc += g[co * out_len + l];
        sb->grad[static_cast<std::size_t>(co)] += acc;
      }
    }
    const bool dx = sx->requires_grad, dk = sk->requires_grad;
    if (!dx && !dk) return;
    // dpatches[(co*K + kk)][l] = dout[co][l*stride + kk]
    std::vector<T> dpatches(static_cast<std::size_t>(c_out * k * len));
    for (std::int64_t co = 0; co < c_out; ++co) {
      const T* grow = g + co * out_len;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        T* prow = dpatches.data() + (co * k + kk) * len;
        for (std::int64_t l = 0; l < len; ++l) prow[l] = grow[l * stride + kk];
      }
    }
    if (dx) {
      sx->ensure_grad();  // dx += K_mat * dpatches
      gemm<T>(false, false, c_in, len, c_out * k, T(1), sk->data.data(), dpatches.data(), T(1),
              sx->grad.data());
    }
    if (dk) {
      sk->ensure_grad();  // dK_mat += x * dpatches^T
      gemm<T>(false, true, c_in, c_out * k, len, T(1), sx->data.data(), dpatches.data(), T(1),
              sk->grad.data());
    }
  });
  return r;
}

// ---------------------------------------------------------------------------
// Normalization and similarity

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps) {
  if (x.rank() > 2) throw std::invalid_argument("layer_norm: rank must be 1 or 2");
  const std::int64_t rows = x.rank() == 2 ? x.shape()[0] : 1;
  const std::int64_t d = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  std::vector<T> inv_std(static_cast<std::size_t>(rows));
  const auto xd = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * d;
    T mean = T(0);
    for (std::int64_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      const T c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    T* orow = out.data() + r * d;
    for (std::int64_t j = 0; j < d; ++j) orow[j] = (row[j] - mean) * is;
  }
  auto r = make_tensor<T>(x.shape(), std::move(out), x.requires_grad());
  record<T>("layer_norm", r,
            [sx = x.storage(), so = r.storage(), inv_std = std::move(inv_std), rows, d] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* y = so->data.data() + r * d;
      const T* gy = so->grad.data() + r * d;
      T* gx = sx->grad.data() + r * d;
      T mg = T(0), mgy = T(0);
      for (std::int64_t j = 0; j < d; ++j) {
        mg += gy[j];
        mgy += gy[j] * y[j];
      }
      mg /= static_cast<T>(d);
      mgy /= static_cast<T>(d);
      const T is = inv_std[static_cast<std::size_t>(r)];
      for (std::int64_t j = 0; j < d; ++j) gx[j] += (gy[j] - mg - y[j] * mgy) * is;
    }
  });
  return r;
}

namespace {

// Shared kernel for the scalar and the row-wise cosine similarity.
// Rows with a near-zero norm evaluate to 0 and receive no gradient.
template <typename T>
Tensor<T> cosine_rows_impl(const Tensor<T>& a, const Tensor<T>& b, bool scalar_out) {
  if (a.shape() != b.shape()) throw std::invalid_argument("cosine_similarity: shape mismatch");
  const std::int64_t rows = a.rank() == 2 ? a.shape()[0] : 1;
  const std::int64_t d = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  constexpr T kTiny = T(1e-12);

  std::vector<T> out(static_cast<std::size_t>(rows));
  std::vector<T> norms_a(static_cast<std::size_t>(rows)), norms_b(static_cast<std::size_t>(rows));
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* ar = ad.data() + r * d;
    const T* br = bd.data() + r * d;
    T dot = T(0), na = T(0), nb = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      dot += ar[j] * br[j];
      na += ar[j] * ar[j];
      nb += br[j] * br[j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    norms_a[static_cast<std::size_t>(r)] = na;
    norms_b[static_cast<std::size_t>(r)] = nb;
    out[static_cast<std::size_t>(r)] = (na < kTiny || nb < kTiny) ? T(0) : dot / (na * nb);
  }
  Shape shape = scalar_out ? Shape{1} : Shape{rows};
  auto r = make_tensor<T>(std::move(shape), std::move(out), any_requires_grad<T>({&a, &b}));
  record<T>("cosine_similarity", r,
            [sa = a.storage(), sb = b.storage(), so = r.storage(), norms_a = std::move(norms_a),
             norms_b = std::move(norms_b), rows, d] {
    const bool da = sa->requires_grad, db = sb->requires_grad;
    if (!da && !db) return;
    if (da) sa->ensure_grad();
    if (db) sb->ensure_grad();
    constexpr T kTiny = T(1e-12);
    for (std::int64_t r = 0; r < rows; ++r) {
      const T na = norms_a[static_cast<std::size_t>(r)];
      const T nb = norms_b[static_cast<std::size_t>(r)];
      if (na < kTiny || nb < kTiny) continue;
      const T c = so->data[static_cast<std::size_t>(r)];
      const T g = so->grad[static_cast<std::size_t>(r)];
      const T* ar = sa->data.data() + r * d;
      const T* br = sb->data.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) {
        if (da) sa->grad[static_cast<std::size_t>(r * d + j)] += g * (br[j] / (na * nb) - c * ar[j] / (na * na));
        if (db) sb->grad[static_cast<std::size_t>(r * d + j)] += g * (ar[j] / (na * nb) - c * br[j] / (nb * nb));
      }
    }
  });
  return r;
}

}  // namespace

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw std::invalid_argument("cosine_similarity: rank-1 tensors required");
  return cosine_rows_impl(a, b, true);
}

template <typename T>
Tensor<T> cosine_similarity_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("cosine_similarity_rows: rank-2 tensors required");
  return cosine_rows_impl(a, b, false);
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  check_shape(shape);
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  auto r = make_tensor<T>(std::move(shape), std::move(out), x.requires_grad());
  record<T>("reshape", r, [sx = x.storage(), so = r.storage()] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::size_t i = 0; i < so->grad.size(); ++i) sx->grad[i] += so->grad[i];
  });
  return r;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& indices) {
  if (x.rank() > 2) throw std::invalid_argument("gather_rows: rank must be 1 or 2");
  if (indices.empty()) throw std::invalid_argument("gather_rows: empty index list");
  const std::int64_t n = x.shape()[0];
  const std::int64_t width = x.rank() == 2 ? x.shape()[1] : 1;
  for (auto i : indices)
    if (i < 0 || i >= n) throw std::invalid_argument("gather_rows: index " + std::to_string(i) + " out of range");
  const std::int64_t k = static_cast<std::int64_t>(indices.size());
  std::vector<T> out(static_cast<std::size_t>(k * width));
  const auto xd = x.data();
  for (std::int64_t i = 0; i < k; ++i)
    std::copy_n(xd.data() + indices[static_cast<std::size_t>(i)] * width, width, out.data() + i * width);
  Shape shape = x.rank() == 2 ? Shape{k, width} : Shape{k};
  auto r = make_tensor<T>(std::move(shape), std::move(out), x.requires_grad());
  record<T>("gather_rows", r, [sx = x.storage(), so = r.storage(), indices, width] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::int64_t j = 0; j < width; ++j)
        sx->grad[static_cast<std::size_t>(indices[i] * width + j)] +=
            so->grad[i * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
  });
  return r;
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s) {
  if (x.rank() != 2 || s.rank() != 1 || s.shape()[0] != x.shape()[0])
    throw std::invalid_argument("scale_rows: need [N x C] and [N], got " + shape_str(x.shape()) +
                                " and " + shape_str(s.shape()));
  const std::int64_t n = x.shape()[0], c = x.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(n * c));
  const auto xd = x.data();
  const auto sd = s.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const T w = sd[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] = w * xd[static_cast<std::size_t>(i * c + j)];
  }
  auto r = make_tensor<T>(x.shape(), std::move(out), any_requires_grad<T>({&x, &s}));
  record<T>("scale_rows", r, [sx = x.storage(), ss = s.storage(), so = r.storage(), n, c] {
    if (sx->requires_grad) sx->ensure_grad();
    if (ss->requires_grad) ss->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      const T w = ss->data[static_cast<std::size_t>(i)];
      T acc = T(0);
      for (std::int64_t j = 0; j < c; ++j) {
        const T g = so->grad[static_cast<std::size_t>(i * c + j)];
        if (sx->requires_grad) sx->grad[static_cast<std::size_t>(i * c + j)] += g * w;
        acc += g * sx->data[static_cast<std::size_t>(i * c + j)];
      }
      if (ss->requires_grad) ss->grad[static_cast<std::size_t>(i)] += acc;
    }
  });
  return r;
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.rank() != 2 || v.rank() != 1 || v.shape()[0] != x.shape()[1])
    throw std::invalid_argument("mul_rowvec: need [N x C] and [C]");
  const std::int64_t n = x.shape()[0], c = x.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(n * c));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] =
          x.data()[static_cast<std::size_t>(i * c + j)] * v.data()[static_cast<std::size_t>(j)];
  auto r = make_tensor<T>(x.shape(), std::move(out), any_requires_grad<T>({&x, &v}));
  record<T>("mul_rowvec", r, [sx = x.storage(), sv = v.storage(), so = r.storage(), n, c] {
    if (sx->requires_grad) sx->ensure_grad();
    if (sv->requires_grad) sv->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        const T g = so->grad[static_cast<std::size_t>(i * c + j)];
        if (sx->requires_grad)
          sx->grad[static_cast<std::size_t>(i * c + j)] += g * sv->data[static_cast<std::size_t>(j)];
        if (sv->requires_grad)
          sv->grad[static_cast<std::size_t>(j)] += g * sx->data[static_cast<std::size_t>(i * c + j)];
      }
  });
  return r;
}

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.rank() != 2 || v.rank() != 1 || v.shape()[0] != x.shape()[1])
    throw std::invalid_argument("add_rowvec: need [N x C] and [C]");
  const std::int64_t n = x.shape()[0], c = x.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(n * c));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] =
          x.data()[static_cast<std::size_t>(i * c + j)] + v.data()[static_cast<std::size_t>(j)];
  auto r = make_tensor<T>(x.shape(), std::move(out), any_requires_grad<T>({&x, &v}));
  record<T>("add_rowvec", r, [sx = x.storage(), sv = v.storage(), so = r.storage(), n, c] {
    if (sx->requires_grad) sx->ensure_grad();
    if (sv->requires_grad) sv->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        const T g = so->grad[static_cast<std::size_t>(i * c + j)];
        if (sx->requires_grad) sx->grad[static_cast<std::size_t>(i * c + j)] += g;
        if (sv->requires_grad) sv->grad[static_cast<std::size_t>(j)] += g;
      }
  });
  return r;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::int64_t start, std::int64_t len) {
  if (x.rank() != 2) throw std::invalid_argument("slice_cols: rank-2 tensor required");
  const std::int64_t n = x.shape()[0], c = x.shape()[1];
  if (start < 0 || len < 1 || start + len > c)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") outside width " + std::to_string(c));
  std::vector<T> out(static_cast<std::size_t>(n * len));
  for (std::int64_t i = 0; i < n; ++i)
    std::copy_n(x.data().data() + i * c + start, len, out.data() + i * len);
  auto r = make_tensor<T>(Shape{n, len}, std::move(out), x.requires_grad());
  record<T>("slice_cols", r, [sx = x.storage(), so = r.storage(), n, c, start, len] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < len; ++j)
        sx->grad[static_cast<std::size_t>(i * c + start + j)] += so->grad[static_cast<std::size_t>(i * len + j)];
  });
  return r;
}

template <typename T>
Tensor<T> pad_cols(const Tensor<T>& x, std::int64_t left, std::int64_t right) {
  if (x.rank() != 2) throw std::invalid_argument("pad_cols: rank-2 tensor required");
  if (left < 0 || right < 0) throw std::invalid_argument("pad_cols: negative padding");
  const std::int64_t n = x.shape()[0], c = x.shape()[1];
  const std::int64_t cw = c + left + right;
  std::vector<T> out(static_cast<std::size_t>(n * cw), T(0));
  for (std::int64_t i = 0; i < n; ++i)
    std::copy_n(x.data().data() + i * c, c, out.data() + i * cw + left);
  auto r = make_tensor<T>(Shape{n, cw}, std::move(out), x.requires_grad());
  record<T>("pad_cols", r, [sx = x.storage(), so = r.storage(), n, c, cw, left] {
    if (!sx->requires_grad) return;
    sx->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        sx->grad[static_cast<std::size_t>(i * c + j)] += so->grad[static_cast<std::size_t>(i * cw + left + j)];
  });
  return r;
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::int64_t c = parts[0].shape()[1];
  std::int64_t rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.shape()[1] != c)
      throw std::invalid_argument("concat_rows: width mismatch");
    rows += p.shape()[0];
    rg = rg || p.requires_grad();
  }
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(rows * c));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  auto r = make_tensor<T>(Shape{rows, c}, std::move(out), rg);
  std::vector<StoragePtr<T>> storages;
  storages.reserve(parts.size());
  for (const auto& p : parts) storages.push_back(p.storage());
  record<T>("concat_rows", r, [storages = std::move(storages), so = r.storage()] {
    std::size_t offset = 0;
    for (const auto& st : storages) {
      const std::size_t len = st->data.size();
      if (st->requires_grad) {
        st->ensure_grad();
        for (std::size_t i = 0; i < len; ++i) st->grad[i] += so->grad[offset + i];
      }
      offset += len;
    }
  });
  return r;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define VHD_INSTANTIATE_OPS(T)                                                              \
  template class Tensor<T>;                                                                 \
  template class Graph<T>;                                                                  \
  template Tensor<T> make_tensor<T>(Shape, std::vector<T>, bool);                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scalar_mul(const Tensor<T>&, T);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                             \
  template Tensor<T> log(const Tensor<T>&);                                                 \
  template Tensor<T> exp(const Tensor<T>&);                                                 \
  template Tensor<T> abs(const Tensor<T>&);                                                 \
  template Tensor<T> reduce_sum(const Tensor<T>&);                                          \
  template Tensor<T> reduce_mean(const Tensor<T>&);                                         \
  template Tensor<T> reduce_sum(const Tensor<T>&, std::int64_t);                            \
  template Tensor<T> reduce_mean(const Tensor<T>&, std::int64_t);                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> transpose(const Tensor<T>&);                                           \
  template Tensor<T> softmax(const Tensor<T>&, std::int64_t);                               \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                            std::int64_t, Pad);                                             \
  template Tensor<T> transposed_conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                       std::int64_t);                                       \
  template Tensor<T> layer_norm(const Tensor<T>&, T);                                       \
  template Tensor<T> cosine_similarity(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> cosine_similarity_rows(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::int64_t>&);       \
  template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul_rowvec(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add_rowvec(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> slice_cols(const Tensor<T>&, std::int64_t, std::int64_t);              \
  template Tensor<T> pad_cols(const Tensor<T>&, std::int64_t, std::int64_t);                \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);

VHD_INSTANTIATE_OPS(float)
VHD_INSTANTIATE_OPS(double)

#undef VHD_INSTANTIATE_OPS

}  // namespace vhd
