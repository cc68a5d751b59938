#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vhd {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

/// Backing store of one tensor. Shared between the user-facing handle and
/// any graph nodes that saved it as an activation.
template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches this tensor
  bool requires_grad = false;

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

/// A shaped array of 32- or 64-bit floats with value-semantics handle and
/// shared contiguous row-major storage. Operations on tensors record nodes
/// on the thread's active Graph when any input requires gradients; without
/// an active graph the same calls run forward-only.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, T value, bool requires_grad = false);
  static Tensor uniform(Shape shape, T lo, T hi, std::uint64_t seed,
                        bool requires_grad = false);
  static Tensor gaussian(Shape shape, T mean, T stddev, std::uint64_t seed,
                         bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return st_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(st_->shape.size()); }
  std::int64_t numel() const { return st_->numel(); }

  std::span<T> data() { return {st_->data.data(), st_->data.size()}; }
  std::span<const T> data() const { return {st_->data.data(), st_->data.size()}; }

  bool has_grad() const { return st_ && !st_->grad.empty(); }
  /// Gradient buffer; throws if backward has not populated it.
  std::span<const T> grad() const;
  std::span<T> grad_mut();
  void zero_grad() { if (st_) st_->grad.assign(st_->data.size(), T(0)); }

  bool requires_grad() const { return st_ && st_->requires_grad; }
  void set_requires_grad(bool v) { st_->requires_grad = v; }

  /// Value of a single-element tensor.
  T item() const;
  T at(std::int64_t i) const { return st_->data[static_cast<std::size_t>(i)]; }
  T at(std::int64_t i, std::int64_t j) const {
    return st_->data[static_cast<std::size_t>(i * st_->shape[1] + j)];
  }

  /// Deep copy with no graph history.
  Tensor clone() const;

  const std::shared_ptr<detail::Storage<T>>& storage() const { return st_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Storage<T>> st) : st_(std::move(st)) {}
  std::shared_ptr<detail::Storage<T>> st_;

  template <typename U>
  friend Tensor<U> make_tensor(Shape, std::vector<U>, bool);
};

template <typename T>
Tensor<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad);

/// Recorded reverse-mode computation graph. Constructing a Graph makes it
/// the active graph for the current thread; only one may be active per
/// thread at a time. Nodes are appended in execution order and backward
/// replays them in exact reverse insertion order, so gradient accumulation
/// order is deterministic. backward() consumes the recorded nodes.
template <typename T>
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad leaf.
  /// loss must be a scalar. The node list is cleared afterwards.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }

  static Graph* current();

  /// Appends a node. Used by the op implementations; fn must capture the
  /// storages it needs and accumulate input gradients when invoked.
  void record(const char* op, std::shared_ptr<detail::Storage<T>> out,
              std::function<void()> fn);

 private:
  struct Node {
    const char* op;
    std::shared_ptr<detail::Storage<T>> out;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
};

enum class Pad {
  valid,  // no padding: L_out = floor((L - K) / stride) + 1
  same,   // zero padding so that L_out = ceil(L / stride)
};

// Elementwise. Binary ops accept equal shapes or a single-element tensor on
// either side (scalar broadcast, gradient sum-reduced onto the scalar).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scalar_mul(const Tensor<T>& a, T c);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
/// Natural log; throws std::domain_error on a non-positive entry.
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);

// Reductions. Mean divides the broadcast gradient by the reduced count.
template <typename T> Tensor<T> reduce_sum(const Tensor<T>& x);
template <typename T> Tensor<T> reduce_mean(const Tensor<T>& x);
template <typename T> Tensor<T> reduce_sum(const Tensor<T>& x, std::int64_t axis);
template <typename T> Tensor<T> reduce_mean(const Tensor<T>& x, std::int64_t axis);

/// [M x K] * [K x P] -> [M x P].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);

/// Stable softmax along `axis` of a rank-1 or rank-2 tensor; slices along
/// that axis sum to 1. Throws std::domain_error on non-finite input.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::int64_t axis);

/// x: [C_in x L], kernels: [C_out x C_in x K], bias: [C_out] or undefined.
/// Pad::same places extra padding on the right when the total is odd.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernels,
                 const Tensor<T>& bias, std::int64_t stride, Pad pad);

/// Adjoint of the stride-s valid convolution under a shared kernel tensor:
/// x: [C_in x L], kernels: [C_in x C_out x K] -> [C_out x (s*(L-1)+K)].
/// For all x, y with zero bias: <conv1d(x, k), y> == <x, transposed_conv1d(y, k)>.
template <typename T>
Tensor<T> transposed_conv1d(const Tensor<T>& x, const Tensor<T>& kernels,
                            const Tensor<T>& bias, std::int64_t stride);

/// Zero mean, unit variance along the last axis (rank 1 or per-row for rank
/// 2), with eps inside the square root. Affine scale/shift is applied by the
/// caller (see mul_rowvec / add_rowvec).
template <typename T> Tensor<T> layer_norm(const Tensor<T>& x, T eps);

/// Cosine similarity of two equal-length vectors -> scalar in [-1, 1].
/// A zero-norm side yields value 0 with zero gradient.
template <typename T> Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b);
/// Row-wise variant: [N x C], [N x C] -> [N].
template <typename T> Tensor<T> cosine_similarity_rows(const Tensor<T>& a, const Tensor<T>& b);

// Structural ops.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Select rows (rank 2) or elements (rank 1) by index; gradients scatter back.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& indices);
/// Row i of x scaled by s[i]: [N x C], [N] -> [N x C].
template <typename T> Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s);
/// Broadcast a length-C vector across the rows of [N x C].
template <typename T> Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v);
template <typename T> Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v);
/// Columns [start, start+len) of a rank-2 tensor.
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, std::int64_t start, std::int64_t len);
template <typename T> Tensor<T> pad_cols(const Tensor<T>& x, std::int64_t left, std::int64_t right);
/// Stack rank-2 tensors of equal width along the row axis.
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

using Value = Tensor<float>;

}  // namespace vhd
