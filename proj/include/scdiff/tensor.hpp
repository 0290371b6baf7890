#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "scdiff/common.hpp"
#include "scdiff/errors.hpp"

namespace scdiff {

namespace detail {

// One node of the implicit compute graph. Nodes are created in topological
// order (an op's inputs always exist before the op), so ascending id is a
// valid evaluation order and descending id a valid backward order.
struct TensorNode {
  uint64_t id = 0;
  const char* op = "leaf";
  Matrix value;
  Matrix grad;  // 0x0 until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backprop;
};

}  // namespace detail

/// Thread-local gradient recording switch. While disabled, ops compute
/// values only and the result does not link back to its inputs.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Shared handle to a value in the compute graph. Tensors are matrices
/// (row vectors for 1-D data, 1x1 for scalars), stored row-major in
/// 64-bit floats. Copying a Tensor aliases the same node.
///
/// A graph (everything reachable from a loss) is confined to one thread.
/// Tensors that do not require grad are immutable after construction and
/// safe for shared concurrent reads.
class Tensor {
 public:
  Tensor() = default;

  /// A value that never tracks gradients.
  static Tensor constant(Matrix v);
  /// A trainable leaf; backward() accumulates into its grad buffer.
  static Tensor parameter(Matrix v);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  /// Mutable access to a leaf's value (optimizer updates, finite
  /// differencing). Mutating a non-leaf between graph build and backward
  /// is undefined.
  Matrix& value_mut() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  /// Accumulated gradient, or zeros if backward never reached this node.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  double scalar() const;  // value of a 1x1 tensor

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend class ComputeGraph;
  friend Tensor wrap_node(std::shared_ptr<detail::TensorNode>);
};

/// The ordered slice of the graph reachable from one root, used to run
/// reverse-mode differentiation. `nodes()` is in creation (topological)
/// order; `leaves()` are the reachable parameters.
class ComputeGraph {
 public:
  static ComputeGraph reachable_from(const Tensor& root);

  const std::vector<std::shared_ptr<detail::TensorNode>>& nodes() const {
    return nodes_;
  }
  std::vector<Tensor> leaves() const;

  /// Seeds the (scalar) root with gradient 1 and sweeps the graph once in
  /// reverse topological order. Every reachable parameter ends up with
  /// its accumulated gradient.
  void backward();

 private:
  std::shared_ptr<detail::TensorNode> root_;
  std::vector<std::shared_ptr<detail::TensorNode>> nodes_;
};

/// backward(loss): reverse-mode sweep from a scalar loss.
void backward(const Tensor& loss);

// ---- differentiable ops -------------------------------------------------
// Elementwise binary ops accept equal shapes, or (r x d) against (1 x d in
// either slot), which repeats the single row r times. No other broadcast.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor gelu(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);
/// Normalizes each row to zero mean / unit variance (population variance,
/// epsilon 1e-12 inside the square root), then applies gain and bias
/// (each 1 x d, broadcast over rows).
Tensor layernorm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& bias);
/// Non-affine variant: normalize only, no gain/bias.
Tensor layernorm_lastdim(const Tensor& a);

Tensor sum(const Tensor& a);       // 1x1
Tensor mean_all(const Tensor& a);  // 1x1

Tensor reshape(const Tensor& a, Index rows, Index cols);  // row-major order
Tensor slice_cols(const Tensor& a, Index start, Index len);
Tensor slice_rows(const Tensor& a, Index start, Index len);
Tensor pad_cols(const Tensor& a, Index new_cols);  // zero-pad on the right
Tensor repeat_rows(const Tensor& a, Index n);      // (1 x d) -> (n x d)
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

/// Compares analytic gradients of f (a scalar-valued build of a fresh
/// graph over `params`) against central finite differences
/// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. Returns the maximum
/// relative error |analytic - numeric| / max(denom_floor, |a| + |n|).
double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double h = 1e-5,
                  double denom_floor = 1e-3);

}  // namespace scdiff
