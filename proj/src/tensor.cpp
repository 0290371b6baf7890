#include "scdiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace scdiff {

using detail::TensorNode;

namespace {

using ArrayXXdR =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::atomic<uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

constexpr double kLayernormEps = 1e-12;
const double kGeluC0 = std::sqrt(2.0 / M_PI);
constexpr double kGeluC1 = 0.044715;

void check_finite(const char* op, const Matrix& v) {
  if (!v.allFinite())
    throw NonFinite(std::string(op) + " produced a non-finite value");
}

void accum(TensorNode& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor wrap_node(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

NodePtr leaf_node(Matrix v, bool requires_grad, const char* op) {
  check_finite(op, v);
  auto n = std::make_shared<TensorNode>();
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->op = op;
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

Tensor make_op(const char* op, Matrix value, std::vector<NodePtr> inputs,
               std::function<void(TensorNode&)> backprop) {
  check_finite(op, value);
  auto n = std::make_shared<TensorNode>();
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->op = op;
  n->value = std::move(value);
  const bool track =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const NodePtr& p) { return p->requires_grad; });
  if (track) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
  }
  return wrap_node(std::move(n));
}

// Which side of a binary elementwise op, if any, is a single row repeated
// over the other's leading dimension.
enum class Bcast { kNone, kLeft, kRight };

Bcast bcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::kNone;
  if (a.cols() == b.cols()) {
    if (a.rows() == 1) return Bcast::kLeft;
    if (b.rows() == 1) return Bcast::kRight;
  }
  throw ShapeMismatch(std::string(op) + ": incompatible shapes (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
}

Matrix reduce_rows(const Matrix& g) { return g.colwise().sum(); }

}  // namespace

Tensor Tensor::constant(Matrix v) { return wrap_node(leaf_node(std::move(v), false, "constant")); }
Tensor Tensor::parameter(Matrix v) { return wrap_node(leaf_node(std::move(v), true, "parameter")); }

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

double Tensor::scalar() const {
  if (size() != 1) throw ShapeMismatch("scalar(): tensor is not 1x1");
  return node_->value(0, 0);
}

ComputeGraph ComputeGraph::reachable_from(const Tensor& root) {
  ComputeGraph g;
  g.root_ = root.node();
  std::unordered_set<const TensorNode*> seen;
  std::vector<NodePtr> stack{g.root_};
  seen.insert(g.root_.get());
  while (!stack.empty()) {
    NodePtr n = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : n->inputs) {
      if (seen.insert(in.get()).second) stack.push_back(in);
    }
    g.nodes_.push_back(std::move(n));
  }
  std::sort(g.nodes_.begin(), g.nodes_.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->id < b->id; });
  return g;
}

std::vector<Tensor> ComputeGraph::leaves() const {
  std::vector<Tensor> out;
  for (const auto& n : nodes_)
    if (n->requires_grad && !n->backprop) out.push_back(wrap_node(n));
  return out;
}

void ComputeGraph::backward() {
  if (root_->value.size() != 1)
    throw ShapeMismatch("backward: loss must be a 1x1 scalar");
  if (root_->grad.size() == 0) root_->grad = Matrix::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorNode& n = **it;
    if (!n.backprop || n.grad.size() == 0) continue;
    for (const auto& in : n.inputs) {
      // A cycle is impossible by construction: inputs predate their op.
      assert(in->id < n.id);
      (void)in;
    }
    n.backprop(n);
  }
}

void backward(const Tensor& loss) {
  ComputeGraph::reachable_from(loss).backward();
}

// ---- ops ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: inner dimensions disagree (" +
                        std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + ")");
  NodePtr na = a.node(), nb = b.node();
  Matrix v = na->value * nb->value;
  return make_op("matmul", std::move(v), {na, nb}, [na, nb](TensorNode& self) {
    accum(*na, self.grad * nb->value.transpose());
    accum(*nb, na->value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  NodePtr na = a.node();
  return make_op("transpose", na->value.transpose(), {na},
                 [na](TensorNode& self) { accum(*na, self.grad.transpose()); });
}

namespace {

template <typename Combine, typename BackLeft, typename BackRight>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b,
                          Combine combine, BackLeft back_left,
                          BackRight back_right) {
  NodePtr na = a.node(), nb = b.node();
  const Bcast k = bcast_kind(op, na->value, nb->value);
  Matrix av = (k == Bcast::kLeft)
                  ? Matrix(na->value.replicate(nb->value.rows(), 1))
                  : na->value;
  Matrix bv = (k == Bcast::kRight)
                  ? Matrix(nb->value.replicate(na->value.rows(), 1))
                  : nb->value;
  Matrix v = combine(av, bv);
  return make_op(op, std::move(v), {na, nb},
                 [na, nb, k, back_left, back_right](TensorNode& self) {
                   Matrix ga = back_left(self.grad);
                   Matrix gb = back_right(self.grad);
                   accum(*na, k == Bcast::kLeft ? reduce_rows(ga) : ga);
                   accum(*nb, k == Bcast::kRight ? reduce_rows(gb) : gb);
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g) { return g; }, [](const Matrix& g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g) { return g; },
      [](const Matrix& g) -> Matrix { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  NodePtr na = a.node(), nb = b.node();
  const Bcast k = bcast_kind("mul", na->value, nb->value);
  Matrix av = (k == Bcast::kLeft)
                  ? Matrix(na->value.replicate(nb->value.rows(), 1))
                  : na->value;
  Matrix bv = (k == Bcast::kRight)
                  ? Matrix(nb->value.replicate(na->value.rows(), 1))
                  : nb->value;
  Matrix v = av.cwiseProduct(bv);
  return make_op("mul", std::move(v), {na, nb},
                 [na, nb, k, av, bv](TensorNode& self) {
                   Matrix ga = self.grad.cwiseProduct(bv);
                   Matrix gb = self.grad.cwiseProduct(av);
                   accum(*na, k == Bcast::kLeft ? reduce_rows(ga) : ga);
                   accum(*nb, k == Bcast::kRight ? reduce_rows(gb) : gb);
                 });
}

Tensor scale(const Tensor& a, double c) {
  NodePtr na = a.node();
  return make_op("scale", na->value * c, {na}, [na, c](TensorNode& self) {
    accum(*na, self.grad * c);
  });
}

Tensor gelu(const Tensor& a) {
  NodePtr na = a.node();
  const ArrayXXdR x = na->value.array();
  const ArrayXXdR th = (kGeluC0 * (x + kGeluC1 * x.cube())).tanh();
  Matrix v = (0.5 * x * (1.0 + th)).matrix();
  return make_op("gelu", std::move(v), {na}, [na, th](TensorNode& self) {
    const ArrayXXdR x = na->value.array();
    const ArrayXXdR dgelu =
        0.5 * (1.0 + th) +
        0.5 * x * (1.0 - th.square()) * kGeluC0 * (1.0 + 3.0 * kGeluC1 * x.square());
    accum(*na, (self.grad.array() * dgelu).matrix());
  });
}

Tensor softmax_lastdim(const Tensor& a) {
  NodePtr na = a.node();
  Matrix y = na->value;
  for (Index r = 0; r < y.rows(); ++r) {
    y.row(r).array() -= y.row(r).maxCoeff();
    y.row(r) = y.row(r).array().exp();
    y.row(r) /= y.row(r).sum();
  }
  return make_op("softmax_lastdim", y, {na}, [na, y](TensorNode& self) {
    Matrix gy = self.grad.cwiseProduct(y);
    Vector dot = gy.rowwise().sum();
    Matrix dx = gy - (y.array().colwise() * dot.array()).matrix();
    accum(*na, dx);
  });
}

Tensor layernorm_lastdim(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  NodePtr na = a.node(), ng = gain.node(), nb = bias.node();
  const Index d = na->value.cols();
  if (ng->value.rows() != 1 || ng->value.cols() != d || nb->value.rows() != 1 ||
      nb->value.cols() != d)
    throw ShapeMismatch("layernorm_lastdim: gain/bias must be 1 x cols(input)");

  Vector mu = na->value.rowwise().mean();
  Matrix xc = na->value;
  xc.array().colwise() -= mu.array();
  Vector sd = (xc.array().square().rowwise().mean() + kLayernormEps).sqrt().matrix();
  Matrix y = xc;
  y.array().colwise() /= sd.array();
  const Index r = na->value.rows();
  Matrix v = y.cwiseProduct(ng->value.replicate(r, 1)) + nb->value.replicate(r, 1);
  return make_op("layernorm_lastdim", std::move(v), {na, ng, nb},
                 [na, ng, nb, y, sd](TensorNode& self) {
                   const Index rows = y.rows();
                   Matrix gy = self.grad.cwiseProduct(ng->value.replicate(rows, 1));
                   Vector mg = gy.rowwise().mean();
                   Vector mgy = gy.cwiseProduct(y).rowwise().mean();
                   Matrix dx = gy;
                   dx.array().colwise() -= mg.array();
                   dx -= (y.array().colwise() * mgy.array()).matrix();
                   dx.array().colwise() /= sd.array();
                   accum(*na, dx);
                   accum(*ng, self.grad.cwiseProduct(y).colwise().sum());
                   accum(*nb, self.grad.colwise().sum());
                 });
}

Tensor layernorm_lastdim(const Tensor& a) {
  NodePtr na = a.node();
  Vector mu = na->value.rowwise().mean();
  Matrix xc = na->value;
  xc.array().colwise() -= mu.array();
  Vector sd = (xc.array().square().rowwise().mean() + kLayernormEps).sqrt().matrix();
  Matrix y = xc;
  y.array().colwise() /= sd.array();
  return make_op("layernorm_lastdim", y, {na}, [na, y, sd](TensorNode& self) {
    Matrix gy = self.grad;
    Vector mg = gy.rowwise().mean();
    Vector mgy = gy.cwiseProduct(y).rowwise().mean();
    Matrix dx = gy;
    dx.array().colwise() -= mg.array();
    dx -= (y.array().colwise() * mgy.array()).matrix();
    dx.array().colwise() /= sd.array();
    accum(*na, dx);
  });
}

Tensor sum(const Tensor& a) {
  NodePtr na = a.node();
  Matrix v(1, 1);
  v(0, 0) = na->value.sum();
  return make_op("sum", std::move(v), {na}, [na](TensorNode& self) {
    accum(*na, Matrix::Constant(na->value.rows(), na->value.cols(), self.grad(0, 0)));
  });
}

Tensor mean_all(const Tensor& a) {
  NodePtr na = a.node();
  const double inv = 1.0 / static_cast<double>(na->value.size());
  Matrix v(1, 1);
  v(0, 0) = na->value.sum() * inv;
  return make_op("mean_all", std::move(v), {na}, [na, inv](TensorNode& self) {
    accum(*na, Matrix::Constant(na->value.rows(), na->value.cols(),
                                self.grad(0, 0) * inv));
  });
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  NodePtr na = a.node();
  if (rows * cols != na->value.size())
    throw ShapeMismatch("reshape: element count must be preserved");
  Matrix v = Eigen::Map<const Matrix>(na->value.data(), rows, cols);
  return make_op("reshape", std::move(v), {na}, [na](TensorNode& self) {
    accum(*na, Eigen::Map<const Matrix>(self.grad.data(), na->value.rows(),
                                        na->value.cols()));
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index len) {
  NodePtr na = a.node();
  if (start < 0 || len < 0 || start + len > na->value.cols())
    throw ShapeMismatch("slice_cols: range out of bounds");
  Matrix v = na->value.middleCols(start, len);
  return make_op("slice_cols", std::move(v), {na}, [na, start, len](TensorNode& self) {
    Matrix g = Matrix::Zero(na->value.rows(), na->value.cols());
    g.middleCols(start, len) = self.grad;
    accum(*na, g);
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index len) {
  NodePtr na = a.node();
  if (start < 0 || len < 0 || start + len > na->value.rows())
    throw ShapeMismatch("slice_rows: range out of bounds");
  Matrix v = na->value.middleRows(start, len);
  return make_op("slice_rows", std::move(v), {na}, [na, start, len](TensorNode& self) {
    Matrix g = Matrix::Zero(na->value.rows(), na->value.cols());
    g.middleRows(start, len) = self.grad;
    accum(*na, g);
  });
}

Tensor pad_cols(const Tensor& a, Index new_cols) {
  NodePtr na = a.node();
  const Index old_cols = na->value.cols();
  if (new_cols < old_cols)
    throw ShapeMismatch("pad_cols: new width smaller than input");
  Matrix v = Matrix::Zero(na->value.rows(), new_cols);
  v.leftCols(old_cols) = na->value;
  return make_op("pad_cols", std::move(v), {na}, [na, old_cols](TensorNode& self) {
    accum(*na, self.grad.leftCols(old_cols));
  });
}

Tensor repeat_rows(const Tensor& a, Index n) {
  NodePtr na = a.node();
  if (na->value.rows() != 1)
    throw ShapeMismatch("repeat_rows: input must have exactly one row");
  Matrix v = na->value.replicate(n, 1);
  return make_op("repeat_rows", std::move(v), {na}, [na](TensorNode& self) {
    accum(*na, reduce_rows(self.grad));
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  std::vector<NodePtr> ins;
  ins.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeMismatch("concat_rows: column counts differ");
    rows += p.rows();
    ins.push_back(p.node());
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (const auto& n : ins) {
    v.middleRows(at, n->value.rows()) = n->value;
    at += n->value.rows();
  }
  return make_op("concat_rows", std::move(v), ins, [ins](TensorNode& self) {
    Index at = 0;
    for (const auto& n : ins) {
      accum(*n, self.grad.middleRows(at, n->value.rows()));
      at += n->value.rows();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<NodePtr> ins;
  ins.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeMismatch("concat_cols: row counts differ");
    cols += p.cols();
    ins.push_back(p.node());
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (const auto& n : ins) {
    v.middleCols(at, n->value.cols()) = n->value;
    at += n->value.cols();
  }
  return make_op("concat_cols", std::move(v), ins, [ins](TensorNode& self) {
    Index at = 0;
    for (const auto& n : ins) {
      accum(*n, self.grad.middleCols(at, n->value.cols()));
      at += n->value.cols();
    }
  });
}

double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double h,
                  double denom_floor) {
  if (h <= 0) throw InvalidRange("grad_check: step must be positive");

  std::vector<Matrix> analytic;
  {
    for (auto p : params) p.zero_grad();
    Tensor loss = f();
    backward(loss);
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.grad());
  }

  double max_rel = 0.0;
  NoGradGuard no_grad;
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    Matrix& v = p.value_mut();
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        const double orig = v(i, j);
        v(i, j) = orig + h;
        const double fp = f().scalar();
        v(i, j) = orig - h;
        const double fm = f().scalar();
        v(i, j) = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[k](i, j);
        const double rel =
            std::abs(a - numeric) /
            std::max(denom_floor, std::abs(a) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace scdiff
