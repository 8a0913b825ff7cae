#pragma once

#include "oplab/diffcore/mathutil.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oplab::diffcore {

using Matrix = Eigen::MatrixXd;

// Raised when a loss or gradient turns non-finite; carries the name of the
// offending quantity so the run log can point at the failing update.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamStore;
class Graph;

// Lightweight handle to a node owned by a Graph. Valid for the graph's
// lifetime only.
class Var {
 public:
  Var() = default;
  int index() const { return idx_; }
  Graph* graph() const { return g_; }

 private:
  friend class Graph;
  Var(Graph* g, int idx) : g_(g), idx_(idx) {}
  Graph* g_ = nullptr;
  int idx_ = -1;
};

// Dynamic reverse-mode tape over dense double matrices. Nodes are created in
// evaluation order, which is by construction a topological order, so the
// backward sweep is a single reverse pass. Batch is carried in rows.
//
// Parameters enter through param(), which records a binding back to the
// owning ParamStore; backward() accumulates leaf gradients into the bound
// stores' grad slots.
class Graph {
 public:
  Var constant(Matrix value) { return push(std::move(value), {}, nullptr); }

  Var constant_scalar(double value) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  // Leaf bound to store.params[name]. Repeated calls with the same slot
  // return the same node so gradients never split across duplicate leaves.
  Var param(ParamStore& store, const std::string& name);

  const Matrix& value(Var v) const { return nodes_[v.idx_].val; }

  // Gradient of the last backward() target with respect to v (zeros if v is
  // not on the differentiated path).
  Matrix grad(Var v) const {
    const Node& n = nodes_[v.idx_];
    if (n.grad.size() == 0) return Matrix::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  // --- arithmetic ---

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    return push(value(a) + value(b), {a.idx_, b.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad);
                  g.accum(p[1], g.nodes_[out].grad);
                });
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    return push(value(a) - value(b), {a.idx_, b.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad);
                  g.accum(p[1], -g.nodes_[out].grad);
                });
  }

  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    return push(value(a).cwiseProduct(value(b)), {a.idx_, b.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0],
                          g.nodes_[out].grad.cwiseProduct(g.nodes_[p[1]].val));
                  g.accum(p[1],
                          g.nodes_[out].grad.cwiseProduct(g.nodes_[p[0]].val));
                });
  }

  Var neg(Var a) {
    return push(-value(a), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], -g.nodes_[out].grad);
                });
  }

  Var scale(Var a, double c) {
    return push(value(a) * c, {a.idx_},
                [c](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad * c);
                });
  }

  Var add_scalar(Var a, double c) {
    return push((value(a).array() + c).matrix(), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad);
                });
  }

  // Y = X * W  (X: m x k, W: k x n)
  Var matmul(Var x, Var w) {
    if (value(x).cols() != value(w).rows())
      throw DimensionError("matmul: inner dimensions differ");
    return push(value(x) * value(w), {x.idx_, w.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& dy = g.nodes_[out].grad;
                  g.accum(p[0], dy * g.nodes_[p[1]].val.transpose());
                  g.accum(p[1], g.nodes_[p[0]].val.transpose() * dy);
                });
  }

  // Y = X + 1*row  (row: 1 x n broadcast over rows of X)
  Var add_row(Var x, Var row) {
    if (value(row).rows() != 1 || value(row).cols() != value(x).cols())
      throw DimensionError("add_row: broadcast shape mismatch");
    return push(value(x).rowwise() + value(row).row(0), {x.idx_, row.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& dy = g.nodes_[out].grad;
                  g.accum(p[0], dy);
                  g.accum(p[1], dy.colwise().sum());
                });
  }

  // Fused y = X*W + 1*b, optionally with tanh/relu applied; one node per
  // layer keeps allocation traffic low on the training path. The activation
  // derivative is recovered from the stored output.
  enum class Fused { kNone, kTanh, kRelu };
  Var affine(Var x, Var w, Var b, Fused act) {
    Matrix y = value(x) * value(w);
    y.rowwise() += value(b).row(0);
    if (act == Fused::kTanh)
      y = fast_tanh(y);
    else if (act == Fused::kRelu)
      y = y.cwiseMax(0.0);
    return push(std::move(y), {x.idx_, w.idx_, b.idx_},
                [act](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& y = g.nodes_[out].val;
                  Matrix dz;
                  if (act == Fused::kTanh)
                    dz = g.nodes_[out].grad.cwiseProduct(
                        (1.0 - y.array().square()).matrix());
                  else if (act == Fused::kRelu)
                    dz = g.nodes_[out].grad.cwiseProduct(
                        (y.array() > 0.0).cast<double>().matrix());
                  else
                    dz = g.nodes_[out].grad;
                  g.accum(p[0], dz * g.nodes_[p[1]].val.transpose());
                  g.accum(p[1], g.nodes_[p[0]].val.transpose() * dz);
                  g.accum(p[2], dz.colwise().sum());
                });
  }

  // Replicates a 1 x n row to rows x n.
  Var broadcast_row(Var row, Eigen::Index rows) {
    if (value(row).rows() != 1)
      throw DimensionError("broadcast_row: expected a single row");
    return push(value(row).replicate(rows, 1), {row.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad.colwise().sum());
                });
  }

  // --- elementwise nonlinearities ---

  Var tanh(Var a) {
    return push(fast_tanh(value(a)), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& y = g.nodes_[out].val;
                  g.accum(p[0], g.nodes_[out].grad.cwiseProduct(
                                    (1.0 - y.array().square()).matrix()));
                });
  }

  Var relu(Var a) {
    return push(value(a).cwiseMax(0.0), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& x = g.nodes_[p[0]].val;
                  Matrix mask = (x.array() > 0.0).cast<double>().matrix();
                  g.accum(p[0], g.nodes_[out].grad.cwiseProduct(mask));
                });
  }

  Var exp(Var a) {
    return push(value(a).array().exp().matrix(), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0],
                          g.nodes_[out].grad.cwiseProduct(g.nodes_[out].val));
                });
  }

  Var log(Var a) {
    return push(value(a).array().log().matrix(), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], g.nodes_[out].grad.cwiseQuotient(
                                    g.nodes_[p[0]].val));
                });
  }

  Var square(Var a) {
    return push(value(a).array().square().matrix(), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  g.accum(p[0], 2.0 * g.nodes_[out].grad.cwiseProduct(
                                          g.nodes_[p[0]].val));
                });
  }

  // log(1 + e^x), evaluated in the overflow-free branch form.
  Var softplus(Var a) {
    Matrix y = value(a).unaryExpr([](double x) {
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    });
    return push(std::move(y), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  Matrix sig = g.nodes_[p[0]].val.unaryExpr(
                      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
                  g.accum(p[0], g.nodes_[out].grad.cwiseProduct(sig));
                });
  }

  // Gradient is passed only strictly inside the interval.
  Var clamp(Var a, double lo, double hi) {
    return push(value(a).cwiseMax(lo).cwiseMin(hi), {a.idx_},
                [lo, hi](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& x = g.nodes_[p[0]].val;
                  Matrix mask =
                      ((x.array() > lo) && (x.array() < hi)).cast<double>().matrix();
                  g.accum(p[0], g.nodes_[out].grad.cwiseProduct(mask));
                });
  }

  // Elementwise minimum; ties route the gradient to a.
  Var cwise_min(Var a, Var b) {
    check_same_shape(a, b, "cwise_min");
    return push(value(a).cwiseMin(value(b)), {a.idx_, b.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& av = g.nodes_[p[0]].val;
                  const Matrix& bv = g.nodes_[p[1]].val;
                  Matrix take_a = (av.array() <= bv.array()).cast<double>().matrix();
                  const Matrix& dy = g.nodes_[out].grad;
                  g.accum(p[0], dy.cwiseProduct(take_a));
                  g.accum(p[1], dy.cwiseProduct((1.0 - take_a.array()).matrix()));
                });
  }

  // --- reductions / shape ---

  Var sum(Var a) {
    Matrix s(1, 1);
    s(0, 0) = value(a).sum();
    return push(std::move(s), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Node& src = g.nodes_[p[0]];
                  g.accum(p[0], Matrix::Constant(src.val.rows(), src.val.cols(),
                                                 g.nodes_[out].grad(0, 0)));
                });
  }

  Var mean(Var a) {
    Matrix s(1, 1);
    s(0, 0) = value(a).mean();
    return push(std::move(s), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Node& src = g.nodes_[p[0]];
                  const double w =
                      g.nodes_[out].grad(0, 0) / static_cast<double>(src.val.size());
                  g.accum(p[0], Matrix::Constant(src.val.rows(), src.val.cols(), w));
                });
  }

  // Row-wise sum: (B x n) -> (B x 1).
  Var row_sum(Var a) {
    return push(value(a).rowwise().sum(), {a.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Node& src = g.nodes_[p[0]];
                  g.accum(p[0], g.nodes_[out].grad.replicate(1, src.val.cols()));
                });
  }

  Var concat_cols(Var a, Var b) {
    if (value(a).rows() != value(b).rows())
      throw DimensionError("concat_cols: row counts differ");
    Matrix y(value(a).rows(), value(a).cols() + value(b).cols());
    y << value(a), value(b);
    return push(std::move(y), {a.idx_, b.idx_},
                [](Graph& g, int out, const std::vector<int>& p) {
                  const Matrix& dy = g.nodes_[out].grad;
                  const Eigen::Index ca = g.nodes_[p[0]].val.cols();
                  const Eigen::Index cb = g.nodes_[p[1]].val.cols();
                  g.accum(p[0], dy.leftCols(ca));
                  g.accum(p[1], dy.rightCols(cb));
                });
  }

  Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
    return push(value(a).middleCols(first, count), {a.idx_},
                [first, count](Graph& g, int out, const std::vector<int>& p) {
                  const Node& src = g.nodes_[p[0]];
                  Matrix d = Matrix::Zero(src.val.rows(), src.val.cols());
                  d.middleCols(first, count) = g.nodes_[out].grad;
                  g.accum(p[0], d);
                });
  }

  // Value copy with the gradient path severed.
  Var detach(Var a) { return constant(value(a)); }

  // --- backward ---

  // Reverse sweep from a scalar loss. Leaf gradients are accumulated into
  // every bound ParamStore's grad slots. Throws NumericError when the loss
  // value is not finite.
  void backward(Var loss, const std::string& loss_name = "loss");

 private:
  using BackwardFn = std::function<void(Graph&, int, const std::vector<int>&)>;

  struct Node {
    Matrix val;
    Matrix grad;  // empty until touched by the backward sweep
    std::vector<int> parents;
    BackwardFn back;
  };

  template <typename M>
  Var push(M&& value, std::vector<int> parents, BackwardFn back) {
    if (nodes_.empty()) nodes_.reserve(64);
    Node n;
    n.val = std::forward<M>(value);
    n.parents = std::move(parents);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  void accum(int idx, const Matrix& g) {
    Node& n = nodes_[idx];
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void accum(int idx, Matrix&& g) {
    Node& n = nodes_[idx];
    if (n.grad.size() == 0)
      n.grad = std::move(g);
    else
      n.grad += g;
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
      throw DimensionError(std::string(op) + ": shape mismatch");
  }

  std::vector<Node> nodes_;
  // (store, param name, node index); filled by param().
  std::vector<std::tuple<ParamStore*, std::string, int>> bindings_;
  std::map<std::pair<const ParamStore*, std::string>, int> param_cache_;
};

}  // namespace oplab::diffcore
