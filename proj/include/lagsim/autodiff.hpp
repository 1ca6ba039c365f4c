#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace lagsim::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order; backward() walks them in reverse. Constants never receive
/// gradients, so nothing flows into frozen weights.
class Tape {
 public:
  Var constant(Matrix value);
  /// Leaf whose gradient is reported by grad().
  Var leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Gradient accumulated by backward(); zero if the node was unreachable.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 node and propagates.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using Backward = std::function<void(Tape&, const Matrix& upstream, const Matrix& out)>;
  Var push(Matrix value, bool needs_grad, Backward backward);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
/// a (m x n) + b (m x 1) added to every column.
Var add_col(Var a, Var b);
/// a (m x n) scaled row-wise by g (m x 1).
Var mul_col(Var a, Var g);
/// a (m x n) scaled column-wise by r (1 x n).
Var mul_row(Var r, Var a);
Var tanh(Var a);
/// Rows [r0, r0 + n).
Var rows(Var a, Eigen::Index r0, Eigen::Index n);
Var vstack(std::span<const Var> parts);
Var hstack(std::span<const Var> parts);
/// (K x n) matrix of -||x.col(j) - table.col(k)||^2.
Var neg_sq_dist(Var table, Var x);
/// 1 x n sums of each column.
Var col_sum(Var a);
/// Columns of `a` selected by `index` (repeats allowed).
Var gather_cols(Var a, std::vector<Eigen::Index> index);
/// Column-wise normalization to zero mean and unit variance (no affine).
Var layer_norm_cols(Var a, double eps);
/// Column-wise softmax.
Var softmax_cols(Var a);
/// Forward value `forward_value`, gradient passed to `a` unchanged.
Var straight_through(Var a, Matrix forward_value);
/// Sum over columns j of weight[j] * cross_entropy(softmax(scores.col(j)), target[j]).
Var cross_entropy_cols(Var scores, std::vector<Eigen::Index> target, Eigen::VectorXd weight);
/// Sum over columns j of weight[j] * ||a.col(j)||^2.
Var weighted_sq_norm_cols(Var a, Eigen::VectorXd weight);
/// Sum of all entries of a list of 1x1 nodes.
Var sum_scalars(std::span<const Var> parts);

}  // namespace lagsim::ad
