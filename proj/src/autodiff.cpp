#include "lagsim/autodiff.hpp"

#include <cmath>

#include "lagsim/error.hpp"

namespace lagsim::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionMismatch(what);
}

bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.tape->needs_grad(v)) return true;
  return false;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, false, needs_grad ? std::move(backward) : Backward{}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::leaf(Matrix value) { return push(std::move(value), true, {}); }

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.has_grad ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(Var out) {
  require(value(out).size() == 1, "backward() needs a scalar output");
  for (auto& n : nodes_) n.has_grad = false;
  accumulate(out, Matrix::Ones(1, 1));
  for (auto i = static_cast<std::ptrdiff_t>(out.id); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.has_grad && n.backward) n.backward(*this, n.grad, n.value);
  }
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  return a.tape->push(a.value() * b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  return a.tape->push(a.value() + b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape mismatch");
  return a.tape->push(a.value() - b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, -g);
  });
}

Var cmul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cmul shape mismatch");
  return a.tape->push(a.value().cwiseProduct(b.value()), any_grad({a, b}),
                      [a, b](Tape& t, const Matrix& g, const Matrix&) {
                        if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                        if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                      });
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, any_grad({a}),
                      [a, s](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g * s); });
}

Var add_col(Var a, Var b) {
  require(b.cols() == 1 && a.rows() == b.rows(), "add_col shape mismatch");
  Matrix v = a.value().colwise() + b.value().col(0);
  return a.tape->push(std::move(v), any_grad({a, b}), [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, g.rowwise().sum());
  });
}

Var mul_col(Var a, Var gvec) {
  require(gvec.cols() == 1 && a.rows() == gvec.rows(), "mul_col shape mismatch");
  Matrix v = gvec.value().col(0).asDiagonal() * a.value();
  return a.tape->push(std::move(v), any_grad({a, gvec}), [a, gvec](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.accumulate(a, gvec.value().col(0).asDiagonal() * g);
    if (t.needs_grad(gvec)) t.accumulate(gvec, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var mul_row(Var r, Var a) {
  require(r.rows() == 1 && r.cols() == a.cols(), "mul_row shape mismatch");
  Matrix v = a.value() * r.value().row(0).asDiagonal();
  return a.tape->push(std::move(v), any_grad({r, a}), [r, a](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.accumulate(a, g * r.value().row(0).asDiagonal());
    if (t.needs_grad(r)) t.accumulate(r, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var tanh(Var a) {
  return a.tape->push(a.value().array().tanh().matrix(), any_grad({a}),
                      [a](Tape& t, const Matrix& g, const Matrix& out) {
                        t.accumulate(a, g.cwiseProduct((1.0 - out.array().square()).matrix()));
                      });
}

Var rows(Var a, Eigen::Index r0, Eigen::Index n) {
  require(r0 >= 0 && n >= 0 && r0 + n <= a.rows(), "rows out of range");
  return a.tape->push(a.value().middleRows(r0, n), any_grad({a}),
                      [a, r0, n](Tape& t, const Matrix& g, const Matrix&) {
                        Matrix full = Matrix::Zero(a.rows(), a.cols());
                        full.middleRows(r0, n) = g;
                        t.accumulate(a, full);
                      });
}

Var vstack(std::span<const Var> parts) {
  require(!parts.empty(), "vstack of nothing");
  Eigen::Index total = 0;
  bool grad = false;
  for (Var p : parts) {
    require(p.cols() == parts[0].cols(), "vstack column mismatch");
    total += p.rows();
    grad = grad || p.tape->needs_grad(p);
  }
  Matrix v(total, parts[0].cols());
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(v), grad, [keep](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index r = 0;
    for (Var p : keep) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var hstack(std::span<const Var> parts) {
  require(!parts.empty(), "hstack of nothing");
  Eigen::Index total = 0;
  bool grad = false;
  for (Var p : parts) {
    require(p.rows() == parts[0].rows(), "hstack row mismatch");
    total += p.cols();
    grad = grad || p.tape->needs_grad(p);
  }
  Matrix v(parts[0].rows(), total);
  Eigen::Index c = 0;
  for (Var p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(v), grad, [keep](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index c = 0;
    for (Var p : keep) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var neg_sq_dist(Var table, Var x) {
  require(table.rows() == x.rows(), "neg_sq_dist dimension mismatch");
  const Matrix& e = table.value();
  const Matrix& v = x.value();
  Matrix out = 2.0 * e.transpose() * v;
  out.colwise() -= e.colwise().squaredNorm().transpose();
  out.rowwise() -= v.colwise().squaredNorm();
  return table.tape->push(std::move(out), any_grad({table, x}), [table, x](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& e = table.value();
    const Matrix& v = x.value();
    // d/dx_j = sum_k g_kj * -2 (x_j - e_k); d/de_k = sum_j g_kj * 2 (x_j - e_k)
    if (t.needs_grad(x)) {
      Eigen::RowVectorXd gsum = g.colwise().sum();
      t.accumulate(x, 2.0 * (e * g) - 2.0 * (v * gsum.asDiagonal()));
    }
    if (t.needs_grad(table)) {
      Eigen::VectorXd gsum = g.rowwise().sum();
      t.accumulate(table, 2.0 * (v * g.transpose()) - 2.0 * (e * gsum.asDiagonal()));
    }
  });
}

Var col_sum(Var a) {
  return a.tape->push(a.value().colwise().sum(), any_grad({a}), [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, Matrix::Ones(a.rows(), 1) * g);
  });
}

Var gather_cols(Var a, std::vector<Eigen::Index> index) {
  Matrix v(a.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) {
    require(index[j] >= 0 && index[j] < a.cols(), "gather index out of range");
    v.col(static_cast<Eigen::Index>(j)) = a.value().col(index[j]);
  }
  return a.tape->push(std::move(v), any_grad({a}),
                      [a, index = std::move(index)](Tape& t, const Matrix& g, const Matrix&) {
                        Matrix full = Matrix::Zero(a.rows(), a.cols());
                        for (std::size_t j = 0; j < index.size(); ++j)
                          full.col(index[j]) += g.col(static_cast<Eigen::Index>(j));
                        t.accumulate(a, full);
                      });
}

Var layer_norm_cols(Var a, double eps) {
  const Matrix& x = a.value();
  const auto m = static_cast<double>(x.rows());
  Eigen::RowVectorXd inv_std(x.cols());
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd c = x.col(j).array() - x.col(j).mean();
    inv_std[j] = 1.0 / std::sqrt(c.squaredNorm() / m + eps);
    y.col(j) = c * inv_std[j];
  }
  return a.tape->push(std::move(y), any_grad({a}), [a, inv_std, m](Tape& t, const Matrix& g, const Matrix& out) {
    Matrix dx(out.rows(), out.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double g_mean = g.col(j).mean();
      const double gy_mean = g.col(j).dot(out.col(j)) / m;
      dx.col(j) = inv_std[j] * (g.col(j).array() - g_mean - out.col(j).array() * gy_mean).matrix();
    }
    t.accumulate(a, dx);
  });
}

Var softmax_cols(Var a) {
  Matrix y = a.value();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    y.col(j) = (y.col(j).array() - y.col(j).maxCoeff()).exp().matrix();
    y.col(j) /= y.col(j).sum();
  }
  return a.tape->push(std::move(y), any_grad({a}), [a](Tape& t, const Matrix& g, const Matrix& out) {
    Matrix dx(out.rows(), out.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      dx.col(j) = out.col(j).cwiseProduct((g.col(j).array() - g.col(j).dot(out.col(j))).matrix());
    t.accumulate(a, dx);
  });
}

Var straight_through(Var a, Matrix forward_value) {
  require(forward_value.rows() == a.rows() && forward_value.cols() == a.cols(), "straight_through shape mismatch");
  return a.tape->push(std::move(forward_value), any_grad({a}),
                      [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g); });
}

Var cross_entropy_cols(Var scores, std::vector<Eigen::Index> target, Eigen::VectorXd weight) {
  const Matrix& s = scores.value();
  require(static_cast<Eigen::Index>(target.size()) == s.cols() && weight.size() == s.cols(),
          "cross_entropy target/weight size mismatch");
  Matrix prob(s.rows(), s.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    require(target[static_cast<std::size_t>(j)] >= 0 && target[static_cast<std::size_t>(j)] < s.rows(),
            "cross_entropy target out of range");
    const double mx = s.col(j).maxCoeff();
    Eigen::VectorXd e = (s.col(j).array() - mx).exp();
    const double z = e.sum();
    prob.col(j) = e / z;
    if (weight[j] != 0.0) loss += weight[j] * (mx + std::log(z) - s(target[static_cast<std::size_t>(j)], j));
  }
  Matrix v(1, 1);
  v(0, 0) = loss;
  return scores.tape->push(std::move(v), any_grad({scores}),
                           [scores, prob = std::move(prob), target = std::move(target),
                            weight = std::move(weight)](Tape& t, const Matrix& g, const Matrix&) {
                             Matrix d = prob;
                             for (Eigen::Index j = 0; j < d.cols(); ++j) {
                               d(target[static_cast<std::size_t>(j)], j) -= 1.0;
                               d.col(j) *= weight[j] * g(0, 0);
                             }
                             t.accumulate(scores, d);
                           });
}

Var weighted_sq_norm_cols(Var a, Eigen::VectorXd weight) {
  require(weight.size() == a.cols(), "weight size mismatch");
  Matrix v(1, 1);
  v(0, 0) = (a.value().colwise().squaredNorm().transpose().array() * weight.array()).sum();
  return a.tape->push(std::move(v), any_grad({a}),
                      [a, weight = std::move(weight)](Tape& t, const Matrix& g, const Matrix&) {
                        t.accumulate(a, 2.0 * g(0, 0) * (a.value() * weight.asDiagonal()));
                      });
}

Var sum_scalars(std::span<const Var> parts) {
  require(!parts.empty(), "sum of nothing");
  double total = 0.0;
  bool grad = false;
  for (Var p : parts) {
    require(p.value().size() == 1, "sum_scalars needs 1x1 nodes");
    total += p.value()(0, 0);
    grad = grad || p.tape->needs_grad(p);
  }
  Matrix v(1, 1);
  v(0, 0) = total;
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(v), grad, [keep](Tape& t, const Matrix& g, const Matrix&) {
    for (Var p : keep) t.accumulate(p, g);
  });
}

}  // namespace lagsim::ad
