#pragma once

#include "truthsr/common.hpp"
#include "truthsr/special.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace truthsr {

/// Handle into a Tape. Vars are only meaningful for the tape that made them.
struct Var {
  int id = -1;
};

/// Reverse-mode automatic differentiation over dense matrices. Nodes are
/// created in topological order, so the backward sweep is a reverse walk over
/// the node list. Leaf nodes accumulate into caller-owned gradient buffers.
///
/// One tape per forward pass; build, call backward() once, discard.
template <typename T>
class Tape {
 public:
  using M = Mat<T>;

  struct Node {
    M value;
    M grad;  // empty until first accumulation
    std::function<void(Tape&, int)> backward;
  };

  const M& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const M& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  T scalar(Var v) const {
    const M& m = value(v);
    check_dims(m.size() == 1, "tape: scalar() on non-scalar node");
    return m(0, 0);
  }
  std::size_t size() const { return nodes_.size(); }

  /// Runs the reverse sweep from a scalar root.
  void backward(Var root) {
    Node& r = node(root.id);
    check_dims(r.value.size() == 1, "tape: backward root must be scalar");
    r.grad = M::Ones(1, 1);
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = node(id);
      if (n.backward && n.grad.size() > 0) n.backward(*this, id);
    }
  }

  // ---- graph construction ----

  Var constant(M v) { return push(std::move(v), nullptr); }

  /// Leaf bound to an external gradient accumulator of the same shape.
  /// The buffer may be a Mat<T> or a Vec<T> (for bias parameters).
  template <typename Buf>
  Var leaf(const Buf& v, Buf* grad_out) {
    return push(M(v), [grad_out](Tape& t, int self) {
      const M& g = t.node(self).grad;
      check_dims(grad_out->rows() == g.rows() && grad_out->cols() == g.cols(),
                 "tape: leaf gradient buffer shape mismatch");
      *grad_out += g;
    });
  }

  Var matmul(Var a, Var b) {
    check_dims(value(a).cols() == value(b).rows(), "tape: matmul shape mismatch");
    M out = value(a) * value(b);
    return push(std::move(out), [a, b](Tape& t, int self) {
      const M& g = t.node(self).grad;
      t.accum(a, g * t.value(b).transpose());
      t.accum(b, t.value(a).transpose() * g);
    });
  }

  Var add(Var a, Var b) {
    check_dims(same_shape(a, b), "tape: add shape mismatch");
    return push(value(a) + value(b), [a, b](Tape& t, int self) {
      const M& g = t.node(self).grad;
      t.accum(a, g);
      t.accum(b, g);
    });
  }

  Var sub(Var a, Var b) {
    check_dims(same_shape(a, b), "tape: sub shape mismatch");
    return push(value(a) - value(b), [a, b](Tape& t, int self) {
      const M& g = t.node(self).grad;
      t.accum(a, g);
      t.accum(b, -g);
    });
  }

  Var cmul(Var a, Var b) {
    check_dims(same_shape(a, b), "tape: cmul shape mismatch");
    return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, int self) {
      const M& g = t.node(self).grad;
      t.accum(a, g.cwiseProduct(t.value(b)));
      t.accum(b, g.cwiseProduct(t.value(a)));
    });
  }

  Var scale(Var a, T s) {
    return push(value(a) * s, [a, s](Tape& t, int self) {
      t.accum(a, t.node(self).grad * s);
    });
  }

  Var add_const(Var a, T s) {
    return push(M(value(a).array() + s), [a](Tape& t, int self) {
      t.accum(a, t.node(self).grad);
    });
  }

  /// a times a 1x1 scalar node, broadcast.
  Var mul_scalar(Var a, Var s) {
    check_dims(value(s).size() == 1, "tape: mul_scalar needs 1x1 scalar");
    return push(value(a) * value(s)(0, 0), [a, s](Tape& t, int self) {
      const M& g = t.node(self).grad;
      t.accum(a, g * t.value(s)(0, 0));
      t.accum_scalar(s, g.cwiseProduct(t.value(a)).sum());
    });
  }

  /// a divided by a 1x1 scalar node.
  Var div_scalar(Var a, Var s) {
    check_dims(value(s).size() == 1, "tape: div_scalar needs 1x1 scalar");
    const T sv = value(s)(0, 0);
    return push(value(a) / sv, [a, s](Tape& t, int self) {
      const M& g = t.node(self).grad;
      const T v = t.value(s)(0, 0);
      t.accum(a, g / v);
      t.accum_scalar(s, -g.cwiseProduct(t.value(a)).sum() / (v * v));
    });
  }

  /// k / s for a 1x1 scalar node s.
  Var const_div_scalar(T k, Var s) {
    check_dims(value(s).size() == 1, "tape: const_div_scalar needs 1x1 scalar");
    M out(1, 1);
    out(0, 0) = k / value(s)(0, 0);
    return push(std::move(out), [k, s](Tape& t, int self) {
      const T g = t.node(self).grad(0, 0);
      const T v = t.value(s)(0, 0);
      t.accum_scalar(s, -g * k / (v * v));
    });
  }

  Var sum(Var a) {
    M out(1, 1);
    out(0, 0) = value(a).sum();
    return push(std::move(out), [a](Tape& t, int self) {
      const T g = t.node(self).grad(0, 0);
      t.accum(a, M::Constant(t.value(a).rows(), t.value(a).cols(), g));
    });
  }

  /// Frobenius inner product of two same-shape nodes -> 1x1.
  Var dot(Var a, Var b) {
    check_dims(same_shape(a, b), "tape: dot shape mismatch");
    M out(1, 1);
    out(0, 0) = value(a).cwiseProduct(value(b)).sum();
    return push(std::move(out), [a, b](Tape& t, int self) {
      const T g = t.node(self).grad(0, 0);
      t.accum(a, g * t.value(b));
      t.accum(b, g * t.value(a));
    });
  }

  Var tanh_(Var a) {
    return push(M(value(a).array().tanh()), [a](Tape& t, int self) {
      const M& y = t.node(self).value;
      t.accum(a, t.node(self).grad.cwiseProduct(M(T(1) - y.array().square())));
    });
  }

  Var sigmoid_(Var a) {
    M out = value(a);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const T x = out.data()[i];
      out.data()[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                                : std::exp(x) / (T(1) + std::exp(x));
    }
    return push(std::move(out), [a](Tape& t, int self) {
      const M& y = t.node(self).value;
      t.accum(a, t.node(self).grad.cwiseProduct(M(y.array() * (T(1) - y.array()))));
    });
  }

  /// max(x, 0) clamped above at cap; gradient passes only strictly inside.
  Var relu_clamped(Var a, T cap) {
    return push(M(value(a).array().max(T(0)).min(cap)), [a, cap](Tape& t, int self) {
      const M& x = t.value(a);
      M mask = ((x.array() > T(0)) && (x.array() < cap)).template cast<T>();
      t.accum(a, t.node(self).grad.cwiseProduct(mask));
    });
  }

  Var exp_(Var a) {
    return push(M(value(a).array().exp()), [a](Tape& t, int self) {
      t.accum(a, t.node(self).grad.cwiseProduct(t.node(self).value));
    });
  }

  Var log_(Var a) {
    return push(M(value(a).array().log()), [a](Tape& t, int self) {
      t.accum(a, M(t.node(self).grad.array() / t.value(a).array()));
    });
  }

  Var sqrt_(Var a) {
    return push(M(value(a).array().sqrt()), [a](Tape& t, int self) {
      const M& y = t.node(self).value;
      t.accum(a, M(t.node(self).grad.array() / (T(2) * y.array())));
    });
  }

  /// Elementwise digamma; derivative is trigamma.
  Var digamma_(Var a) {
    M out = value(a);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out.data()[i] = static_cast<T>(digamma(static_cast<double>(out.data()[i])));
    }
    return push(std::move(out), [a](Tape& t, int self) {
      const M& x = t.value(a);
      M d(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        d.data()[i] = static_cast<T>(trigamma(static_cast<double>(x.data()[i])));
      }
      t.accum(a, t.node(self).grad.cwiseProduct(d));
    });
  }

  Var transpose_(Var a) {
    return push(M(value(a).transpose()), [a](Tape& t, int self) {
      t.accum(a, t.node(self).grad.transpose());
    });
  }

  /// Row-stable log-softmax; exp(value) is the softmax itself.
  Var log_softmax_rows(Var a) {
    const M& x = value(a);
    M out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const T m = x.row(i).maxCoeff();
      const T lse = std::log((x.row(i).array() - m).exp().sum()) + m;
      out.row(i) = x.row(i).array() - lse;
    }
    return push(std::move(out), [a](Tape& t, int self) {
      const M& ls = t.node(self).value;
      const M& g = t.node(self).grad;
      M p = ls.array().exp();
      Vec<T> row_g = g.rowwise().sum();
      M adj = g;
      for (Eigen::Index i = 0; i < adj.rows(); ++i) {
        adj.row(i) -= row_g[i] * p.row(i);
      }
      t.accum(a, adj);
    });
  }

  /// Softmax of a column vector.
  Var softmax_vec(Var a) {
    const M& x = value(a);
    check_dims(x.cols() == 1, "tape: softmax_vec needs a column vector");
    const T m = x.maxCoeff();
    M out = (x.array() - m).exp();
    out /= out.sum();
    return push(std::move(out), [a](Tape& t, int self) {
      const M& y = t.node(self).value;
      const M& g = t.node(self).grad;
      const T gy = g.cwiseProduct(y).sum();
      t.accum(a, y.cwiseProduct(M(g.array() - gy)));
    });
  }

  /// Row-wise max, M x N -> M x 1. Gradient flows to the first argmax.
  Var rowmax(Var a) {
    const M& x = value(a);
    M out(x.rows(), 1);
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, 0) = x.row(i).maxCoeff(&arg[static_cast<std::size_t>(i)]);
    }
    return push(std::move(out), [a, arg = std::move(arg)](Tape& t, int self) {
      const M& g = t.node(self).grad;
      M d = M::Zero(t.value(a).rows(), t.value(a).cols());
      for (Eigen::Index i = 0; i < d.rows(); ++i) {
        d(i, arg[static_cast<std::size_t>(i)]) = g(i, 0);
      }
      t.accum(a, d);
    });
  }

  /// Vertical stack of two nodes with equal column counts.
  Var concat_rows(Var a, Var b) {
    check_dims(value(a).cols() == value(b).cols(), "tape: concat_rows column mismatch");
    M out(value(a).rows() + value(b).rows(), value(a).cols());
    out.topRows(value(a).rows()) = value(a);
    out.bottomRows(value(b).rows()) = value(b);
    return push(std::move(out), [a, b](Tape& t, int self) {
      const M& g = t.node(self).grad;
      const Eigen::Index ra = t.value(a).rows();
      t.accum(a, g.topRows(ra));
      t.accum(b, g.bottomRows(g.rows() - ra));
    });
  }

  /// Horizontal stack; parents must share row count.
  Var concat_cols(std::span<const Var> parts) {
    check_data(!parts.empty(), "tape: concat_cols of nothing");
    Eigen::Index cols = 0;
    const Eigen::Index rows = value(parts[0]).rows();
    for (Var p : parts) {
      check_dims(value(p).rows() == rows, "tape: concat_cols row mismatch");
      cols += value(p).cols();
    }
    M out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out), [owned = std::move(owned)](Tape& t, int self) {
      const M& g = t.node(self).grad;
      Eigen::Index at = 0;
      for (Var p : owned) {
        const Eigen::Index w = t.value(p).cols();
        t.accum(p, g.middleCols(at, w));
        at += w;
      }
    });
  }

  /// Extracts one column as a column-vector node.
  Var col(Var a, Eigen::Index j) {
    check_dims(j >= 0 && j < value(a).cols(), "tape: col index out of range");
    return push(M(value(a).col(j)), [a, j](Tape& t, int self) {
      M d = M::Zero(t.value(a).rows(), t.value(a).cols());
      d.col(j) = t.node(self).grad;
      t.accum(a, d);
    });
  }

  /// Gathers table rows as output columns: out.col(n) = table.row(ids[n])^T.
  Var gather_rows_t(Var table, std::vector<int> ids) {
    const M& tab = value(table);
    M out(tab.cols(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t n = 0; n < ids.size(); ++n) {
      check_data(ids[n] >= 0 && ids[n] < tab.rows(), "tape: gather id out of range");
      out.col(static_cast<Eigen::Index>(n)) = tab.row(ids[n]).transpose();
    }
    return push(std::move(out), [table, ids = std::move(ids)](Tape& t, int self) {
      const M& g = t.node(self).grad;
      M d = M::Zero(t.value(table).rows(), t.value(table).cols());
      for (std::size_t n = 0; n < ids.size(); ++n) {
        d.row(ids[n]) += g.col(static_cast<Eigen::Index>(n)).transpose();
      }
      t.accum(table, d);
    });
  }

 private:
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  bool same_shape(Var a, Var b) const {
    return value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols();
  }

  Var push(M value, std::function<void(Tape&, int)> backward) {
    check_data(value.allFinite(), "tape: non-finite value in node " + std::to_string(nodes_.size()));
    nodes_.push_back(Node{std::move(value), M(), std::move(backward)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accum(Var v, const M& g) {
    Node& n = node(v.id);
    if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }
  template <typename Expr>
  void accum(Var v, const Expr& g) {
    accum(v, M(g));
  }
  void accum_scalar(Var v, T g) {
    Node& n = node(v.id);
    if (n.grad.size() == 0) n.grad = M::Zero(1, 1);
    n.grad(0, 0) += g;
  }

  std::vector<Node> nodes_;
};

}  // namespace truthsr
