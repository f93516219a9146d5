#include "ec4srec/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <utility>

namespace ec4srec::ad {

Matrix& Node::grad_ref() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

void Node::accumulate(const Matrix& g) {
  assert(g.rows() == value.rows() && g.cols() == value.cols());
  grad_ref() += g;
}

Var make_leaf(Matrix value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Tape::~Tape() {
  for (auto& n : nodes_) n->backward = nullptr;
}

Var Tape::record(Matrix value, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  nodes_.push_back(n);
  return n;
}

void Tape::backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.has_grad()) n.backward();
  }
}

Var Tape::add(Var a, Var b) {
  Matrix v = a->value + b->value;
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad) a->accumulate(out->grad);
    if (b->requires_grad) b->accumulate(out->grad);
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  Matrix v = a->value - b->value;
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad) a->accumulate(out->grad);
    if (b->requires_grad) b->grad_ref() -= out->grad;
  };
  return out;
}

Var Tape::add_row_broadcast(Var x, Var row) {
  Matrix v = x->value.rowwise() + row->value.row(0);
  auto out = record(std::move(v), {x, row});
  out->backward = [out, x, row] {
    if (x->requires_grad) x->accumulate(out->grad);
    if (row->requires_grad) row->grad_ref() += out->grad.colwise().sum();
  };
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  Matrix v = a->value.cwiseProduct(b->value);
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad) a->accumulate(out->grad.cwiseProduct(b->value));
    if (b->requires_grad) b->accumulate(out->grad.cwiseProduct(a->value));
  };
  return out;
}

Var Tape::scale(Var x, double s) {
  Matrix v = x->value * s;
  auto out = record(std::move(v), {x});
  out->backward = [out, x, s] {
    if (x->requires_grad) x->grad_ref() += out->grad * s;
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  Matrix v = a->value * b->value;
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad) a->grad_ref() += out->grad * b->value.transpose();
    if (b->requires_grad) b->grad_ref() += a->value.transpose() * out->grad;
  };
  return out;
}

Var Tape::matmul_transposed(Var a, Var b) {
  Matrix v = a->value * b->value.transpose();
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad) a->grad_ref() += out->grad * b->value;
    if (b->requires_grad) b->grad_ref() += out->grad.transpose() * a->value;
  };
  return out;
}

Var Tape::relu(Var x) {
  Matrix v = x->value.cwiseMax(0.0);
  auto out = record(std::move(v), {x});
  out->backward = [out, x] {
    if (!x->requires_grad) return;
    x->grad_ref() +=
        out->grad.cwiseProduct((x->value.array() > 0.0).cast<double>().matrix());
  };
  return out;
}

Var Tape::sigmoid(Var x) {
  Matrix v = (1.0 / (1.0 + (-x->value.array()).exp())).matrix();
  auto out = record(std::move(v), {x});
  out->backward = [out, x] {
    if (!x->requires_grad) return;
    Matrix d = (out->value.array() * (1.0 - out->value.array())).matrix();
    x->grad_ref() += out->grad.cwiseProduct(d);
  };
  return out;
}

Var Tape::tanh_act(Var x) {
  Matrix v = x->value.array().tanh().matrix();
  auto out = record(std::move(v), {x});
  out->backward = [out, x] {
    if (!x->requires_grad) return;
    Matrix d = (1.0 - out->value.array().square()).matrix();
    x->grad_ref() += out->grad.cwiseProduct(d);
  };
  return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = x->value;
  Eigen::VectorXd mean = in.rowwise().mean();
  Matrix centered = in.colwise() - mean;
  Eigen::VectorXd var = centered.array().square().rowwise().mean();
  Eigen::VectorXd inv_std = (var.array() + eps).sqrt().inverse();
  Matrix xhat = (centered.array().colwise() * inv_std.array()).matrix();
  Matrix v = ((xhat.array().rowwise() * gain->value.row(0).array()).rowwise() +
              bias->value.row(0).array())
                 .matrix();
  auto out = record(std::move(v), {x, gain, bias});
  out->backward = [out, x, gain, bias, xhat, inv_std] {
    const Matrix& g = out->grad;
    if (gain->requires_grad)
      gain->grad_ref() += g.cwiseProduct(xhat).colwise().sum();
    if (bias->requires_grad) bias->grad_ref() += g.colwise().sum();
    if (!x->requires_grad) return;
    Matrix dxhat = (g.array().rowwise() * gain->value.row(0).array()).matrix();
    Eigen::VectorXd m1 = dxhat.rowwise().mean();
    Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
    Matrix dx = dxhat;
    dx.colwise() -= m1;
    dx -= (xhat.array().colwise() * m2.array()).matrix();
    dx.array().colwise() *= inv_std.array();
    x->grad_ref() += dx;
  };
  return out;
}

Var Tape::dropout(Var x, double rate, std::mt19937_64& rng) {
  assert(rate >= 0.0 && rate < 1.0);
  if (rate == 0.0) return x;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix keep(x->value.rows(), x->value.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < keep.rows(); ++i)
    for (Eigen::Index j = 0; j < keep.cols(); ++j)
      keep(i, j) = unif(rng) < rate ? 0.0 : inv;
  Matrix v = x->value.cwiseProduct(keep);
  auto out = record(std::move(v), {x});
  out->backward = [out, x, keep] {
    if (x->requires_grad) x->grad_ref() += out->grad.cwiseProduct(keep);
  };
  return out;
}

Var Tape::gather_rows(Var x, std::vector<int> rows) {
  Matrix v(static_cast<Eigen::Index>(rows.size()), x->value.cols());
  for (size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = x->value.row(rows[i]);
  auto out = record(std::move(v), {x});
  out->backward = [out, x, rows = std::move(rows)] {
    if (!x->requires_grad) return;
    Matrix& gx = x->grad_ref();
    for (size_t i = 0; i < rows.size(); ++i)
      gx.row(rows[i]) += out->grad.row(static_cast<Eigen::Index>(i));
  };
  return out;
}

Var Tape::embedding(Var table, std::vector<int> ids) {
  return gather_rows(std::move(table), std::move(ids));
}

Var Tape::slice_cols(Var x, int first, int count) {
  Matrix v = x->value.middleCols(first, count);
  auto out = record(std::move(v), {x});
  out->backward = [out, x, first, count] {
    if (x->requires_grad) x->grad_ref().middleCols(first, count) += out->grad;
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Eigen::Index rows = parts[0]->value.rows(), cols = 0;
  for (const auto& p : parts) cols += p->value.cols();
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p->value.cols()) = p->value;
    at += p->value.cols();
  }
  auto out = record(std::move(v), parts);
  out->backward = [out, parts] {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad)
        p->grad_ref() += out->grad.middleCols(at, p->value.cols());
      at += p->value.cols();
    }
  };
  return out;
}

Var Tape::scale_rows(Var x, Eigen::VectorXd factors) {
  Matrix v = (x->value.array().colwise() * factors.array()).matrix();
  auto out = record(std::move(v), {x});
  out->backward = [out, x, factors = std::move(factors)] {
    if (!x->requires_grad) return;
    x->grad_ref() += (out->grad.array().colwise() * factors.array()).matrix();
  };
  return out;
}

Var Tape::softmax_rows(Var x, Matrix additive_mask) {
  Matrix z = x->value + additive_mask;
  Matrix v(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double mx = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - mx).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  auto out = record(std::move(v), {x});
  out->backward = [out, x] {
    if (!x->requires_grad) return;
    const Matrix& y = out->value;
    const Matrix& g = out->grad;
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double dot = g.row(i).dot(y.row(i));
      dx.row(i) = (y.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
    x->grad_ref() += dx;
  };
  return out;
}

Var Tape::batched_scores(Var q, Var k, int batch, int len) {
  assert(q->value.rows() == static_cast<Eigen::Index>(batch) * len);
  Matrix v(static_cast<Eigen::Index>(batch) * len, len);
  for (int b = 0; b < batch; ++b)
    v.middleRows(b * len, len) =
        q->value.middleRows(b * len, len) * k->value.middleRows(b * len, len).transpose();
  auto out = record(std::move(v), {q, k});
  out->backward = [out, q, k, batch, len] {
    for (int b = 0; b < batch; ++b) {
      auto g = out->grad.middleRows(b * len, len);
      if (q->requires_grad)
        q->grad_ref().middleRows(b * len, len) += g * k->value.middleRows(b * len, len);
      if (k->requires_grad)
        k->grad_ref().middleRows(b * len, len) +=
            g.transpose() * q->value.middleRows(b * len, len);
    }
  };
  return out;
}

Var Tape::batched_weighted_sum(Var p, Var v, int batch, int len) {
  Matrix o(static_cast<Eigen::Index>(batch) * len, v->value.cols());
  for (int b = 0; b < batch; ++b)
    o.middleRows(b * len, len) =
        p->value.middleRows(b * len, len) * v->value.middleRows(b * len, len);
  auto out = record(std::move(o), {p, v});
  out->backward = [out, p, v, batch, len] {
    for (int b = 0; b < batch; ++b) {
      auto g = out->grad.middleRows(b * len, len);
      if (p->requires_grad)
        p->grad_ref().middleRows(b * len, len) +=
            g * v->value.middleRows(b * len, len).transpose();
      if (v->requires_grad)
        v->grad_ref().middleRows(b * len, len) +=
            p->value.middleRows(b * len, len).transpose() * g;
    }
  };
  return out;
}

Var Tape::rows_dot(Var a, Var b) {
  Matrix v = a->value.cwiseProduct(b->value).rowwise().sum();
  auto out = record(std::move(v), {a, b});
  out->backward = [out, a, b] {
    if (a->requires_grad)
      a->grad_ref() += (b->value.array().colwise() * out->grad.col(0).array()).matrix();
    if (b->requires_grad)
      b->grad_ref() += (a->value.array().colwise() * out->grad.col(0).array()).matrix();
  };
  return out;
}

Var Tape::dot_embedding_rows(Var h, Var table, std::vector<int> ids) {
  Matrix v(h->value.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    v(i, 0) = h->value.row(i).dot(table->value.row(ids[static_cast<size_t>(i)]));
  auto out = record(std::move(v), {h, table});
  out->backward = [out, h, table, ids = std::move(ids)] {
    for (Eigen::Index i = 0; i < out->value.rows(); ++i) {
      const double g = out->grad(i, 0);
      const int id = ids[static_cast<size_t>(i)];
      if (h->requires_grad) h->grad_ref().row(i) += g * table->value.row(id);
      if (table->requires_grad) table->grad_ref().row(id) += g * h->value.row(i);
    }
  };
  return out;
}

}  // namespace ec4srec::ad
