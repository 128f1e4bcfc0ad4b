// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/fusion/tape.hpp"

#include <cmath>

#include "polarkit/errors.hpp"

namespace polarkit::fusion {

Var Tape::leaf(Mat value, bool requires_grad) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return &n;
}

Var Tape::make(Mat value, std::initializer_list<Var> inputs) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || in->requires_grad;
  return &n;
}

void Tape::backward(Var root) {
  require(root->value.size() == 1, ErrorKind::usage, "backward needs a scalar root");
  root->grad = Mat::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward && it->requires_grad && it->grad.size() != 0) it->backward();
  }
}

Var matmul(Tape& t, Var a, Var b) {
  Var out = t.make(a->value * b->value, {a, b});
  if (out->requires_grad) {
    out->backward = [=] {
      if (a->requires_grad) a->accumulate(out->grad * b->value.transpose());
      if (b->requires_grad) b->accumulate(a->value.transpose() * out->grad);
    };
  }
  return out;
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Var out = t.make(a->value * b->value.transpose(), {a, b});
  if (out->requires_grad) {
    out->backward = [=] {
      if (a->requires_grad) a->accumulate(out->grad * b->value);
      if (b->requires_grad) b->accumulate(out->grad.transpose() * a->value);
    };
  }
  return out;
}

Var add(Tape& t, Var a, Var b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(), ErrorKind::structural,
          "add: shape mismatch");
  Var out = t.make(a->value + b->value, {a, b});
  if (out->requires_grad) {
    out->backward = [=] {
      if (a->requires_grad) a->accumulate(out->grad);
      if (b->requires_grad) b->accumulate(out->grad);
    };
  }
  return out;
}

Var add_row(Tape& t, Var a, Var row) {
  require(row->value.rows() == 1 && row->value.cols() == a->value.cols(), ErrorKind::structural,
          "add_row: shape mismatch");
  Var out = t.make(a->value.rowwise() + row->value.row(0), {a, row});
  if (out->requires_grad) {
    out->backward = [=] {
      if (a->requires_grad) a->accumulate(out->grad);
      if (row->requires_grad) row->accumulate(out->grad.colwise().sum());
    };
  }
  return out;
}

Var scale(Tape& t, Var a, double s) {
  Var out = t.make(a->value * s, {a});
  if (out->requires_grad) out->backward = [=] { a->accumulate(out->grad * s); };
  return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;
}  // namespace

Var gelu(Tape& t, Var a) {
  const auto x = a->value.array();
  const Eigen::ArrayXXd th = (kGeluC * (x + kGeluK * x.cube())).tanh();
  Var out = t.make((0.5 * x * (1.0 + th)).matrix(), {a});
  if (out->requires_grad) {
    out->backward = [=] {
      const auto xv = a->value.array();
      const Eigen::ArrayXXd tv = (kGeluC * (xv + kGeluK * xv.cube())).tanh();
      const Eigen::ArrayXXd d =
          0.5 * (1.0 + tv) + 0.5 * xv * (1.0 - tv.square()) * kGeluC * (1.0 + 3.0 * kGeluK * xv.square());
      a->accumulate((out->grad.array() * d).matrix());
    };
  }
  return out;
}

Var rms_norm(Tape& t, Var x, Var gain, int* degenerate_rows) {
  const Eigen::Index rows = x->value.rows();
  const Eigen::Index d = x->value.cols();
  require(gain->value.rows() == 1 && gain->value.cols() == d, ErrorKind::structural, "rms_norm: gain shape");
  Eigen::VectorXd rms(rows);
  Mat normed = Mat::Zero(rows, d);
  int degenerate = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    rms(i) = std::sqrt(x->value.row(i).squaredNorm() / double(d));
    if (rms(i) == 0.0) {
      ++degenerate;
      continue;
    }
    normed.row(i) = x->value.row(i) / rms(i);
  }
  if (degenerate_rows) *degenerate_rows += degenerate;
  Var out = t.make((normed.array().rowwise() * gain->value.row(0).array()).matrix(), {x, gain});
  if (out->requires_grad) {
    out->backward = [=] {
      const Mat& dy = out->grad;
      if (gain->requires_grad) gain->accumulate((dy.array() * normed.array()).colwise().sum().matrix());
      if (x->requires_grad) {
        Mat dx = Mat::Zero(rows, d);
        for (Eigen::Index i = 0; i < rows; ++i) {
          if (rms(i) == 0.0) continue;
          const Eigen::RowVectorXd gdy = (dy.row(i).array() * gain->value.row(0).array()).matrix();
          const double proj = gdy.dot(normed.row(i)) / double(d);
          dx.row(i) = (gdy - proj * normed.row(i)) / rms(i);
        }
        x->accumulate(dx);
      }
    };
  }
  return out;
}

Var masked_softmax(Tape& t, Var x, const BoolMat& visible) {
  require(visible.rows() == x->value.rows() && visible.cols() == x->value.cols(), ErrorKind::structural,
          "masked_softmax: mask shape");
  Mat y = Mat::Zero(x->value.rows(), x->value.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (visible(i, j)) mx = std::max(mx, x->value(i, j));
    }
    require(std::isfinite(mx), ErrorKind::degenerate, "masked_softmax: row with no visible entry");
    double sum = 0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (visible(i, j)) sum += (y(i, j) = std::exp(x->value(i, j) - mx));
    }
    y.row(i) /= sum;
  }
  Var out = t.make(std::move(y), {x});
  if (out->requires_grad) {
    out->backward = [=] {
      const Mat& yv = out->value;
      const Eigen::VectorXd inner = (out->grad.array() * yv.array()).rowwise().sum();
      x->accumulate((yv.array() * (out->grad.colwise() - inner).array()).matrix());
    };
  }
  return out;
}

Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count) {
  Var out = t.make(a->value.middleCols(start, count), {a});
  if (out->requires_grad) {
    out->backward = [=] {
      Mat g = Mat::Zero(a->value.rows(), a->value.cols());
      g.middleCols(start, count) = out->grad;
      a->accumulate(g);
    };
  }
  return out;
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::usage, "concat_cols: nothing to concatenate");
  Eigen::Index cols = 0;
  for (Var p : parts) cols += p->value.cols();
  Mat v(parts.front()->value.rows(), cols);
  Eigen::Index c = 0;
  bool rg = false;
  for (Var p : parts) {
    require(p->value.rows() == v.rows(), ErrorKind::structural, "concat_cols: row mismatch");
    v.middleCols(c, p->value.cols()) = p->value;
    c += p->value.cols();
    rg = rg || p->requires_grad;
  }
  Var out = t.make(std::move(v), {});
  out->requires_grad = rg;
  if (rg) {
    out->backward = [=] {
      Eigen::Index off = 0;
      for (Var p : parts) {
        if (p->requires_grad) p->accumulate(out->grad.middleCols(off, p->value.cols()));
        off += p->value.cols();
      }
    };
  }
  return out;
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::usage, "concat_rows: nothing to concatenate");
  Eigen::Index rows = 0;
  for (Var p : parts) rows += p->value.rows();
  Mat v(rows, parts.front()->value.cols());
  Eigen::Index r = 0;
  bool rg = false;
  for (Var p : parts) {
    require(p->value.cols() == v.cols(), ErrorKind::structural, "concat_rows: column mismatch");
    v.middleRows(r, p->value.rows()) = p->value;
    r += p->value.rows();
    rg = rg || p->requires_grad;
  }
  Var out = t.make(std::move(v), {});
  out->requires_grad = rg;
  if (rg) {
    out->backward = [=] {
      Eigen::Index off = 0;
      for (Var p : parts) {
        if (p->requires_grad) p->accumulate(out->grad.middleRows(off, p->value.rows()));
        off += p->value.rows();
      }
    };
  }
  return out;
}

Var gather_rows(Tape& t, Var table, const std::vector<int>& ids) {
  Mat v(Eigen::Index(ids.size()), table->value.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    require(ids[k] >= 0 && ids[k] < table->value.rows(), ErrorKind::usage,
            "token id " + std::to_string(ids[k]) + " outside the vocabulary");
    v.row(Eigen::Index(k)) = table->value.row(ids[k]);
  }
  Var out = t.make(std::move(v), {table});
  if (out->requires_grad) {
    out->backward = [=] {
      Mat g = Mat::Zero(table->value.rows(), table->value.cols());
      for (std::size_t k = 0; k < ids.size(); ++k) g.row(ids[k]) += out->grad.row(Eigen::Index(k));
      table->accumulate(g);
    };
  }
  return out;
}

Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Mat mask(a->value.rows(), a->value.cols());
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Var out = t.make((a->value.array() * mask.array()).matrix(), {a});
  if (out->requires_grad) {
    out->backward = [=] { a->accumulate((out->grad.array() * mask.array()).matrix()); };
  }
  return out;
}

Var nll(Tape& t, Var logits, const std::vector<Eigen::Index>& rows, const std::vector<int>& targets,
        Reduction reduction) {
  require(rows.size() == targets.size(), ErrorKind::structural, "nll: rows and targets differ in length");
  require(!rows.empty(), ErrorKind::usage, "nll: empty loss mask");
  const Eigen::Index v = logits->value.cols();
  Mat probs(Eigen::Index(rows.size()), v);
  double total = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(targets[k] >= 0 && targets[k] < v, ErrorKind::usage, "nll: target outside the vocabulary");
    const Eigen::RowVectorXd z = logits->value.row(rows[k]);
    const double mx = z.maxCoeff();
    const Eigen::RowVectorXd e = (z.array() - mx).exp().matrix();
    const double lse = mx + std::log(e.sum());
    probs.row(Eigen::Index(k)) = e / e.sum();
    total += lse - z(targets[k]);
  }
  const double norm = reduction == Reduction::mean ? 1.0 / double(rows.size()) : 1.0;
  Var out = t.make(Mat::Constant(1, 1, total * norm), {logits});
  if (out->requires_grad) {
    out->backward = [=] {
      Mat g = Mat::Zero(logits->value.rows(), v);
      const double s = out->grad(0, 0) * norm;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        Eigen::RowVectorXd d = probs.row(Eigen::Index(k));
        d(targets[k]) -= 1.0;
        g.row(rows[k]) += s * d;
      }
      logits->accumulate(g);
    };
  }
  return out;
}

}  // namespace polarkit::fusion
