// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_FUSION_TAPE_HPP
#define POLARKIT_FUSION_TAPE_HPP

#include <deque>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

// Minimal reverse-mode differentiation over dense row-major-convention
// matrices: activations are (tokens x features), weights are (in x out).
namespace polarkit::fusion {

using Mat = Eigen::MatrixXd;
using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Node {
  Mat value;
  Mat grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::function<void()> backward;

  void accumulate(const Mat& g) {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    grad += g;
  }
};

using Var = Node*;

class Tape {
 public:
  Var leaf(Mat value, bool requires_grad = false);
  /// Seeds d(root)=1 for a 1x1 root and runs every recorded closure in reverse.
  void backward(Var root);
  std::size_t size() const { return nodes_.size(); }

  Var make(Mat value, std::initializer_list<Var> inputs);

 private:
  std::deque<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);     // a * b
Var matmul_nt(Tape& t, Var a, Var b);  // a * b^T
Var add(Tape& t, Var a, Var b);
Var add_row(Tape& t, Var a, Var row);  // broadcasts a 1 x n row over a's rows
Var scale(Tape& t, Var a, double s);
Var gelu(Tape& t, Var a);              // tanh approximation
/// Row-wise x / rms(x) * gain with no epsilon; all-zero rows map to zero and
/// are counted in `degenerate_rows` when given.
Var rms_norm(Tape& t, Var x, Var gain, int* degenerate_rows = nullptr);
/// Row softmax over entries where `visible` is true; hidden entries get 0.
Var masked_softmax(Tape& t, Var x, const BoolMat& visible);
Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var gather_rows(Tape& t, Var table, const std::vector<int>& ids);
/// Inverted dropout with a caller-owned generator; p = 0 is the identity.
Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng);

enum class Reduction { mean, sum };

/// Negative log-likelihood of `targets[k]` under softmax(logits.row(rows[k])).
Var nll(Tape& t, Var logits, const std::vector<Eigen::Index>& rows, const std::vector<int>& targets,
        Reduction reduction = Reduction::mean);

}  // namespace polarkit::fusion

#endif  // POLARKIT_FUSION_TAPE_HPP
