// Copyright 2026 castts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "castts/common.hpp"

namespace castts::nn {

enum class Mode { kTrain, kEval };

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IdxMat = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>;

/// A learnable tensor. Gradients accumulate into `grad` during
/// Tape::backward; Adam state lives here so checkpoint resume is exact.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

class Tape;

/// Lightweight handle to a node on a Tape. Valid until Tape::clear().
class Var {
 public:
  Var() = default;
  const Mat& val() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape over Eigen double matrices. Nodes are created in
/// topological order by construction; backward() walks them in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat v);
  Var param(Parameter& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  /// Broadcast a 1 x cols row vector over every row of `a`.
  Var add_rowvec(Var a, Var row);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n);
  Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);
  /// Embedding lookup: output row i = table row ids[i].
  Var row_select(Var table, std::vector<Eigen::Index> ids);
  /// Length regulation: row p repeated counts[p] times, in order.
  Var repeat_rows(Var a, std::vector<Eigen::Index> counts);
  Var mean_rows(Var a);
  Var mean_all(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var dropout(Var a, double rate, Mode mode, Rng& rng);
  Var softmax_rows(Var a);
  /// Row-wise softmax where visibility(r, c) == false forces weight 0.
  /// Every row must have at least one visible column.
  Var masked_softmax_rows(Var a, BoolMat visibility);
  /// Per-row layer normalisation with learnable gain/bias (both 1 x cols).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  /// im2col gather: out.block(i, j*channels, 1, channels) = x.row(idx(i, j)),
  /// zeros where idx(i, j) < 0. Used by the convolution modules.
  Var gather_patches(Var x, IdxMat idx, Eigen::Index channels);
  /// Reshape groups of `group` consecutive rows into single rows:
  /// out(r, w*C + c) = x(r*group + w, c).
  Var group_rows(Var a, Eigen::Index group);
  Var mse_loss(Var a, Mat target);
  Var mae_loss(Var a, Mat target);

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  friend class Var;
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Tape&, const Node&)> back;
  };

  Var make(Mat val, std::function<void(Tape&, const Node&)> back);
  Mat& grad_at(std::size_t id) { return nodes_[id].grad; }
  const Mat& val_at(std::size_t id) const { return nodes_[id].val; }

  std::vector<Node> nodes_;
};

}  // namespace castts::nn
