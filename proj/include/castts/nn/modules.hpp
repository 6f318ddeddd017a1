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

#include <string>
#include <vector>

#include "castts/nn/tape.hpp"

namespace castts::nn {

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng);
Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Var forward(Tape& t, Var x);
  void params(std::vector<Parameter*>& out);
  Eigen::Index in_dim() const { return w.value.rows(); }
  Eigen::Index out_dim() const { return w.value.cols(); }

  Parameter w;  // in x out
  Parameter b;  // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim);
  Var forward(Tape& t, Var x);
  void params(std::vector<Parameter*>& out);

  Parameter gain;  // 1 x dim
  Parameter bias;  // 1 x dim
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, Eigen::Index count, Eigen::Index dim, Rng& rng);
  Var forward(Tape& t, const std::vector<Eigen::Index>& ids);
  void params(std::vector<Parameter*>& out);
  Eigen::Index count() const { return table.value.rows(); }

  Parameter table;  // count x dim
};

/// Token positions 0..len-1, either a learned table or fixed sinusoids.
class PositionalEncoding {
 public:
  PositionalEncoding() = default;
  PositionalEncoding(const std::string& name, Eigen::Index max_len,
                     Eigen::Index dim, bool learned, Rng& rng);
  Var forward(Tape& t, Eigen::Index len);
  /// Arbitrary position ids (used where tokens at different slots share ids).
  Var select(Tape& t, const std::vector<Eigen::Index>& ids);
  void params(std::vector<Parameter*>& out);

 private:
  bool learned_ = true;
  Parameter table_;
  Mat sinusoid_;
};

/// Multi-head scaled dot-product attention. Query and key/value inputs may
/// differ (cross attention). `visibility` rows index queries, columns keys;
/// nullptr means full visibility. When `attn_probs` is non-null the
/// per-head attention weights are stacked into it (heads*Lq x Lk) for
/// debug dumps and tests.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, Eigen::Index d_model,
                     Eigen::Index heads, Rng& rng);
  Var forward(Tape& t, Var query_in, Var kv_in, const BoolMat* visibility,
              Mat* attn_probs = nullptr);
  void params(std::vector<Parameter*>& out);
  Eigen::Index heads() const { return heads_; }

 private:
  Eigen::Index heads_ = 0;
  Linear wq_, wk_, wv_, wo_;
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + FFN(LN(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, Eigen::Index d_model,
                   Eigen::Index heads, Eigen::Index ffn_dim, double dropout,
                   Rng& rng);
  Var forward(Tape& t, Var x, const BoolMat* visibility, Mode mode, Rng& rng,
              Mat* attn_probs = nullptr);
  void params(std::vector<Parameter*>& out);

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  Linear ff1_, ff2_;
  double dropout_ = 0.0;
};

/// Block stack plus the final layer norm of the pre-norm convention.
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(const std::string& name, Eigen::Index n_blocks,
                   Eigen::Index d_model, Eigen::Index heads,
                   Eigen::Index ffn_dim, double dropout, Rng& rng);
  Var forward(Tape& t, Var x, const BoolMat* visibility, Mode mode, Rng& rng,
              std::vector<Mat>* attn_probs = nullptr);
  void params(std::vector<Parameter*>& out);
  Eigen::Index n_blocks() const { return blocks_.size(); }

 private:
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_ln_;
};

/// Strided 2-D convolution over a single feature map stored position-major:
/// row i*W + j holds the channels of cell (i, j).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, Eigen::Index in_ch, Eigen::Index out_ch,
         Eigen::Index kernel, Eigen::Index stride, Rng& rng);
  /// x: (H*W) x in_ch. Output: (H2*W2) x out_ch with H2/W2 written back.
  Var forward(Tape& t, Var x, Eigen::Index h, Eigen::Index w, Eigen::Index* h2,
              Eigen::Index* w2);
  void params(std::vector<Parameter*>& out);

 private:
  Eigen::Index in_ch_ = 0, kernel_ = 0, stride_ = 0;
  Parameter w_;  // (k*k*in_ch) x out_ch
  Parameter b_;  // 1 x out_ch
};

/// Same-length 1-D convolution along rows (kernel 3, stride 1).
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, Eigen::Index in_ch, Eigen::Index out_ch,
         Eigen::Index kernel, Rng& rng);
  Var forward(Tape& t, Var x);  // rows x in_ch -> rows x out_ch
  void params(std::vector<Parameter*>& out);

 private:
  Eigen::Index in_ch_ = 0, kernel_ = 0;
  Parameter w_;
  Parameter b_;
};

/// Gated recurrent unit; forward_last returns the final hidden state only.
class Gru {
 public:
  Gru() = default;
  Gru(const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);
  Var forward_last(Tape& t, Var x_seq);  // T x in -> 1 x hidden
  void params(std::vector<Parameter*>& out);
  Eigen::Index hidden() const { return uz_.value.rows(); }

 private:
  Parameter wz_, uz_, bz_;
  Parameter wr_, ur_, br_;
  Parameter wh_, uh_, bh_;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.98, double eps = 1e-8);
  void zero_grad();
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace castts::nn
