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

#include "castts/nn/modules.hpp"

#include <cmath>

namespace castts::nn {

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  Mat m(in, out);
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j) m(i, j) = dist(rng);
  return m;
}

Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : w(name + ".w", xavier_uniform(in, out, rng)),
      b(name + ".b", Mat::Zero(1, out)) {}

Var Linear::forward(Tape& t, Var x) {
  return t.add_rowvec(t.matmul(x, t.param(w)), t.param(b));
}

void Linear::params(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, Eigen::Index dim)
    : gain(name + ".gain", Mat::Ones(1, dim)),
      bias(name + ".bias", Mat::Zero(1, dim)) {}

Var LayerNorm::forward(Tape& t, Var x) {
  return t.layer_norm(x, t.param(gain), t.param(bias));
}

void LayerNorm::params(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

Embedding::Embedding(const std::string& name, Eigen::Index count,
                     Eigen::Index dim, Rng& rng)
    : table(name + ".table", normal_init(count, dim, 0.02, rng)) {}

Var Embedding::forward(Tape& t, const std::vector<Eigen::Index>& ids) {
  return t.row_select(t.param(table), ids);
}

void Embedding::params(std::vector<Parameter*>& out) { out.push_back(&table); }

PositionalEncoding::PositionalEncoding(const std::string& name,
                                       Eigen::Index max_len, Eigen::Index dim,
                                       bool learned, Rng& rng)
    : learned_(learned) {
  if (learned_) {
    table_ = Parameter(name + ".table", normal_init(max_len, dim, 0.02, rng));
  } else {
    sinusoid_.resize(max_len, dim);
    for (Eigen::Index p = 0; p < max_len; ++p)
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double angle =
            p / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(dim));
        sinusoid_(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
      }
  }
}

Var PositionalEncoding::forward(Tape& t, Eigen::Index len) {
  const Eigen::Index cap = learned_ ? table_.value.rows() : sinusoid_.rows();
  if (len > cap)
    throw InvariantError("positional encoding: sequence length " +
                         std::to_string(len) + " exceeds capacity " +
                         std::to_string(cap));
  if (learned_) return t.slice_rows(t.param(table_), 0, len);
  return t.constant(sinusoid_.topRows(len));
}

Var PositionalEncoding::select(Tape& t, const std::vector<Eigen::Index>& ids) {
  const Eigen::Index cap = learned_ ? table_.value.rows() : sinusoid_.rows();
  for (Eigen::Index id : ids)
    if (id < 0 || id >= cap)
      throw InvariantError("positional encoding: id " + std::to_string(id) +
                           " exceeds capacity " + std::to_string(cap));
  if (learned_) return t.row_select(t.param(table_), ids);
  Mat out(static_cast<Eigen::Index>(ids.size()), sinusoid_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(i) = sinusoid_.row(ids[i]);
  return t.constant(std::move(out));
}

void PositionalEncoding::params(std::vector<Parameter*>& out) {
  if (learned_) out.push_back(&table_);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name,
                                       Eigen::Index d_model, Eigen::Index heads,
                                       Rng& rng)
    : heads_(heads),
      wq_(name + ".wq", d_model, d_model, rng),
      wk_(name + ".wk", d_model, d_model, rng),
      wv_(name + ".wv", d_model, d_model, rng),
      wo_(name + ".wo", d_model, d_model, rng) {
  if (d_model % heads != 0)
    throw InvariantError("attention: d_model must divide by heads");
}

Var MultiHeadAttention::forward(Tape& t, Var query_in, Var kv_in,
                                const BoolMat* visibility, Mat* attn_probs) {
  const Eigen::Index d_model = wq_.out_dim();
  const Eigen::Index dh = d_model / heads_;
  const Eigen::Index lq = query_in.rows(), lk = kv_in.rows();
  if (visibility &&
      (visibility->rows() != lq || visibility->cols() != lk))
    throw InvariantError("attention: visibility shape must be Lq x Lk");
  Var q = wq_.forward(t, query_in);
  Var k = wk_.forward(t, kv_in);
  Var v = wv_.forward(t, kv_in);
  if (attn_probs) attn_probs->resize(heads_ * lq, lk);
  std::vector<Var> head_outs;
  head_outs.reserve(heads_);
  for (Eigen::Index h = 0; h < heads_; ++h) {
    Var qh = t.slice_cols(q, h * dh, dh);
    Var kh = t.slice_cols(k, h * dh, dh);
    Var vh = t.slice_cols(v, h * dh, dh);
    Var logits = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(dh));
    Var probs = visibility ? t.masked_softmax_rows(logits, *visibility)
                           : t.softmax_rows(logits);
    if (attn_probs) attn_probs->middleRows(h * lq, lq) = probs.val();
    head_outs.push_back(t.matmul(probs, vh));
  }
  return wo_.forward(t, t.concat_cols(head_outs));
}

void MultiHeadAttention::params(std::vector<Parameter*>& out) {
  wq_.params(out);
  wk_.params(out);
  wv_.params(out);
  wo_.params(out);
}

TransformerBlock::TransformerBlock(const std::string& name, Eigen::Index d_model,
                                   Eigen::Index heads, Eigen::Index ffn_dim,
                                   double dropout, Rng& rng)
    : ln1_(name + ".ln1", d_model),
      ln2_(name + ".ln2", d_model),
      attn_(name + ".attn", d_model, heads, rng),
      ff1_(name + ".ff1", d_model, ffn_dim, rng),
      ff2_(name + ".ff2", ffn_dim, d_model, rng),
      dropout_(dropout) {}

Var TransformerBlock::forward(Tape& t, Var x, const BoolMat* visibility,
                              Mode mode, Rng& rng, Mat* attn_probs) {
  Var h = ln1_.forward(t, x);
  Var a = attn_.forward(t, h, h, visibility, attn_probs);
  x = t.add(x, t.dropout(a, dropout_, mode, rng));
  Var f = ln2_.forward(t, x);
  f = ff2_.forward(t, t.relu(ff1_.forward(t, f)));
  return t.add(x, t.dropout(f, dropout_, mode, rng));
}

void TransformerBlock::params(std::vector<Parameter*>& out) {
  ln1_.params(out);
  ln2_.params(out);
  attn_.params(out);
  ff1_.params(out);
  ff2_.params(out);
}

TransformerStack::TransformerStack(const std::string& name, Eigen::Index n_blocks,
                                   Eigen::Index d_model, Eigen::Index heads,
                                   Eigen::Index ffn_dim, double dropout, Rng& rng)
    : final_ln_(name + ".final_ln", d_model) {
  blocks_.reserve(n_blocks);
  for (Eigen::Index i = 0; i < n_blocks; ++i)
    blocks_.emplace_back(name + ".block" + std::to_string(i), d_model, heads,
                         ffn_dim, dropout, rng);
}

Var TransformerStack::forward(Tape& t, Var x, const BoolMat* visibility,
                              Mode mode, Rng& rng, std::vector<Mat>* attn_probs) {
  for (auto& block : blocks_) {
    Mat probs;
    x = block.forward(t, x, visibility, mode, rng,
                      attn_probs ? &probs : nullptr);
    if (attn_probs) attn_probs->push_back(std::move(probs));
  }
  return final_ln_.forward(t, x);
}

void TransformerStack::params(std::vector<Parameter*>& out) {
  for (auto& block : blocks_) block.params(out);
  final_ln_.params(out);
}

Conv2d::Conv2d(const std::string& name, Eigen::Index in_ch, Eigen::Index out_ch,
               Eigen::Index kernel, Eigen::Index stride, Rng& rng)
    : in_ch_(in_ch), kernel_(kernel), stride_(stride) {
  const Eigen::Index fan_in = kernel * kernel * in_ch;
  w_ = Parameter(name + ".w", normal_init(fan_in, out_ch,
                                          std::sqrt(2.0 / fan_in), rng));
  b_ = Parameter(name + ".b", Mat::Zero(1, out_ch));
}

Var Conv2d::forward(Tape& t, Var x, Eigen::Index h, Eigen::Index w,
                    Eigen::Index* h2, Eigen::Index* w2) {
  if (x.rows() != h * w || x.cols() != in_ch_)
    throw InvariantError("conv2d: input shape mismatch");
  const Eigen::Index pad = kernel_ / 2;
  const Eigen::Index oh = (h + 2 * pad - kernel_) / stride_ + 1;
  const Eigen::Index ow = (w + 2 * pad - kernel_) / stride_ + 1;
  IdxMat idx(oh * ow, kernel_ * kernel_);
  for (Eigen::Index i = 0; i < oh; ++i)
    for (Eigen::Index j = 0; j < ow; ++j) {
      const Eigen::Index out_row = i * ow + j;
      for (Eigen::Index di = 0; di < kernel_; ++di)
        for (Eigen::Index dj = 0; dj < kernel_; ++dj) {
          const Eigen::Index si = i * stride_ + di - pad;
          const Eigen::Index sj = j * stride_ + dj - pad;
          idx(out_row, di * kernel_ + dj) =
              (si >= 0 && si < h && sj >= 0 && sj < w) ? si * w + sj : -1;
        }
    }
  Var patches = t.gather_patches(x, std::move(idx), in_ch_);
  // gather_patches interleaves channels per tap; weight rows follow the same
  // (tap, channel) order.
  Var out = t.add_rowvec(t.matmul(patches, t.param(w_)), t.param(b_));
  *h2 = oh;
  *w2 = ow;
  return out;
}

void Conv2d::params(std::vector<Parameter*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

Conv1d::Conv1d(const std::string& name, Eigen::Index in_ch, Eigen::Index out_ch,
               Eigen::Index kernel, Rng& rng)
    : in_ch_(in_ch), kernel_(kernel) {
  const Eigen::Index fan_in = kernel * in_ch;
  w_ = Parameter(name + ".w", normal_init(fan_in, out_ch,
                                          std::sqrt(2.0 / fan_in), rng));
  b_ = Parameter(name + ".b", Mat::Zero(1, out_ch));
}

Var Conv1d::forward(Tape& t, Var x) {
  if (x.cols() != in_ch_) throw InvariantError("conv1d: channel mismatch");
  const Eigen::Index len = x.rows();
  const Eigen::Index pad = kernel_ / 2;
  IdxMat idx(len, kernel_);
  for (Eigen::Index i = 0; i < len; ++i)
    for (Eigen::Index k = 0; k < kernel_; ++k) {
      const Eigen::Index s = i + k - pad;
      idx(i, k) = (s >= 0 && s < len) ? s : -1;
    }
  Var patches = t.gather_patches(x, std::move(idx), in_ch_);
  return t.add_rowvec(t.matmul(patches, t.param(w_)), t.param(b_));
}

void Conv1d::params(std::vector<Parameter*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

Gru::Gru(const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : wz_(name + ".wz", xavier_uniform(in, hidden, rng)),
      uz_(name + ".uz", xavier_uniform(hidden, hidden, rng)),
      bz_(name + ".bz", Mat::Zero(1, hidden)),
      wr_(name + ".wr", xavier_uniform(in, hidden, rng)),
      ur_(name + ".ur", xavier_uniform(hidden, hidden, rng)),
      br_(name + ".br", Mat::Zero(1, hidden)),
      wh_(name + ".wh", xavier_uniform(in, hidden, rng)),
      uh_(name + ".uh", xavier_uniform(hidden, hidden, rng)),
      bh_(name + ".bh", Mat::Zero(1, hidden)) {}

Var Gru::forward_last(Tape& t, Var x_seq) {
  const Eigen::Index steps = x_seq.rows();
  if (steps < 1) throw InvariantError("gru: empty sequence");
  Var wz = t.param(wz_), uz = t.param(uz_), bz = t.param(bz_);
  Var wr = t.param(wr_), ur = t.param(ur_), br = t.param(br_);
  Var wh = t.param(wh_), uh = t.param(uh_), bh = t.param(bh_);
  Var h = t.constant(Mat::Zero(1, uz_.value.rows()));
  for (Eigen::Index i = 0; i < steps; ++i) {
    Var x = t.slice_rows(x_seq, i, 1);
    Var z = t.sigmoid(t.add(t.add(t.matmul(x, wz), t.matmul(h, uz)), bz));
    Var r = t.sigmoid(t.add(t.add(t.matmul(x, wr), t.matmul(h, ur)), br));
    Var hc = t.tanh(
        t.add(t.add(t.matmul(x, wh), t.matmul(t.mul(r, h), uh)), bh));
    Var keep = t.add_scalar(t.scale(z, -1.0), 1.0);
    h = t.add(t.mul(keep, h), t.mul(z, hc));
  }
  return h;
}

void Gru::params(std::vector<Parameter*>& out) {
  for (Parameter* p : {&wz_, &uz_, &bz_, &wr_, &ur_, &br_, &wh_, &uh_, &bh_})
    out.push_back(p);
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : params_) {
    if (p->adam_m.size() == 0) {
      p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
      p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params_) {
    p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
    p->adam_v = beta2_ * p->adam_v.array().matrix() +
                (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    const Mat m_hat = p->adam_m / bc1;
    const Mat v_hat = p->adam_v / bc2;
    p->value.array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

}  // namespace castts::nn
