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

#include "castts/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace castts::nn {

const Mat& Var::val() const { return tape_->val_at(id_); }
const Mat& Var::grad() const { return tape_->nodes_[id_].grad; }

Var Tape::make(Mat val, std::function<void(Tape&, const Node&)> back) {
  nodes_.push_back(Node{std::move(val), Mat(), std::move(back)});
  return Var(this, nodes_.size() - 1);
}

void Tape::clear() { nodes_.clear(); }

Var Tape::constant(Mat v) { return make(std::move(v), nullptr); }

Var Tape::param(Parameter& p) {
  Parameter* pp = &p;
  return make(p.value, [pp](Tape&, const Node& n) { pp->grad += n.grad; });
}

Var Tape::add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvariantError("tape add: shape mismatch");
  auto ai = a.id_, bi = b.id_;
  return make(a.val() + b.val(), [ai, bi](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad;
    t.grad_at(bi) += n.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvariantError("tape sub: shape mismatch");
  auto ai = a.id_, bi = b.id_;
  return make(a.val() - b.val(), [ai, bi](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad;
    t.grad_at(bi) -= n.grad;
  });
}

Var Tape::mul(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvariantError("tape mul: shape mismatch");
  auto ai = a.id_, bi = b.id_;
  return make(a.val().cwiseProduct(b.val()), [ai, bi](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad.cwiseProduct(t.val_at(bi));
    t.grad_at(bi) += n.grad.cwiseProduct(t.val_at(ai));
  });
}

Var Tape::scale(Var a, double s) {
  auto ai = a.id_;
  return make(a.val() * s, [ai, s](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad * s;
  });
}

Var Tape::add_scalar(Var a, double c) {
  auto ai = a.id_;
  return make(a.val().array() + c,
              [ai](Tape& t, const Node& n) { t.grad_at(ai) += n.grad; });
}

Var Tape::matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw InvariantError("tape matmul: inner dims");
  auto ai = a.id_, bi = b.id_;
  return make(a.val() * b.val(), [ai, bi](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad * t.val_at(bi).transpose();
    t.grad_at(bi) += t.val_at(ai).transpose() * n.grad;
  });
}

Var Tape::transpose(Var a) {
  auto ai = a.id_;
  return make(a.val().transpose(), [ai](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad.transpose();
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw InvariantError("tape add_rowvec: row must be 1 x cols(a)");
  auto ai = a.id_, ri = row.id_;
  Mat out = a.val();
  out.rowwise() += RowVec(row.val().row(0));
  return make(std::move(out), [ai, ri](Tape& t, const Node& n) {
    t.grad_at(ai) += n.grad;
    t.grad_at(ri) += n.grad.colwise().sum();
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvariantError("tape concat_rows: empty");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw InvariantError("tape concat_rows: cols differ");
    rows += p.rows();
  }
  Mat out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.val();
    ids.push_back(p.id_);
    offs.push_back(r);
    r += p.rows();
  }
  return make(std::move(out), [ids, offs](Tape& t, const Node& n) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Mat& g = t.grad_at(ids[k]);
      g += n.grad.middleRows(offs[k], g.rows());
    }
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvariantError("tape concat_cols: empty");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw InvariantError("tape concat_cols: rows differ");
    cols += p.cols();
  }
  Mat out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.val();
    ids.push_back(p.id_);
    offs.push_back(c);
    c += p.cols();
  }
  return make(std::move(out), [ids, offs](Tape& t, const Node& n) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Mat& g = t.grad_at(ids[k]);
      g += n.grad.middleCols(offs[k], g.cols());
    }
  });
}

Var Tape::slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
  if (r0 < 0 || n < 1 || r0 + n > a.rows())
    throw InvariantError("tape slice_rows: out of range");
  auto ai = a.id_;
  return make(a.val().middleRows(r0, n), [ai, r0, n](Tape& t, const Node& nd) {
    t.grad_at(ai).middleRows(r0, n) += nd.grad;
  });
}

Var Tape::slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
  if (c0 < 0 || n < 1 || c0 + n > a.cols())
    throw InvariantError("tape slice_cols: out of range");
  auto ai = a.id_;
  return make(a.val().middleCols(c0, n), [ai, c0, n](Tape& t, const Node& nd) {
    t.grad_at(ai).middleCols(c0, n) += nd.grad;
  });
}

Var Tape::row_select(Var table, std::vector<Eigen::Index> ids) {
  for (Eigen::Index id : ids)
    if (id < 0 || id >= table.rows())
      throw InvariantError("tape row_select: id out of range");
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(i) = table.val().row(ids[i]);
  auto ti = table.id_;
  return make(std::move(out), [ti, ids = std::move(ids)](Tape& t, const Node& n) {
    Mat& g = t.grad_at(ti);
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(i);
  });
}

Var Tape::repeat_rows(Var a, std::vector<Eigen::Index> counts) {
  if (static_cast<Eigen::Index>(counts.size()) != a.rows())
    throw InvariantError("tape repeat_rows: counts size != rows");
  Eigen::Index total = 0;
  for (Eigen::Index c : counts) {
    if (c < 0) throw InvariantError("tape repeat_rows: negative count");
    total += c;
  }
  if (total == 0) throw InvariantError("tape repeat_rows: zero total rows");
  Mat out(total, a.cols());
  Eigen::Index r = 0;
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    for (Eigen::Index k = 0; k < counts[p]; ++k) out.row(r++) = a.val().row(p);
  auto ai = a.id_;
  return make(std::move(out), [ai, counts = std::move(counts)](Tape& t, const Node& n) {
    Mat& g = t.grad_at(ai);
    Eigen::Index r = 0;
    for (Eigen::Index p = 0; p < g.rows(); ++p)
      for (Eigen::Index k = 0; k < counts[p]; ++k) g.row(p) += n.grad.row(r++);
  });
}

Var Tape::mean_rows(Var a) {
  auto ai = a.id_;
  const double inv = 1.0 / static_cast<double>(a.rows());
  Mat out = a.val().colwise().mean();
  return make(std::move(out), [ai, inv](Tape& t, const Node& n) {
    t.grad_at(ai).rowwise() += RowVec(n.grad.row(0) * inv);
  });
}

Var Tape::mean_all(Var a) {
  auto ai = a.id_;
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  Mat out(1, 1);
  out(0, 0) = a.val().mean();
  return make(std::move(out), [ai, inv](Tape& t, const Node& n) {
    t.grad_at(ai).array() += n.grad(0, 0) * inv;
  });
}

Var Tape::tanh(Var a) {
  auto ai = a.id_;
  return make(a.val().array().tanh(), [ai](Tape& t, const Node& n) {
    t.grad_at(ai).array() += n.grad.array() * (1.0 - n.val.array().square());
  });
}

Var Tape::sigmoid(Var a) {
  auto ai = a.id_;
  Mat out = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  return make(std::move(out), [ai](Tape& t, const Node& n) {
    t.grad_at(ai).array() += n.grad.array() * n.val.array() * (1.0 - n.val.array());
  });
}

Var Tape::relu(Var a) {
  auto ai = a.id_;
  return make(a.val().cwiseMax(0.0), [ai](Tape& t, const Node& n) {
    t.grad_at(ai).array() +=
        n.grad.array() * (t.val_at(ai).array() > 0.0).cast<double>();
  });
}

Var Tape::dropout(Var a, double rate, Mode mode, Rng& rng) {
  if (rate <= 0.0 || mode == Mode::kEval) return a;
  if (rate >= 1.0) throw InvariantError("tape dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Mat mask(a.rows(), a.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = keep(rng) ? s : 0.0;
  auto ai = a.id_;
  Mat out = a.val().cwiseProduct(mask);
  return make(std::move(out),
              [ai, mask = std::move(mask)](Tape& t, const Node& n) {
                t.grad_at(ai) += n.grad.cwiseProduct(mask);
              });
}

Var Tape::softmax_rows(Var a) {
  BoolMat all = BoolMat::Constant(a.rows(), a.cols(), true);
  return masked_softmax_rows(a, std::move(all));
}

Var Tape::masked_softmax_rows(Var a, BoolMat visibility) {
  if (visibility.rows() != a.rows() || visibility.cols() != a.cols())
    throw InvariantError("tape masked_softmax: mask shape mismatch");
  Mat out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (visibility(r, c)) mx = std::max(mx, a.val()(r, c));
    if (!std::isfinite(mx))
      throw InvariantError("tape masked_softmax: row with no visible keys");
    double sum = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double w = visibility(r, c) ? std::exp(a.val()(r, c) - mx) : 0.0;
      out(r, c) = w;
      sum += w;
    }
    out.row(r) /= sum;
  }
  auto ai = a.id_;
  return make(std::move(out), [ai](Tape& t, const Node& n) {
    // dL/dl = p * (dL/dp - sum(p * dL/dp)); masked entries have p == 0.
    for (Eigen::Index r = 0; r < n.val.rows(); ++r) {
      const double dot = n.val.row(r).dot(n.grad.row(r));
      t.grad_at(ai).row(r).array() +=
          n.val.row(r).array() * (n.grad.row(r).array() - dot);
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
      bias.cols() != x.cols())
    throw InvariantError("tape layer_norm: gain/bias must be 1 x cols(x)");
  const Eigen::Index rows = x.rows(), cols = x.cols();
  Mat xhat(rows, cols);
  Vec inv(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.val().row(r).mean();
    const double var = (x.val().row(r).array() - mu).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.val().row(r).array() - mu) * inv(r);
  }
  Mat out = xhat;
  out.array().rowwise() *= gain.val().row(0).array();
  out.rowwise() += RowVec(bias.val().row(0));
  auto xi = x.id_, gi = gain.id_, bi = bias.id_;
  return make(std::move(out),
              [xi, gi, bi, xhat = std::move(xhat), inv = std::move(inv)](
                  Tape& t, const Node& n) {
                const Mat& g = t.val_at(gi);
                t.grad_at(bi) += n.grad.colwise().sum();
                t.grad_at(gi) += n.grad.cwiseProduct(xhat).colwise().sum();
                Mat dxhat = n.grad;
                dxhat.array().rowwise() *= g.row(0).array();
                Mat& dx = t.grad_at(xi);
                for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                  const double m1 = dxhat.row(r).mean();
                  const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                  dx.row(r).array() +=
                      inv(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                }
              });
}

Var Tape::gather_patches(Var x, IdxMat idx, Eigen::Index channels) {
  const Eigen::Index c = channels;
  if (x.cols() != c) throw InvariantError("tape gather_patches: channel mismatch");
  Mat out = Mat::Zero(idx.rows(), idx.cols() * c);
  for (Eigen::Index i = 0; i < idx.rows(); ++i)
    for (Eigen::Index j = 0; j < idx.cols(); ++j)
      if (idx(i, j) >= 0) out.block(i, j * c, 1, c) = x.val().row(idx(i, j));
  auto xi = x.id_;
  return make(std::move(out), [xi, idx = std::move(idx), c](Tape& t, const Node& n) {
    Mat& g = t.grad_at(xi);
    for (Eigen::Index i = 0; i < idx.rows(); ++i)
      for (Eigen::Index j = 0; j < idx.cols(); ++j)
        if (idx(i, j) >= 0) g.row(idx(i, j)) += n.grad.block(i, j * c, 1, c);
  });
}

Var Tape::group_rows(Var a, Eigen::Index group) {
  if (group < 1 || a.rows() % group != 0)
    throw InvariantError("tape group_rows: rows not divisible by group");
  const Eigen::Index out_rows = a.rows() / group, c = a.cols();
  Mat out(out_rows, group * c);
  for (Eigen::Index r = 0; r < out_rows; ++r)
    for (Eigen::Index w = 0; w < group; ++w)
      out.block(r, w * c, 1, c) = a.val().row(r * group + w);
  auto ai = a.id_;
  return make(std::move(out), [ai, group, c](Tape& t, const Node& n) {
    Mat& g = t.grad_at(ai);
    for (Eigen::Index r = 0; r < n.val.rows(); ++r)
      for (Eigen::Index w = 0; w < group; ++w)
        g.row(r * group + w) += n.grad.block(r, w * c, 1, c);
  });
}

Var Tape::mse_loss(Var a, Mat target) {
  if (target.rows() != a.rows() || target.cols() != a.cols())
    throw InvariantError("tape mse_loss: shape mismatch");
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  Mat out(1, 1);
  out(0, 0) = (a.val() - target).squaredNorm() * inv;
  auto ai = a.id_;
  return make(std::move(out),
              [ai, inv, target = std::move(target)](Tape& t, const Node& n) {
                t.grad_at(ai) +=
                    (2.0 * inv * n.grad(0, 0)) * (t.val_at(ai) - target);
              });
}

Var Tape::mae_loss(Var a, Mat target) {
  if (target.rows() != a.rows() || target.cols() != a.cols())
    throw InvariantError("tape mae_loss: shape mismatch");
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  Mat out(1, 1);
  out(0, 0) = (a.val() - target).cwiseAbs().sum() * inv;
  auto ai = a.id_;
  return make(std::move(out),
              [ai, inv, target = std::move(target)](Tape& t, const Node& n) {
                t.grad_at(ai).array() +=
                    inv * n.grad(0, 0) *
                    (t.val_at(ai) - target).array().sign();
              });
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw InvariantError("tape backward: foreign var");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw InvariantError("tape backward: loss must be scalar");
  for (Node& n : nodes_) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  nodes_[loss.id_].grad(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
  }
}

}  // namespace castts::nn
