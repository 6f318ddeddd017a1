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

#include "castts/style_extractor.hpp"

#include <cmath>

namespace castts {

using nn::Tape;
using nn::Var;

StyleExtractor::StyleExtractor(const Config& config, Rng& rng)
    : cfg_(config.extractor), n_mels_(config.corpus.n_mels),
      config_hash_(config.extractor_hash()) {
  if (cfg_.conv_channels.empty())
    throw InvariantError("style extractor: need at least one conv layer");
  if (cfg_.d_style % cfg_.heads != 0)
    throw InvariantError("style extractor: d_style must divide by heads");
  if (cfg_.n_tokens < 1)
    throw InvariantError("style extractor: n_tokens must be >= 1");

  int in_ch = 1;
  for (std::size_t i = 0; i < cfg_.conv_channels.size(); ++i) {
    convs_.emplace_back("extractor.conv" + std::to_string(i), in_ch,
                        cfg_.conv_channels[i], cfg_.conv_kernel,
                        cfg_.conv_stride, rng);
    in_ch = cfg_.conv_channels[i];
  }

  // Mel-axis extent after the strided stack; GRU consumes all channels of
  // one time step as a single row.
  Eigen::Index mw = n_mels_;
  for (std::size_t i = 0; i < convs_.size(); ++i)
    mw = (mw + 2 * (cfg_.conv_kernel / 2) - cfg_.conv_kernel) / cfg_.conv_stride + 1;
  gru_ = nn::Gru("extractor.gru", mw * cfg_.conv_channels.back(),
                 cfg_.gru_width, rng);

  const int d_token = cfg_.d_style / cfg_.heads;
  token_bank_ = nn::Parameter(
      "extractor.token_bank",
      nn::normal_init(cfg_.n_tokens, d_token, 0.5, rng));
  wq_ = nn::Linear("extractor.attn.wq", cfg_.gru_width, cfg_.d_style, rng);
  wk_ = nn::Linear("extractor.attn.wk", d_token, cfg_.d_style, rng);
  wv_ = nn::Linear("extractor.attn.wv", d_token, cfg_.d_style, rng);
}

Var StyleExtractor::encode_reference(Tape& t, const MelSpectrogram& mel) {
  if (mel.frames() < 1)
    throw InvariantError("encode_reference: mel has zero frames");
  if (mel.n_mels() != n_mels_)
    throw InvariantError("encode_reference: mel has " +
                         std::to_string(mel.n_mels()) + " bins, config says " +
                         std::to_string(n_mels_));
  // Position-major single-channel map: row i*W + j <- mel(i, j).
  Mat x(mel.frames() * mel.n_mels(), 1);
  for (Eigen::Index i = 0; i < mel.frames(); ++i)
    for (Eigen::Index j = 0; j < mel.n_mels(); ++j)
      x(i * mel.n_mels() + j, 0) = mel.values(i, j);
  Var h = t.constant(std::move(x));
  Eigen::Index height = mel.frames(), width = mel.n_mels();
  for (auto& conv : convs_) {
    Eigen::Index h2 = 0, w2 = 0;
    h = t.relu(conv.forward(t, h, height, width, &h2, &w2));
    height = h2;
    width = w2;
  }
  return gru_.forward_last(t, t.group_rows(h, width));
}

Var StyleExtractor::attend_style_tokens(Tape& t, Var ref, Mat* attn_out) {
  if (ref.rows() != 1 || ref.cols() != cfg_.gru_width)
    throw InvariantError("attend_style_tokens: reference must be 1 x " +
                         std::to_string(cfg_.gru_width));
  const Eigen::Index dh = cfg_.d_style / cfg_.heads;
  Var bank = t.tanh(t.param(token_bank_));
  Var q = wq_.forward(t, ref);
  Var k = wk_.forward(t, bank);
  Var v = wv_.forward(t, bank);
  if (attn_out) attn_out->resize(cfg_.heads, cfg_.n_tokens);
  std::vector<Var> heads;
  for (int h = 0; h < cfg_.heads; ++h) {
    Var qh = t.slice_cols(q, h * dh, dh);
    Var kh = t.slice_cols(k, h * dh, dh);
    Var vh = t.slice_cols(v, h * dh, dh);
    Var logits = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(dh));
    Var probs = t.softmax_rows(logits);
    if (attn_out) attn_out->row(h) = probs.val().row(0);
    heads.push_back(t.matmul(probs, vh));
  }
  return t.concat_cols(heads);
}

Var StyleExtractor::extract_style_var(Tape& t, const MelSpectrogram& mel) {
  return attend_style_tokens(t, encode_reference(t, mel));
}

StyleEmbedding StyleExtractor::extract_style(const MelSpectrogram& mel) {
  Tape t;
  const Var out = extract_style_var(t, mel);
  StyleEmbedding e;
  e.values = out.val().row(0).transpose();
  return e;
}

void StyleExtractor::params(std::vector<nn::Parameter*>& out) {
  for (auto& conv : convs_) conv.params(out);
  gru_.params(out);
  out.push_back(&token_bank_);
  wq_.params(out);
  wk_.params(out);
  wv_.params(out);
}

}  // namespace castts
