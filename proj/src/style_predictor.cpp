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

#include "castts/style_predictor.hpp"

#include <algorithm>

namespace castts {

using nn::BoolMat;
using nn::Mode;
using nn::Tape;
using nn::Var;

BoolMat build_mixture_attention_mask(int n_context, int n_style) {
  if (n_context < 1 || n_style < 1)
    throw InvariantError("mixture attention mask: counts must be positive");
  const int len = n_context + n_style;
  BoolMat vis(len, len);
  for (int q = 0; q < len; ++q)
    for (int k = 0; k < len; ++k) {
      if (q < n_context)
        vis(q, k) = k < n_context;
      else
        vis(q, k) = k < n_context || k <= q;
    }
  return vis;
}

FusionLayout make_fusion_layout(int n_radius, bool use_prev_styles,
                                bool mixture_mask, int segment_index,
                                int max_segment_id) {
  if (n_radius < 0) throw InvariantError("fusion layout: negative radius");
  if (segment_index < 0) throw InvariantError("fusion layout: negative segment");
  FusionLayout layout;
  layout.n_context = 2 * n_radius + 1;
  layout.n_style = use_prev_styles ? n_radius + 1 : 1;
  const Eigen::Index len = layout.length();
  const Eigen::Index seg =
      std::min<Eigen::Index>(segment_index, max_segment_id);
  layout.segment_ids.assign(len, seg);
  // Context tokens at offsets -N..N.
  for (int o = -n_radius; o <= n_radius; ++o) {
    layout.category_ids.push_back(0);
    layout.position_ids.push_back(o + n_radius);
  }
  // Style tokens at offsets -N..-1 share their sentence's position id.
  if (use_prev_styles)
    for (int o = -n_radius; o <= -1; ++o) {
      layout.category_ids.push_back(1);
      layout.position_ids.push_back(o + n_radius);
    }
  // The prediction placeholder is speech-side at the current sentence's id.
  layout.category_ids.push_back(1);
  layout.position_ids.push_back(n_radius);

  if (mixture_mask)
    layout.mask = build_mixture_attention_mask(layout.n_context, layout.n_style);
  else
    layout.mask = BoolMat::Constant(len, len, true);
  return layout;
}

StylePredictor::StylePredictor(const Config& config, Rng& rng)
    : cfg_(config.predictor), d_word_(config.embedder.d_word),
      d_style_(config.extractor.d_style),
      config_hash_(config.predictor_hash()) {
  const int d = cfg_.d_model;
  input_proj_ = nn::Linear("predictor.input_proj", d_word_, d, rng);
  cls_ = nn::Parameter("predictor.cls", nn::normal_init(1, d, 0.02, rng));
  word_pos_ = nn::PositionalEncoding("predictor.word_pos", cfg_.max_words, d,
                                     cfg_.learned_positions, rng);
  sentence_encoder_ =
      nn::TransformerStack("predictor.sentence", cfg_.sentence_blocks, d,
                           cfg_.heads, cfg_.ffn_mult * d, cfg_.dropout, rng);
  style_proj_ = nn::Linear("predictor.style_proj", d_style_, d, rng);
  unk_ = nn::Parameter("predictor.unk", nn::normal_init(1, d, 0.02, rng));
  category_emb_ = nn::Embedding("predictor.category", 2, d, rng);
  fusion_pos_ = nn::PositionalEncoding("predictor.fusion_pos",
                                       2 * cfg_.context_radius + 1, d,
                                       cfg_.learned_positions, rng);
  segment_emb_ = nn::Embedding("predictor.segment", cfg_.max_segment_id + 1, d, rng);
  fusion_encoder_ =
      nn::TransformerStack("predictor.fusion", cfg_.fusion_blocks, d,
                           cfg_.heads, cfg_.ffn_mult * d, cfg_.dropout, rng);
  output_proj_ = nn::Linear("predictor.output_proj", d, d_style_, rng);
}

Var StylePredictor::encode_sentence(Tape& t, const Mat& words, Mode mode,
                                    Rng& rng) {
  if (words.rows() > 0 && words.cols() != d_word_)
    throw InvariantError("encode_sentence: word vectors must have length " +
                         std::to_string(d_word_));
  Var x = t.param(cls_);
  if (words.rows() > 0) {
    Var projected = input_proj_.forward(t, t.constant(words));
    x = t.concat_rows({x, projected});
  }
  x = t.add(x, word_pos_.forward(t, x.rows()));
  Var out = sentence_encoder_.forward(t, x, nullptr, mode, rng);
  return t.slice_rows(out, 0, 1);
}

Var StylePredictor::assemble_fusion_input(Tape& t,
                                          const std::vector<Var>& context_tokens,
                                          const std::vector<Var>& prev_styles,
                                          const FusionLayout& layout) {
  if (static_cast<int>(context_tokens.size()) != layout.n_context)
    throw InvariantError("assemble_fusion_input: expected " +
                         std::to_string(layout.n_context) + " context tokens");
  if (static_cast<int>(prev_styles.size()) != layout.n_style - 1)
    throw InvariantError("assemble_fusion_input: expected " +
                         std::to_string(layout.n_style - 1) + " style tokens");
  std::vector<Var> rows = context_tokens;
  if (!prev_styles.empty()) {
    Var styles = t.concat_rows(prev_styles);
    rows.push_back(style_proj_.forward(t, styles));
  }
  rows.push_back(t.param(unk_));
  Var tokens = t.concat_rows(rows);
  tokens = t.add(tokens, category_emb_.forward(t, layout.category_ids));
  tokens = t.add(tokens, fusion_pos_.select(t, layout.position_ids));
  tokens = t.add(tokens, segment_emb_.forward(t, layout.segment_ids));
  return tokens;
}

Var StylePredictor::encode_fusion(Tape& t, Var seq, const FusionLayout& layout,
                                  Mode mode, Rng& rng,
                                  std::vector<Mat>* attn_probs) {
  if (seq.rows() != layout.length())
    throw InvariantError("encode_fusion: sequence length " +
                         std::to_string(seq.rows()) + " != layout length " +
                         std::to_string(layout.length()));
  return fusion_encoder_.forward(t, seq, &layout.mask, mode, rng, attn_probs);
}

Var StylePredictor::predict_style_var(Tape& t, const ContextWindow& window,
                                      const TextEmbedder& embedder, Mode mode,
                                      Rng& rng) {
  const int n = cfg_.context_radius;
  if (static_cast<int>(window.past.size()) != n ||
      static_cast<int>(window.future.size()) != n)
    throw InvariantError("predict_style: window radius mismatch");

  std::vector<std::string> texts;
  texts.reserve(2 * n + 1);
  for (const auto& rec : window.past) texts.push_back(rec.text);
  texts.push_back(window.current.text);
  for (const auto& rec : window.future) texts.push_back(rec.text);
  const WordEmbeddingSequence words = embedder.embed_context(texts);

  auto padded = [&](int slot) {
    if (slot < n) return window.past_pad[slot];
    if (slot == n) return false;
    return window.future_pad[slot - n - 1];
  };

  std::vector<Var> context_tokens;
  for (int slot = 0; slot < 2 * n + 1; ++slot) {
    if (cfg_.hierarchical) {
      const Mat& w = padded(slot) ? Mat(0, d_word_) : words.sentences[slot];
      context_tokens.push_back(encode_sentence(t, w, mode, rng));
    } else {
      // Flat variant: mean-pooled word embeddings stand in for the
      // sentence encoder's CLS summaries.
      Mat pooled = padded(slot) ? Mat::Zero(1, d_word_)
                                : Mat(words.sentences[slot].colwise().mean());
      context_tokens.push_back(input_proj_.forward(t, t.constant(pooled)));
    }
  }

  std::vector<Var> prev_styles;
  if (cfg_.use_prev_styles) {
    for (int k = 0; k < n; ++k) {
      const Vec& s = window.prev_styles[k];
      if (s.size() != d_style_)
        throw InvariantError("predict_style: prev style has length " +
                             std::to_string(s.size()) + ", expected " +
                             std::to_string(d_style_));
      prev_styles.push_back(t.constant(s.transpose()));
    }
  }

  const FusionLayout layout =
      make_fusion_layout(n, cfg_.use_prev_styles, cfg_.mixture_mask,
                         window.current.index_in_paragraph, cfg_.max_segment_id);
  Var seq = assemble_fusion_input(t, context_tokens, prev_styles, layout);
  Var encoded = encode_fusion(t, seq, layout, mode, rng);
  Var unk_out = t.slice_rows(encoded, layout.length() - 1, 1);
  return output_proj_.forward(t, unk_out);
}

StyleEmbedding StylePredictor::predict_style(const ContextWindow& window,
                                             const TextEmbedder& embedder) {
  Tape t;
  Rng rng(0);  // eval mode draws nothing
  const Var out = predict_style_var(t, window, embedder, Mode::kEval, rng);
  StyleEmbedding e;
  e.values = out.val().row(0).transpose();
  if (!e.values.allFinite())
    throw InvariantError("predict_style: non-finite output");
  return e;
}

void StylePredictor::params(std::vector<nn::Parameter*>& out) {
  input_proj_.params(out);
  out.push_back(&cls_);
  word_pos_.params(out);
  sentence_encoder_.params(out);
  style_proj_.params(out);
  out.push_back(&unk_);
  category_emb_.params(out);
  fusion_pos_.params(out);
  segment_emb_.params(out);
  fusion_encoder_.params(out);
  output_proj_.params(out);
}

}  // namespace castts
