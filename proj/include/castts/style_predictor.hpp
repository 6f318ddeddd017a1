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

#include <vector>

#include "castts/config.hpp"
#include "castts/corpus.hpp"
#include "castts/nn/modules.hpp"
#include "castts/text_embedder.hpp"

namespace castts {

/// Visibility matrix for the fusion context encoder. The first `n_context`
/// tokens are text-side and attend bidirectionally among themselves only;
/// the remaining `n_style` tokens (previous styles, then the prediction
/// placeholder as the final one) attend to every context token and causally
/// to style-side tokens up to themselves.
nn::BoolMat build_mixture_attention_mask(int n_context, int n_style);

/// Token bookkeeping for one fusion-encoder input: category / position /
/// segment ids per token plus the attention mask.
struct FusionLayout {
  int n_context = 0;
  int n_style = 0;  // previous styles plus the prediction placeholder
  std::vector<Eigen::Index> category_ids;  // 0 text-side, 1 speech-side
  std::vector<Eigen::Index> position_ids;
  std::vector<Eigen::Index> segment_ids;
  nn::BoolMat mask;

  Eigen::Index length() const { return n_context + n_style; }
};

/// Layout for a window of radius N around paragraph position
/// `segment_index` (clipped to `max_segment_id`). Position ids tie each
/// sentence's context token to its style token: context offset o and style
/// offset o both map to o+N, and the placeholder takes the current
/// sentence's id N.
FusionLayout make_fusion_layout(int n_radius, bool use_prev_styles,
                                bool mixture_mask, int segment_index,
                                int max_segment_id);

class StylePredictor {
 public:
  StylePredictor(const Config& config, Rng& rng);

  /// Sentence encoder over [CLS] + words (full bidirectional attention,
  /// intra-sentence positions); returns the CLS output. `words` may have
  /// zero rows (padded sentence).
  nn::Var encode_sentence(nn::Tape& t, const Mat& words, nn::Mode mode,
                          Rng& rng);

  /// Sums token values with category, position and segment embeddings per
  /// the layout. `context_tokens` are 1 x d_model each; `prev_styles` are
  /// 1 x d_style each and pass through the learned style projection.
  nn::Var assemble_fusion_input(nn::Tape& t,
                                const std::vector<nn::Var>& context_tokens,
                                const std::vector<nn::Var>& prev_styles,
                                const FusionLayout& layout);

  /// Fusion context encoder; every attention layer applies layout.mask.
  nn::Var encode_fusion(nn::Tape& t, nn::Var seq, const FusionLayout& layout,
                        nn::Mode mode, Rng& rng,
                        std::vector<Mat>* attn_probs = nullptr);

  /// Full pipeline for one context window; output is 1 x d_style.
  nn::Var predict_style_var(nn::Tape& t, const ContextWindow& window,
                            const TextEmbedder& embedder, nn::Mode mode,
                            Rng& rng);

  /// Evaluation-mode convenience; deterministic.
  StyleEmbedding predict_style(const ContextWindow& window,
                               const TextEmbedder& embedder);

  void params(std::vector<nn::Parameter*>& out);
  const PredictorConfig& config() const { return cfg_; }
  int d_style() const { return d_style_; }
  std::uint64_t config_hash() const { return config_hash_; }

 private:
  PredictorConfig cfg_;
  int d_word_ = 0;
  int d_style_ = 0;
  std::uint64_t config_hash_ = 0;

  nn::Linear input_proj_;   // d_word -> d_model (words; also pooled sentences)
  nn::Parameter cls_;       // 1 x d_model
  nn::PositionalEncoding word_pos_;
  nn::TransformerStack sentence_encoder_;

  nn::Linear style_proj_;   // d_style -> d_model
  nn::Parameter unk_;       // 1 x d_model
  nn::Embedding category_emb_;
  nn::PositionalEncoding fusion_pos_;
  nn::Embedding segment_emb_;
  nn::TransformerStack fusion_encoder_;
  nn::Linear output_proj_;  // d_model -> d_style
};

}  // namespace castts
