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

namespace castts {

/// Utterance-level style embedding extractor: a strided convolution stack
/// over the mel-spectrogram summarised by a GRU (reference encoder), then
/// multi-head attention over a learned, tanh-squashed token bank whose
/// per-head mixtures concatenate into the style embedding.
class StyleExtractor {
 public:
  StyleExtractor(const Config& config, Rng& rng);

  /// Variable-length mel -> fixed 1 x d_ref reference vector.
  nn::Var encode_reference(nn::Tape& t, const MelSpectrogram& mel);
  /// Reference vector -> 1 x d_style mixture over the token bank. When
  /// `attn_out` is given, per-head attention weights land there (heads x
  /// n_tokens), each row summing to 1.
  nn::Var attend_style_tokens(nn::Tape& t, nn::Var ref, Mat* attn_out = nullptr);
  nn::Var extract_style_var(nn::Tape& t, const MelSpectrogram& mel);

  /// Evaluation-mode convenience; deterministic.
  StyleEmbedding extract_style(const MelSpectrogram& mel);

  void params(std::vector<nn::Parameter*>& out);
  int d_style() const { return cfg_.d_style; }
  int d_ref() const { return cfg_.gru_width; }
  std::uint64_t config_hash() const { return config_hash_; }

 private:
  ExtractorConfig cfg_;
  int n_mels_;
  std::uint64_t config_hash_;
  std::vector<nn::Conv2d> convs_;
  nn::Gru gru_;
  nn::Parameter token_bank_;  // n_tokens x d_token
  nn::Linear wq_, wk_, wv_;
};

}  // namespace castts
