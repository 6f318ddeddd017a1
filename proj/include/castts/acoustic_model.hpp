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

#include <optional>
#include <string>
#include <vector>

#include "castts/config.hpp"
#include "castts/corpus.hpp"
#include "castts/nn/modules.hpp"

namespace castts {

/// Per-phoneme variance values. Pitch in Hz (0 marks an unvoiced phoneme),
/// energy as mean log-mel level over the phoneme's frames.
struct VarianceTargets {
  std::vector<int> durations;
  Vec pitch;
  Vec energy;
};

struct SynthesisResult {
  MelSpectrogram mel;
  VarianceTargets variances;  // the values actually used (predicted or given)
  Vec frame_f0;               // per-frame Hz track expanded from pitch
};

/// Expands per-phoneme states to frame level by repeating row p
/// durations[p] times. Errors when the total is zero.
Mat length_regulate(const Mat& states, const std::vector<int>& durations);

/// Miniature FastSpeech 2: phoneme encoder, style conditioning by broadcast
/// addition, variance adaptor (duration / pitch / energy in normalised
/// domains), length regulator and mel decoder.
class AcousticModel {
 public:
  AcousticModel(const Config& config, std::vector<std::string> inventory,
                Rng& rng);

  std::vector<int> to_ids(const std::vector<std::string>& phonemes) const;

  /// encoder_out + project(style) broadcast to every phoneme position.
  nn::Var apply_style(nn::Tape& t, nn::Var encoder_out, nn::Var style);

  struct LossParts {
    nn::Var total, mel, duration, pitch, energy;
  };
  /// Teacher-forced loss: MAE on mel, MSE on log-duration and on the
  /// normalised pitch/energy predictions, equal weights. `style` is
  /// 1 x d_style and stays differentiable (extractor or predictor output).
  LossParts training_loss(nn::Tape& t, const std::vector<int>& phoneme_ids,
                          nn::Var style, const VarianceTargets& gt,
                          const Mat& gt_mel, nn::Mode mode, Rng& rng);

  /// Evaluation-mode synthesis. With `forced` the given durations/pitch/
  /// energy are used (teacher forcing); otherwise predictions are used,
  /// durations rounded half-up and clamped to >= 1.
  SynthesisResult synthesize(const std::vector<int>& phoneme_ids,
                             const StyleEmbedding& style,
                             const std::optional<VarianceTargets>& forced) const;

  void params(std::vector<nn::Parameter*>& out);
  int n_mels() const { return n_mels_; }
  std::size_t inventory_size() const { return inventory_.size(); }
  std::uint64_t config_hash() const { return config_hash_; }

  double normalize_pitch(double hz) const;
  double normalize_energy(double e) const;

 private:
  nn::Var encode_frames(nn::Tape& t, const std::vector<int>& phoneme_ids,
                        nn::Var style, const VarianceTargets& used,
                        nn::Var* log_dur, nn::Var* pitch, nn::Var* energy,
                        nn::Mode mode, Rng& rng);

  AcousticConfig cfg_;
  int n_mels_ = 0;
  int sample_rate_hz_ = 24000;
  std::vector<std::string> inventory_;
  std::uint64_t config_hash_ = 0;

  nn::Embedding phoneme_emb_;
  nn::PositionalEncoding enc_pos_;
  nn::TransformerStack encoder_;
  nn::Linear style_proj_;  // d_style -> d_model

  nn::Conv1d dur_conv1_, dur_conv2_;
  nn::Linear dur_out_;
  nn::Conv1d pitch_conv1_, pitch_conv2_;
  nn::Linear pitch_out_;
  nn::Conv1d energy_conv1_, energy_conv2_;
  nn::Linear energy_out_;
  nn::Embedding pitch_emb_, energy_emb_;

  nn::PositionalEncoding dec_pos_;
  nn::TransformerStack decoder_;
  nn::Linear mel_out_;
};

}  // namespace castts
