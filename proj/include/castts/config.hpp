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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "castts/common.hpp"

namespace castts {

/// Data-side settings shared by the toy corpus generator and the models.
struct CorpusConfig {
  int n_mels = 24;
  int sample_rate_hz = 24000;
  double mel_floor = -4.0;

  // Toy generator shape.
  int paragraphs = 30;
  int sentences_per_paragraph = 8;
  int vocab_size = 40;
  int words_min = 2;
  int words_max = 5;
  int phonemes_per_word_min = 1;
  int phonemes_per_word_max = 3;
  int frames_per_phoneme_min = 2;
  int frames_per_phoneme_max = 6;
  int phoneme_inventory = 24;
  double style_autocorrelation = 0.6;
  double style_noise = 0.08;
  double f0_base_hz = 140.0;
};

struct EmbedderConfig {
  std::string backend = "hash";  // "hash" | "external"
  int d_word = 32;
  int mixing_radius = 2;
  std::string external_command;        // adapter subprocess, set via config
  std::string external_pooling = "mean";  // "mean" | "first" sub-token pooling
};

struct ExtractorConfig {
  std::vector<int> conv_channels = {16, 16};
  int conv_kernel = 3;
  int conv_stride = 2;
  int gru_width = 16;
  int n_tokens = 4;
  int heads = 2;
  int d_style = 32;
};

struct PredictorConfig {
  int context_radius = 2;  // N past and N future sentences
  int d_model = 32;
  int sentence_blocks = 2;
  int fusion_blocks = 2;
  int heads = 4;
  int ffn_mult = 4;
  double dropout = 0.0;
  bool learned_positions = true;
  int max_words = 96;       // per-sentence capacity incl. [CLS]
  int max_segment_id = 32;  // paragraph positions clipped here
  // Ablation switches.
  bool mixture_mask = true;
  bool use_prev_styles = true;
  bool hierarchical = true;
};

struct AcousticConfig {
  int d_model = 32;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int heads = 2;
  int ffn_mult = 4;
  double dropout = 0.0;
  int variance_hidden = 32;
  int pitch_bins = 64;
  int energy_bins = 64;
  double pitch_min_hz = 60.0;
  double pitch_max_hz = 400.0;
  double energy_min = -4.0;
  double energy_max = 4.0;
  int max_phonemes = 256;
  int max_frames = 2048;
};

struct TrainingConfig {
  int batch_size = 16;
  std::int64_t iterations_stage1 = 180000;
  std::int64_t iterations_stage2 = 20000;
  std::int64_t iterations_stage3 = 30000;
  double iteration_scale = 0.01;  // single knob scaling all three stages
  double lr_stage1 = 1e-4;
  double lr_stage2 = 1e-4;
  double stage3_lr_factor = 0.1;  // stage 3 runs at lr_stage1 * factor
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double validation_fraction = 0.1;
  std::int64_t checkpoint_interval = 500;
  std::int64_t log_interval = 10;

  std::int64_t scaled(std::int64_t iterations) const {
    const auto n = static_cast<std::int64_t>(iterations * iteration_scale);
    return n > 1 ? n : 1;
  }
};

struct InferenceConfig {
  int silence_frames = 0;
  std::string prev_mode = "synthesized";  // "synthesized" | "ground_truth"
};

/// Whole-pipeline configuration. Default construction gives the desk-scale
/// (toy) preset; paper() switches the sizes reported for the full system.
struct Config {
  std::uint64_t seed = 1234;
  CorpusConfig corpus;
  EmbedderConfig embedder;
  ExtractorConfig extractor;
  PredictorConfig predictor;
  AcousticConfig acoustic;
  TrainingConfig training;
  InferenceConfig inference;

  static Config toy() { return Config{}; }
  static Config paper();
  static Config preset(const std::string& name);

  nlohmann::json to_json() const;
  /// Overlay keys present in `j` onto this config; unknown keys are errors.
  void apply_json(const nlohmann::json& j);
  void apply_file(const std::filesystem::path& path);
  /// Apply a dotted override like "training.batch_size=8".
  void apply_override(const std::string& key_eq_value);
  void save(const std::filesystem::path& path) const;

  std::uint64_t extractor_hash() const;
  std::uint64_t predictor_hash() const;
  std::uint64_t acoustic_hash(int phoneme_inventory_size) const;
};

}  // namespace castts
