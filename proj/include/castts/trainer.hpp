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

#include <filesystem>
#include <memory>
#include <vector>

#include "castts/acoustic_model.hpp"
#include "castts/config.hpp"
#include "castts/corpus.hpp"
#include "castts/style_extractor.hpp"
#include "castts/style_predictor.hpp"
#include "castts/text_embedder.hpp"

namespace castts {

/// The full model set built from one config and one phoneme inventory.
/// Construction is deterministic in config.seed.
struct Models {
  std::unique_ptr<TextEmbedder> embedder;
  std::unique_ptr<StyleExtractor> extractor;
  std::unique_ptr<StylePredictor> predictor;
  std::unique_ptr<AcousticModel> acoustic;

  Models(const Config& config, std::vector<std::string> inventory);
};

struct TrainingExample {
  int doc_index = 0;
  int sent_index = 0;
  std::string id;
  std::vector<int> phoneme_ids;
  VarianceTargets targets;
  MelSpectrogram mel;
};

/// Orchestrates the three training steps: (1) joint acoustic model + style
/// extractor, (2) predictor distillation against frozen-extractor targets,
/// (3) joint acoustic + predictor fine-tuning at a lower learning rate.
/// Every stage persists checkpoints and a line-delimited loss log under the
/// run directory; runs are deterministic in (corpus, config, seed).
class Trainer {
 public:
  Trainer(const Config& config, Corpus corpus,
          std::filesystem::path run_dir);

  void run_stage1(bool resume = false);
  void run_stage2(bool resume = false);
  void run_stage3(bool resume = false);
  void run_all();

  /// Mean style MSE of the predictor against extractor targets over the
  /// held-out sentences, with previous styles from ground-truth mels.
  double held_out_style_mse();

  Models& models() { return models_; }
  const Config& config() const { return cfg_; }
  const std::vector<TrainingExample>& train_set() const { return train_; }
  const std::vector<TrainingExample>& validation_set() const { return val_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

  ContextWindow window_for(const TrainingExample& ex,
                           const std::vector<std::vector<Vec>>& style_cache) const;
  /// Evaluation-mode extractor styles for every sentence, indexed
  /// [doc][sentence].
  std::vector<std::vector<Vec>> build_style_cache();

 private:
  void prepare_examples();
  void log_loss(int stage, std::int64_t iteration,
                const std::vector<std::pair<std::string, double>>& parts);
  void ensure_finite(double loss, int stage, std::int64_t iteration,
                     const std::string& sentence_id) const;

  Config cfg_;
  Corpus corpus_;
  std::filesystem::path run_dir_;
  Models models_;
  std::vector<TrainingExample> train_;
  std::vector<TrainingExample> val_;
};

}  // namespace castts
