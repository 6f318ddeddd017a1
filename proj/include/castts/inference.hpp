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

#include <map>
#include <vector>

#include "castts/trainer.hpp"

namespace castts {

struct InferenceOptions {
  /// Replacement "previous speech" features keyed by sentence index; when a
  /// past slot's sentence has an override, its style is extracted from the
  /// override instead of the synthesized (or ground-truth) mel.
  std::map<int, MelSpectrogram> override_prev;
  /// Extract previous styles from ground-truth mels instead of the model's
  /// own output (oracle evaluation mode).
  bool ground_truth_prev = false;
};

/// Sentence-by-sentence long-form synthesis with style feedback. Sentence
/// i's window is zero-padded at paragraph boundaries; its previous styles
/// come from already-synthesized speech (or overrides / ground truth).
/// Future context enters as text only. No ground-truth mel of the current
/// or future sentences is read.
std::vector<SynthesisResult> synthesize_long_form(
    Models& models, const Config& config, const ParagraphDocument& doc,
    const Corpus* corpus_for_gt, const InferenceOptions& options,
    std::vector<Vec>* predicted_styles = nullptr);

/// Row-wise concatenation with optional all-floor silence rows between
/// consecutive sentences.
MelSpectrogram concat_features(const std::vector<MelSpectrogram>& mels,
                               int silence_frames, double floor_value);

/// Loads the newest trained parameters: stage-3 checkpoints when present,
/// otherwise stage-2 predictor and stage-1 acoustic; extractor always from
/// stage 1.
void load_pipeline_checkpoints(Models& models, const Config& config,
                               const std::filesystem::path& run_dir);

}  // namespace castts
