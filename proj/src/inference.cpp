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

#include "castts/inference.hpp"

#include "castts/nn/checkpoint.hpp"

namespace castts {

std::vector<SynthesisResult> synthesize_long_form(
    Models& models, const Config& config, const ParagraphDocument& doc,
    const Corpus* corpus_for_gt, const InferenceOptions& options,
    std::vector<Vec>* predicted_styles) {
  if (predicted_styles) predicted_styles->clear();
  if (doc.sentences.empty())
    throw InvariantError("synthesize_long_form: empty document");
  if (options.ground_truth_prev && corpus_for_gt == nullptr)
    throw InvariantError(
        "synthesize_long_form: ground-truth previous mode needs a corpus");
  const int n = config.predictor.context_radius;
  const int d_style = config.extractor.d_style;

  std::vector<SynthesisResult> outputs;
  outputs.reserve(doc.sentences.size());
  for (int i = 0; i < static_cast<int>(doc.sentences.size()); ++i) {
    ContextWindow w = build_context_window(doc, i, n, d_style);
    for (int k = 0; k < n; ++k) {
      if (w.past_pad[k]) continue;
      const int prev_index = i - n + k;
      const MelSpectrogram* prev_mel = nullptr;
      MelSpectrogram gt_mel;
      auto ov = options.override_prev.find(prev_index);
      if (ov != options.override_prev.end()) {
        prev_mel = &ov->second;
      } else if (options.ground_truth_prev) {
        gt_mel = corpus_for_gt->load_mel(doc.sentences[prev_index]);
        prev_mel = &gt_mel;
      } else {
        prev_mel = &outputs[prev_index].mel;
      }
      w.prev_styles[k] = models.extractor->extract_style(*prev_mel).values;
    }
    const StyleEmbedding style =
        models.predictor->predict_style(w, *models.embedder);
    if (predicted_styles) predicted_styles->push_back(style.values);
    const std::vector<int> ids =
        models.acoustic->to_ids(doc.sentences[i].phonemes);
    outputs.push_back(models.acoustic->synthesize(ids, style, std::nullopt));
  }
  return outputs;
}

MelSpectrogram concat_features(const std::vector<MelSpectrogram>& mels,
                               int silence_frames, double floor_value) {
  if (mels.empty()) throw InvariantError("concat_features: empty input");
  if (silence_frames < 0)
    throw InvariantError("concat_features: negative silence length");
  const Eigen::Index n_mels = mels[0].n_mels();
  Eigen::Index total = 0;
  for (const auto& m : mels) {
    if (m.n_mels() != n_mels)
      throw InvariantError("concat_features: n_mels mismatch (" +
                           std::to_string(m.n_mels()) + " vs " +
                           std::to_string(n_mels) + ")");
    total += m.frames();
  }
  total += static_cast<Eigen::Index>(silence_frames) *
           static_cast<Eigen::Index>(mels.size() - 1);
  MelSpectrogram out;
  out.sample_rate_hz = mels[0].sample_rate_hz;
  out.values.resize(total, n_mels);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < mels.size(); ++i) {
    out.values.middleRows(r, mels[i].frames()) = mels[i].values;
    r += mels[i].frames();
    if (silence_frames > 0 && i + 1 < mels.size()) {
      out.values.middleRows(r, silence_frames).setConstant(floor_value);
      r += silence_frames;
    }
  }
  return out;
}

void load_pipeline_checkpoints(Models& models, const Config& config,
                               const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const auto stage1 = run_dir / "stage1";
  const auto stage2 = run_dir / "stage2";
  const auto stage3 = run_dir / "stage3";
  std::vector<nn::Parameter*> pe, pa, pp;
  models.extractor->params(pe);
  models.acoustic->params(pa);
  models.predictor->params(pp);
  if (!fs::exists(stage1 / "extractor.ckpt"))
    throw IoError("missing checkpoint: " + (stage1 / "extractor.ckpt").string());
  nn::load_checkpoint(stage1 / "extractor.ckpt", pe, config.extractor_hash());
  const std::uint64_t ac_hash =
      config.acoustic_hash(static_cast<int>(models.acoustic->inventory_size()));
  if (fs::exists(stage3 / "acoustic.ckpt"))
    nn::load_checkpoint(stage3 / "acoustic.ckpt", pa, ac_hash);
  else if (fs::exists(stage1 / "acoustic.ckpt"))
    nn::load_checkpoint(stage1 / "acoustic.ckpt", pa, ac_hash);
  else
    throw IoError("missing checkpoint: " + (stage1 / "acoustic.ckpt").string());
  if (fs::exists(stage3 / "predictor.ckpt"))
    nn::load_checkpoint(stage3 / "predictor.ckpt", pp, config.predictor_hash());
  else if (fs::exists(stage2 / "predictor.ckpt"))
    nn::load_checkpoint(stage2 / "predictor.ckpt", pp, config.predictor_hash());
  else
    throw IoError("missing checkpoint: " + (stage2 / "predictor.ckpt").string());
}

}  // namespace castts
