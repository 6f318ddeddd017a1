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

#include "castts/acoustic_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace castts {

using nn::Mode;
using nn::Tape;
using nn::Var;

Mat length_regulate(const Mat& states, const std::vector<int>& durations) {
  if (static_cast<Eigen::Index>(durations.size()) != states.rows())
    throw InvariantError("length_regulate: durations size != state count");
  Eigen::Index total = 0;
  for (int d : durations) {
    if (d < 0) throw InvariantError("length_regulate: negative duration");
    total += d;
  }
  if (total == 0) throw InvariantError("length_regulate: zero total duration");
  Mat out(total, states.cols());
  Eigen::Index r = 0;
  for (Eigen::Index p = 0; p < states.rows(); ++p)
    for (int k = 0; k < durations[p]; ++k) out.row(r++) = states.row(p);
  return out;
}

namespace {

std::vector<Eigen::Index> to_index(const std::vector<int>& durations) {
  std::vector<Eigen::Index> out(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) out[i] = durations[i];
  return out;
}

Vec log1p_durations(const std::vector<int>& durations) {
  Vec out(static_cast<Eigen::Index>(durations.size()));
  for (std::size_t i = 0; i < durations.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = std::log1p(static_cast<double>(durations[i]));
  return out;
}

}  // namespace

AcousticModel::AcousticModel(const Config& config,
                             std::vector<std::string> inventory, Rng& rng)
    : cfg_(config.acoustic), n_mels_(config.corpus.n_mels),
      sample_rate_hz_(config.corpus.sample_rate_hz),
      inventory_(std::move(inventory)),
      config_hash_(config.acoustic_hash(static_cast<int>(inventory_.size()))) {
  if (inventory_.empty())
    throw InvariantError("acoustic model: empty phoneme inventory");
  const int d = cfg_.d_model;
  const auto v = static_cast<Eigen::Index>(inventory_.size());
  phoneme_emb_ = nn::Embedding("acoustic.phoneme", v, d, rng);
  enc_pos_ = nn::PositionalEncoding("acoustic.enc_pos", cfg_.max_phonemes, d,
                                    true, rng);
  encoder_ = nn::TransformerStack("acoustic.encoder", cfg_.encoder_blocks, d,
                                  cfg_.heads, cfg_.ffn_mult * d, cfg_.dropout,
                                  rng);
  style_proj_ = nn::Linear("acoustic.style_proj", config.extractor.d_style, d, rng);

  const int h = cfg_.variance_hidden;
  dur_conv1_ = nn::Conv1d("acoustic.dur.conv1", d, h, 3, rng);
  dur_conv2_ = nn::Conv1d("acoustic.dur.conv2", h, h, 3, rng);
  dur_out_ = nn::Linear("acoustic.dur.out", h, 1, rng);
  pitch_conv1_ = nn::Conv1d("acoustic.pitch.conv1", d, h, 3, rng);
  pitch_conv2_ = nn::Conv1d("acoustic.pitch.conv2", h, h, 3, rng);
  pitch_out_ = nn::Linear("acoustic.pitch.out", h, 1, rng);
  energy_conv1_ = nn::Conv1d("acoustic.energy.conv1", d, h, 3, rng);
  energy_conv2_ = nn::Conv1d("acoustic.energy.conv2", h, h, 3, rng);
  energy_out_ = nn::Linear("acoustic.energy.out", h, 1, rng);
  pitch_emb_ = nn::Embedding("acoustic.pitch_bins", cfg_.pitch_bins, d, rng);
  energy_emb_ = nn::Embedding("acoustic.energy_bins", cfg_.energy_bins, d, rng);

  dec_pos_ = nn::PositionalEncoding("acoustic.dec_pos", cfg_.max_frames, d,
                                    true, rng);
  decoder_ = nn::TransformerStack("acoustic.decoder", cfg_.decoder_blocks, d,
                                  cfg_.heads, cfg_.ffn_mult * d, cfg_.dropout,
                                  rng);
  mel_out_ = nn::Linear("acoustic.mel_out", d, n_mels_, rng);
}

std::vector<int> AcousticModel::to_ids(
    const std::vector<std::string>& phonemes) const {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < inventory_.size(); ++i)
    index.emplace(inventory_[i], static_cast<int>(i));
  std::vector<int> ids;
  ids.reserve(phonemes.size());
  for (const std::string& p : phonemes) {
    auto it = index.find(p);
    if (it == index.end())
      throw InvariantError("phoneme '" + p + "' not in inventory");
    ids.push_back(it->second);
  }
  return ids;
}

double AcousticModel::normalize_pitch(double hz) const {
  const double t = (hz - cfg_.pitch_min_hz) / (cfg_.pitch_max_hz - cfg_.pitch_min_hz);
  return std::clamp(t, 0.0, 1.0);
}

double AcousticModel::normalize_energy(double e) const {
  const double t = (e - cfg_.energy_min) / (cfg_.energy_max - cfg_.energy_min);
  return std::clamp(t, 0.0, 1.0);
}

Var AcousticModel::apply_style(Tape& t, Var encoder_out, Var style) {
  return t.add_rowvec(encoder_out, style_proj_.forward(t, style));
}

Var AcousticModel::encode_frames(Tape& t, const std::vector<int>& phoneme_ids,
                                 Var style, const VarianceTargets& used,
                                 Var* log_dur, Var* pitch, Var* energy,
                                 Mode mode, Rng& rng) {
  if (phoneme_ids.empty())
    throw InvariantError("acoustic model: empty phoneme sequence");
  std::vector<Eigen::Index> ids(phoneme_ids.begin(), phoneme_ids.end());
  Var x = phoneme_emb_.forward(t, ids);
  x = t.add(x, enc_pos_.forward(t, x.rows()));
  x = encoder_.forward(t, x, nullptr, mode, rng);
  Var styled = apply_style(t, x, style);

  *log_dur = dur_out_.forward(
      t, t.relu(dur_conv2_.forward(t, t.relu(dur_conv1_.forward(t, styled)))));
  *pitch = pitch_out_.forward(
      t, t.relu(pitch_conv2_.forward(t, t.relu(pitch_conv1_.forward(t, styled)))));
  *energy = energy_out_.forward(
      t,
      t.relu(energy_conv2_.forward(t, t.relu(energy_conv1_.forward(t, styled)))));

  std::vector<Eigen::Index> pitch_ids(phoneme_ids.size()),
      energy_ids(phoneme_ids.size());
  for (std::size_t p = 0; p < phoneme_ids.size(); ++p) {
    pitch_ids[p] = std::min<Eigen::Index>(
        cfg_.pitch_bins - 1,
        static_cast<Eigen::Index>(normalize_pitch(used.pitch(p)) *
                                  cfg_.pitch_bins));
    energy_ids[p] = std::min<Eigen::Index>(
        cfg_.energy_bins - 1,
        static_cast<Eigen::Index>(normalize_energy(used.energy(p)) *
                                  cfg_.energy_bins));
  }
  Var conditioned = t.add(styled, pitch_emb_.forward(t, pitch_ids));
  conditioned = t.add(conditioned, energy_emb_.forward(t, energy_ids));

  Var frames = t.repeat_rows(conditioned, to_index(used.durations));
  frames = t.add(frames, dec_pos_.forward(t, frames.rows()));
  return mel_out_.forward(t, decoder_.forward(t, frames, nullptr, mode, rng));
}

AcousticModel::LossParts AcousticModel::training_loss(
    Tape& t, const std::vector<int>& phoneme_ids, Var style,
    const VarianceTargets& gt, const Mat& gt_mel, Mode mode, Rng& rng) {
  if (gt.durations.size() != phoneme_ids.size() ||
      gt.pitch.size() != static_cast<Eigen::Index>(phoneme_ids.size()) ||
      gt.energy.size() != static_cast<Eigen::Index>(phoneme_ids.size()))
    throw InvariantError("training_loss: variance target lengths mismatch");
  Var log_dur, pitch, energy;
  Var mel = encode_frames(t, phoneme_ids, style, gt, &log_dur, &pitch, &energy,
                          mode, rng);
  if (mel.rows() != gt_mel.rows())
    throw InvariantError("training_loss: ground-truth mel frame count " +
                         std::to_string(gt_mel.rows()) +
                         " != sum of durations " + std::to_string(mel.rows()));

  Vec pitch_norm(gt.pitch.size()), energy_norm(gt.energy.size());
  for (Eigen::Index p = 0; p < gt.pitch.size(); ++p) {
    pitch_norm(p) = normalize_pitch(gt.pitch(p));
    energy_norm(p) = normalize_energy(gt.energy(p));
  }

  LossParts parts;
  parts.mel = t.mae_loss(mel, gt_mel);
  parts.duration = t.mse_loss(log_dur, log1p_durations(gt.durations));
  parts.pitch = t.mse_loss(pitch, pitch_norm);
  parts.energy = t.mse_loss(energy, energy_norm);
  parts.total = t.add(t.add(parts.mel, parts.duration),
                      t.add(parts.pitch, parts.energy));
  return parts;
}

SynthesisResult AcousticModel::synthesize(
    const std::vector<int>& phoneme_ids, const StyleEmbedding& style,
    const std::optional<VarianceTargets>& forced) const {
  auto* self = const_cast<AcousticModel*>(this);  // tape reads params only
  Tape t;
  Rng rng(0);
  Var style_var = t.constant(style.values.transpose());

  // First pass gets the variance predictions; the teacher-forced path then
  // reuses them (or the given targets) for binning and length regulation.
  VarianceTargets used;
  if (forced) {
    used = *forced;
    if (used.durations.size() != phoneme_ids.size())
      throw InvariantError("synthesize: forced durations length mismatch");
  } else {
    // Probe with unit durations and neutral variance values to read the
    // predictors; the conditioning embeddings do not affect them.
    VarianceTargets probe;
    probe.durations.assign(phoneme_ids.size(), 1);
    probe.pitch = Vec::Zero(static_cast<Eigen::Index>(phoneme_ids.size()));
    probe.energy = Vec::Zero(static_cast<Eigen::Index>(phoneme_ids.size()));
    Tape probe_tape;
    Var probe_style = probe_tape.constant(style.values.transpose());
    Var log_dur, pitch, energy;
    self->encode_frames(probe_tape, phoneme_ids, probe_style, probe, &log_dur,
                        &pitch, &energy, Mode::kEval, rng);
    used.durations.resize(phoneme_ids.size());
    used.pitch.resize(static_cast<Eigen::Index>(phoneme_ids.size()));
    used.energy.resize(static_cast<Eigen::Index>(phoneme_ids.size()));
    for (std::size_t p = 0; p < phoneme_ids.size(); ++p) {
      const auto pi = static_cast<Eigen::Index>(p);
      // Round half up in the frame domain, keep every phoneme audible.
      const double frames = std::expm1(log_dur.val()(pi, 0));
      used.durations[p] = std::max(1, static_cast<int>(std::floor(frames + 0.5)));
      const double pn = std::clamp(pitch.val()(pi, 0), 0.0, 1.0);
      used.pitch(pi) =
          cfg_.pitch_min_hz + pn * (cfg_.pitch_max_hz - cfg_.pitch_min_hz);
      const double en = std::clamp(energy.val()(pi, 0), 0.0, 1.0);
      used.energy(pi) = cfg_.energy_min + en * (cfg_.energy_max - cfg_.energy_min);
    }
  }

  Var log_dur, pitch, energy;
  Var mel = self->encode_frames(t, phoneme_ids, style_var, used, &log_dur,
                                &pitch, &energy, Mode::kEval, rng);
  SynthesisResult result;
  result.mel.values = mel.val();
  result.mel.sample_rate_hz = sample_rate_hz_;
  result.variances = used;
  result.frame_f0.resize(mel.rows());
  Eigen::Index r = 0;
  for (std::size_t p = 0; p < phoneme_ids.size(); ++p)
    for (int k = 0; k < used.durations[p]; ++k)
      result.frame_f0(r++) = used.pitch(static_cast<Eigen::Index>(p));
  return result;
}

void AcousticModel::params(std::vector<nn::Parameter*>& out) {
  phoneme_emb_.params(out);
  enc_pos_.params(out);
  encoder_.params(out);
  style_proj_.params(out);
  dur_conv1_.params(out);
  dur_conv2_.params(out);
  dur_out_.params(out);
  pitch_conv1_.params(out);
  pitch_conv2_.params(out);
  pitch_out_.params(out);
  energy_conv1_.params(out);
  energy_conv2_.params(out);
  energy_out_.params(out);
  pitch_emb_.params(out);
  energy_emb_.params(out);
  dec_pos_.params(out);
  decoder_.params(out);
  mel_out_.params(out);
}

}  // namespace castts
