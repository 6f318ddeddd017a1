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
#include <optional>
#include <string>
#include <vector>

#include "castts/common.hpp"
#include "castts/config.hpp"

namespace castts {

struct MelSpectrogram {
  Mat values;  // frames x n_mels, log-magnitude
  int sample_rate_hz = 24000;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index n_mels() const { return values.cols(); }
};

struct StyleEmbedding {
  Vec values;
};

struct SentenceRecord {
  std::string id;
  std::string paragraph_id;
  int index_in_paragraph = 0;
  std::string text;
  std::vector<std::string> phonemes;
  std::vector<int> durations;  // frames per phoneme
  std::string mel_path;        // relative to the manifest directory
  std::string f0_path;         // optional; empty when absent

  bool is_pad() const { return id.empty(); }
  int total_frames() const;
  bool operator==(const SentenceRecord&) const = default;
};

struct ParagraphDocument {
  std::string paragraph_id;
  std::vector<SentenceRecord> sentences;

  bool operator==(const ParagraphDocument&) const = default;
};

/// Current sentence plus exactly N past / N future slots. Padded slots hold
/// empty records (pad flag true); prev_styles is aligned to `past` and holds
/// zero vectors until the caller fills the non-padded entries.
struct ContextWindow {
  SentenceRecord current;
  std::vector<SentenceRecord> past;
  std::vector<SentenceRecord> future;
  std::vector<Vec> prev_styles;
  std::vector<bool> past_pad;
  std::vector<bool> future_pad;
};

std::vector<ParagraphDocument> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ParagraphDocument>& docs);

ContextWindow build_context_window(const ParagraphDocument& doc, int i,
                                   int n_radius, int d_style);

MelSpectrogram read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const MelSpectrogram& mel);
/// Reads only (rows, cols) from the header.
std::pair<std::uint64_t, std::uint64_t> read_feature_header(
    const std::filesystem::path& path);

/// A loaded corpus with its base directory, so relative feature paths in
/// records can be resolved.
struct Corpus {
  std::filesystem::path base_dir;
  std::vector<ParagraphDocument> documents;

  MelSpectrogram load_mel(const SentenceRecord& rec) const;
  Vec load_f0(const SentenceRecord& rec) const;  // per-frame Hz, 0 = unvoiced
  std::vector<std::string> load_inventory() const;
  std::size_t sentence_count() const;
};

Corpus load_corpus(const std::filesystem::path& manifest_path);

/// Writes manifest.jsonl, inventory.txt, features/, f0/ and latents.jsonl
/// under out_dir. Deterministic in (config, seed). Each sentence's latent
/// style is a smooth function of its own words, its neighbours' words and
/// the previous sentence's latent, so both the extractor and the predictor
/// have a recoverable signal. Latents are diagnostics only.
void generate_toy_corpus(const CorpusConfig& config, std::uint64_t seed,
                         const std::filesystem::path& out_dir);

/// Diagnostic latent styles written by the generator, keyed by sentence id.
std::vector<std::pair<std::string, Vec>> load_latents(
    const std::filesystem::path& corpus_dir);

}  // namespace castts
