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

#include "castts/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace castts {

using nlohmann::json;

Config Config::paper() {
  Config c;
  c.corpus.n_mels = 80;
  c.extractor.conv_channels = {32, 32, 64, 64, 128, 128};
  c.extractor.gru_width = 128;
  c.extractor.n_tokens = 10;
  c.extractor.heads = 4;
  c.extractor.d_style = 256;
  c.embedder.backend = "external";
  c.embedder.d_word = 768;
  c.predictor.d_model = 256;
  c.predictor.sentence_blocks = 3;
  c.predictor.fusion_blocks = 3;
  c.predictor.dropout = 0.1;
  c.acoustic.d_model = 256;
  c.acoustic.encoder_blocks = 4;
  c.acoustic.decoder_blocks = 4;
  c.acoustic.dropout = 0.1;
  c.training.iteration_scale = 1.0;
  return c;
}

Config Config::preset(const std::string& name) {
  if (name == "toy") return toy();
  if (name == "paper") return paper();
  throw InvariantError("unknown config preset: " + name);
}

json Config::to_json() const {
  json j;
  j["seed"] = seed;
  j["corpus"] = {{"n_mels", corpus.n_mels},
                 {"sample_rate_hz", corpus.sample_rate_hz},
                 {"mel_floor", corpus.mel_floor},
                 {"paragraphs", corpus.paragraphs},
                 {"sentences_per_paragraph", corpus.sentences_per_paragraph},
                 {"vocab_size", corpus.vocab_size},
                 {"words_min", corpus.words_min},
                 {"words_max", corpus.words_max},
                 {"phonemes_per_word_min", corpus.phonemes_per_word_min},
                 {"phonemes_per_word_max", corpus.phonemes_per_word_max},
                 {"frames_per_phoneme_min", corpus.frames_per_phoneme_min},
                 {"frames_per_phoneme_max", corpus.frames_per_phoneme_max},
                 {"phoneme_inventory", corpus.phoneme_inventory},
                 {"style_autocorrelation", corpus.style_autocorrelation},
                 {"style_noise", corpus.style_noise},
                 {"f0_base_hz", corpus.f0_base_hz}};
  j["embedder"] = {{"backend", embedder.backend},
                   {"d_word", embedder.d_word},
                   {"mixing_radius", embedder.mixing_radius},
                   {"external_command", embedder.external_command},
                   {"external_pooling", embedder.external_pooling}};
  j["extractor"] = {{"conv_channels", extractor.conv_channels},
                    {"conv_kernel", extractor.conv_kernel},
                    {"conv_stride", extractor.conv_stride},
                    {"gru_width", extractor.gru_width},
                    {"n_tokens", extractor.n_tokens},
                    {"heads", extractor.heads},
                    {"d_style", extractor.d_style}};
  j["predictor"] = {{"context_radius", predictor.context_radius},
                    {"d_model", predictor.d_model},
                    {"sentence_blocks", predictor.sentence_blocks},
                    {"fusion_blocks", predictor.fusion_blocks},
                    {"heads", predictor.heads},
                    {"ffn_mult", predictor.ffn_mult},
                    {"dropout", predictor.dropout},
                    {"learned_positions", predictor.learned_positions},
                    {"max_words", predictor.max_words},
                    {"max_segment_id", predictor.max_segment_id},
                    {"mixture_mask", predictor.mixture_mask},
                    {"use_prev_styles", predictor.use_prev_styles},
                    {"hierarchical", predictor.hierarchical}};
  j["acoustic"] = {{"d_model", acoustic.d_model},
                   {"encoder_blocks", acoustic.encoder_blocks},
                   {"decoder_blocks", acoustic.decoder_blocks},
                   {"heads", acoustic.heads},
                   {"ffn_mult", acoustic.ffn_mult},
                   {"dropout", acoustic.dropout},
                   {"variance_hidden", acoustic.variance_hidden},
                   {"pitch_bins", acoustic.pitch_bins},
                   {"energy_bins", acoustic.energy_bins},
                   {"pitch_min_hz", acoustic.pitch_min_hz},
                   {"pitch_max_hz", acoustic.pitch_max_hz},
                   {"energy_min", acoustic.energy_min},
                   {"energy_max", acoustic.energy_max},
                   {"max_phonemes", acoustic.max_phonemes},
                   {"max_frames", acoustic.max_frames}};
  j["training"] = {{"batch_size", training.batch_size},
                   {"iterations_stage1", training.iterations_stage1},
                   {"iterations_stage2", training.iterations_stage2},
                   {"iterations_stage3", training.iterations_stage3},
                   {"iteration_scale", training.iteration_scale},
                   {"lr_stage1", training.lr_stage1},
                   {"lr_stage2", training.lr_stage2},
                   {"stage3_lr_factor", training.stage3_lr_factor},
                   {"adam_beta1", training.adam_beta1},
                   {"adam_beta2", training.adam_beta2},
                   {"adam_eps", training.adam_eps},
                   {"validation_fraction", training.validation_fraction},
                   {"checkpoint_interval", training.checkpoint_interval},
                   {"log_interval", training.log_interval}};
  j["inference"] = {{"silence_frames", inference.silence_frames},
                    {"prev_mode", inference.prev_mode}};
  return j;
}

namespace {

void check_known_keys(const json& provided, const json& reference,
                      const std::string& prefix) {
  for (auto it = provided.begin(); it != provided.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key()))
      throw IoError("unknown config key: " + path);
    if (it->is_object()) check_known_keys(*it, reference.at(it.key()), path);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void Config::apply_json(const json& j) {
  check_known_keys(j, to_json(), "");
  get_if(j, "seed", seed);
  if (j.contains("corpus")) {
    const json& s = j.at("corpus");
    get_if(s, "n_mels", corpus.n_mels);
    get_if(s, "sample_rate_hz", corpus.sample_rate_hz);
    get_if(s, "mel_floor", corpus.mel_floor);
    get_if(s, "paragraphs", corpus.paragraphs);
    get_if(s, "sentences_per_paragraph", corpus.sentences_per_paragraph);
    get_if(s, "vocab_size", corpus.vocab_size);
    get_if(s, "words_min", corpus.words_min);
    get_if(s, "words_max", corpus.words_max);
    get_if(s, "phonemes_per_word_min", corpus.phonemes_per_word_min);
    get_if(s, "phonemes_per_word_max", corpus.phonemes_per_word_max);
    get_if(s, "frames_per_phoneme_min", corpus.frames_per_phoneme_min);
    get_if(s, "frames_per_phoneme_max", corpus.frames_per_phoneme_max);
    get_if(s, "phoneme_inventory", corpus.phoneme_inventory);
    get_if(s, "style_autocorrelation", corpus.style_autocorrelation);
    get_if(s, "style_noise", corpus.style_noise);
    get_if(s, "f0_base_hz", corpus.f0_base_hz);
  }
  if (j.contains("embedder")) {
    const json& s = j.at("embedder");
    get_if(s, "backend", embedder.backend);
    get_if(s, "d_word", embedder.d_word);
    get_if(s, "mixing_radius", embedder.mixing_radius);
    get_if(s, "external_command", embedder.external_command);
    get_if(s, "external_pooling", embedder.external_pooling);
  }
  if (j.contains("extractor")) {
    const json& s = j.at("extractor");
    get_if(s, "conv_channels", extractor.conv_channels);
    get_if(s, "conv_kernel", extractor.conv_kernel);
    get_if(s, "conv_stride", extractor.conv_stride);
    get_if(s, "gru_width", extractor.gru_width);
    get_if(s, "n_tokens", extractor.n_tokens);
    get_if(s, "heads", extractor.heads);
    get_if(s, "d_style", extractor.d_style);
  }
  if (j.contains("predictor")) {
    const json& s = j.at("predictor");
    get_if(s, "context_radius", predictor.context_radius);
    get_if(s, "d_model", predictor.d_model);
    get_if(s, "sentence_blocks", predictor.sentence_blocks);
    get_if(s, "fusion_blocks", predictor.fusion_blocks);
    get_if(s, "heads", predictor.heads);
    get_if(s, "ffn_mult", predictor.ffn_mult);
    get_if(s, "dropout", predictor.dropout);
    get_if(s, "learned_positions", predictor.learned_positions);
    get_if(s, "max_words", predictor.max_words);
    get_if(s, "max_segment_id", predictor.max_segment_id);
    get_if(s, "mixture_mask", predictor.mixture_mask);
    get_if(s, "use_prev_styles", predictor.use_prev_styles);
    get_if(s, "hierarchical", predictor.hierarchical);
  }
  if (j.contains("acoustic")) {
    const json& s = j.at("acoustic");
    get_if(s, "d_model", acoustic.d_model);
    get_if(s, "encoder_blocks", acoustic.encoder_blocks);
    get_if(s, "decoder_blocks", acoustic.decoder_blocks);
    get_if(s, "heads", acoustic.heads);
    get_if(s, "ffn_mult", acoustic.ffn_mult);
    get_if(s, "dropout", acoustic.dropout);
    get_if(s, "variance_hidden", acoustic.variance_hidden);
    get_if(s, "pitch_bins", acoustic.pitch_bins);
    get_if(s, "energy_bins", acoustic.energy_bins);
    get_if(s, "pitch_min_hz", acoustic.pitch_min_hz);
    get_if(s, "pitch_max_hz", acoustic.pitch_max_hz);
    get_if(s, "energy_min", acoustic.energy_min);
    get_if(s, "energy_max", acoustic.energy_max);
    get_if(s, "max_phonemes", acoustic.max_phonemes);
    get_if(s, "max_frames", acoustic.max_frames);
  }
  if (j.contains("training")) {
    const json& s = j.at("training");
    get_if(s, "batch_size", training.batch_size);
    get_if(s, "iterations_stage1", training.iterations_stage1);
    get_if(s, "iterations_stage2", training.iterations_stage2);
    get_if(s, "iterations_stage3", training.iterations_stage3);
    get_if(s, "iteration_scale", training.iteration_scale);
    get_if(s, "lr_stage1", training.lr_stage1);
    get_if(s, "lr_stage2", training.lr_stage2);
    get_if(s, "stage3_lr_factor", training.stage3_lr_factor);
    get_if(s, "adam_beta1", training.adam_beta1);
    get_if(s, "adam_beta2", training.adam_beta2);
    get_if(s, "adam_eps", training.adam_eps);
    get_if(s, "validation_fraction", training.validation_fraction);
    get_if(s, "checkpoint_interval", training.checkpoint_interval);
    get_if(s, "log_interval", training.log_interval);
  }
  if (j.contains("inference")) {
    const json& s = j.at("inference");
    get_if(s, "silence_frames", inference.silence_frames);
    get_if(s, "prev_mode", inference.prev_mode);
  }
}

void Config::apply_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  apply_json(j);
}

void Config::apply_override(const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw IoError("override must look like section.key=value: " + key_eq_value);
  const std::string dotted = key_eq_value.substr(0, eq);
  const std::string raw = key_eq_value.substr(eq + 1);
  json leaf;
  try {
    leaf = json::parse(raw);
  } catch (const json::exception&) {
    leaf = raw;  // bare strings allowed without quotes
  }
  json j = leaf;
  std::string rest = dotted;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) {
      parts.push_back(rest);
      break;
    }
    parts.push_back(rest.substr(dot + 1));
    rest = rest.substr(0, dot);
  }
  for (const std::string& key : parts) j = json{{key, j}};
  apply_json(j);
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config: " + path.string());
  os << to_json().dump(2) << "\n";
}

std::uint64_t Config::extractor_hash() const {
  json j = to_json().at("extractor");
  j["n_mels"] = corpus.n_mels;
  return fnv1a64(j.dump());
}

std::uint64_t Config::predictor_hash() const {
  json j = to_json().at("predictor");
  j["d_word"] = embedder.d_word;
  j["d_style"] = extractor.d_style;
  return fnv1a64(j.dump());
}

std::uint64_t Config::acoustic_hash(int phoneme_inventory_size) const {
  json j = to_json().at("acoustic");
  j["n_mels"] = corpus.n_mels;
  j["d_style"] = extractor.d_style;
  j["phoneme_inventory_size"] = phoneme_inventory_size;
  return fnv1a64(j.dump());
}

}  // namespace castts
