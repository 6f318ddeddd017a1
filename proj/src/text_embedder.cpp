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

#include "castts/text_embedder.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace castts {

using nlohmann::json;

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));

  const bool multibyte =
      tokens.size() == 1 &&
      std::any_of(tokens[0].begin(), tokens[0].end(),
                  [](char c) { return static_cast<unsigned char>(c) >= 0x80; });
  if (multibyte) {
    const std::string s = std::move(tokens[0]);
    tokens.clear();
    std::size_t i = 0;
    while (i < s.size()) {
      const auto b = static_cast<unsigned char>(s[i]);
      std::size_t len = 1;
      if (b >= 0xF0)
        len = 4;
      else if (b >= 0xE0)
        len = 3;
      else if (b >= 0xC0)
        len = 2;
      len = std::min(len, s.size() - i);
      tokens.push_back(s.substr(i, len));
      i += len;
    }
  }
  return tokens;
}

namespace {

void check_context_shape(const std::vector<std::string>& sentences) {
  if (sentences.empty() || sentences.size() % 2 == 0)
    throw InvariantError("embed_context expects 2N+1 sentences, got " +
                         std::to_string(sentences.size()));
}

}  // namespace

HashTextEmbedder::HashTextEmbedder(const EmbedderConfig& config)
    : d_word_(config.d_word), mixing_radius_(config.mixing_radius) {
  if (d_word_ < 1) throw InvariantError("embedder: d_word must be >= 1");
  if (mixing_radius_ < 0) throw InvariantError("embedder: negative mixing radius");
}

WordEmbeddingSequence HashTextEmbedder::embed_context(
    const std::vector<std::string>& sentences) const {
  check_context_shape(sentences);

  // Base vector per word, seeded purely by the word's bytes.
  std::vector<std::vector<std::string>> words(sentences.size());
  std::vector<Mat> base;
  std::vector<std::pair<std::size_t, Eigen::Index>> origin;  // (sentence, row)
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    words[s] = tokenize_words(sentences[s]);
    for (const std::string& w : words[s]) {
      Rng rng(fnv1a64(w));
      std::normal_distribution<double> dist(0.0, 1.0);
      Mat v(1, d_word_);
      for (int k = 0; k < d_word_; ++k) v(0, k) = dist(rng);
      origin.emplace_back(s, static_cast<Eigen::Index>(base.size()));
      base.push_back(std::move(v));
    }
  }

  // Local averaging over the concatenated stream: neighbouring words (also
  // across sentence boundaries) leak into each other.
  const auto n = static_cast<Eigen::Index>(base.size());
  std::vector<Mat> mixed(base.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Mat acc = Mat::Zero(1, d_word_);
    double wsum = 0.0;
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - mixing_radius_);
         j <= std::min(n - 1, i + mixing_radius_); ++j) {
      const double w = 1.0 / (1.0 + std::abs(static_cast<double>(i - j)));
      acc += w * base[j];
      wsum += w;
    }
    mixed[i] = acc / wsum;
  }

  WordEmbeddingSequence out;
  out.sentences.resize(sentences.size());
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto count = static_cast<Eigen::Index>(words[s].size());
    if (count == 0) {
      out.sentences[s] = Mat::Zero(1, d_word_);
      continue;
    }
    Mat m(count, d_word_);
    for (Eigen::Index r = 0; r < count; ++r) m.row(r) = mixed[cursor++].row(0);
    out.sentences[s] = std::move(m);
  }
  return out;
}

ExternalTextEmbedder::ExternalTextEmbedder(const EmbedderConfig& config)
    : d_word_(config.d_word), command_(config.external_command),
      pooling_(config.external_pooling) {
  if (command_.empty())
    throw IoError(
        "external text embedder unavailable: embedder.external_command is not "
        "configured");
  if (pooling_ != "mean" && pooling_ != "first")
    throw InvariantError("embedder: external_pooling must be 'mean' or 'first'");
}

WordEmbeddingSequence ExternalTextEmbedder::embed_context(
    const std::vector<std::string>& sentences) const {
  check_context_shape(sentences);
  const json request{{"sentences", sentences},
                     {"d_word", d_word_},
                     {"pooling", pooling_}};
  const auto req_path =
      std::filesystem::temp_directory_path() /
      ("castts_embed_" + std::to_string(fnv1a64(request.dump())) + ".json");
  {
    std::ofstream os(req_path);
    os << request.dump();
  }
  const std::string cmd = command_ + " < " + req_path.string();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw IoError("external embedder: cannot launch: " + command_);
  std::string output;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0)
    output.append(buf, got);
  const int status = ::pclose(pipe);
  std::filesystem::remove(req_path);
  if (status != 0)
    throw IoError("external embedder command failed with status " +
                  std::to_string(status));
  json response;
  try {
    response = json::parse(output);
  } catch (const json::exception& e) {
    throw IoError(std::string("external embedder: invalid JSON response: ") +
                  e.what());
  }

  WordEmbeddingSequence out;
  const auto& embs = response.at("embeddings");
  if (embs.size() != sentences.size())
    throw IoError("external embedder: expected " +
                  std::to_string(sentences.size()) + " sentences, got " +
                  std::to_string(embs.size()));
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = embs.at(s);
    if (sent.empty()) {
      out.sentences.push_back(Mat::Zero(1, d_word_));
      continue;
    }
    Mat m(static_cast<Eigen::Index>(sent.size()), d_word_);
    for (std::size_t w = 0; w < sent.size(); ++w) {
      const auto vec = sent.at(w).get<std::vector<double>>();
      if (static_cast<int>(vec.size()) != d_word_)
        throw IoError("external embedder: vector length " +
                      std::to_string(vec.size()) + " != d_word " +
                      std::to_string(d_word_));
      for (int k = 0; k < d_word_; ++k) m(static_cast<Eigen::Index>(w), k) = vec[k];
    }
    out.sentences.push_back(std::move(m));
  }
  return out;
}

std::unique_ptr<TextEmbedder> make_text_embedder(const EmbedderConfig& config) {
  if (config.backend == "hash") return std::make_unique<HashTextEmbedder>(config);
  if (config.backend == "external")
    return std::make_unique<ExternalTextEmbedder>(config);
  throw InvariantError("unknown embedder backend: " + config.backend);
}

}  // namespace castts
