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

#include <memory>
#include <string>
#include <vector>

#include "castts/common.hpp"
#include "castts/config.hpp"

namespace castts {

/// Word-level embeddings for a 2N+1 sentence context, split back per
/// sentence after joint embedding. A padded (empty) sentence yields a single
/// all-zero row.
struct WordEmbeddingSequence {
  std::vector<Mat> sentences;  // words x d_word each

  std::size_t word_count(std::size_t sentence) const {
    return static_cast<std::size_t>(sentences[sentence].rows());
  }
};

/// Whitespace tokenizer with a character fallback: a single token containing
/// multi-byte UTF-8 is split into code points.
std::vector<std::string> tokenize_words(const std::string& text);

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  /// `sentences` must hold an odd number (2N+1) of entries; padded slots are
  /// empty strings. Embeddings are computed over the concatenation so
  /// neighbouring sentences influence each other, then split back.
  virtual WordEmbeddingSequence embed_context(
      const std::vector<std::string>& sentences) const = 0;
  virtual int d_word() const = 0;
};

/// Deterministic offline backend: hash-seeded word vectors mixed with a
/// fixed-window local average over the concatenated word stream.
class HashTextEmbedder : public TextEmbedder {
 public:
  explicit HashTextEmbedder(const EmbedderConfig& config);
  WordEmbeddingSequence embed_context(
      const std::vector<std::string>& sentences) const override;
  int d_word() const override { return d_word_; }

 private:
  int d_word_;
  int mixing_radius_;
};

/// Adapter around an external pretrained-LM embedding command. The command
/// receives a JSON request on stdin and must print a JSON response with
/// per-sentence, per-word vectors. Not exercised by CI beyond error paths.
class ExternalTextEmbedder : public TextEmbedder {
 public:
  explicit ExternalTextEmbedder(const EmbedderConfig& config);
  WordEmbeddingSequence embed_context(
      const std::vector<std::string>& sentences) const override;
  int d_word() const override { return d_word_; }

 private:
  int d_word_;
  std::string command_;
  std::string pooling_;
};

std::unique_ptr<TextEmbedder> make_text_embedder(const EmbedderConfig& config);

}  // namespace castts
