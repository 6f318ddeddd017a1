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

#include <doctest.h>

#include "castts/text_embedder.hpp"
#include "test_util.hpp"

using namespace castts;

TEST_CASE("tokenizer: whitespace split with UTF-8 character fallback") {
  CHECK(tokenize_words("one two  three") ==
        std::vector<std::string>{"one", "two", "three"});
  CHECK(tokenize_words("") == std::vector<std::string>{});
  CHECK(tokenize_words("  \t ") == std::vector<std::string>{});
  // A single multi-byte token splits into code points.
  const auto cjk = tokenize_words("\xe4\xbd\xa0\xe5\xa5\xbd");
  REQUIRE(cjk.size() == 2);
  CHECK(cjk[0] == "\xe4\xbd\xa0");
  CHECK(cjk[1] == "\xe5\xa5\xbd");
  // Spaced multi-byte words keep whitespace tokenisation.
  CHECK(tokenize_words("\xe4\xbd\xa0 \xe5\xa5\xbd").size() == 2);
}

TEST_CASE("hash embedder: shapes, padding, determinism") {
  EmbedderConfig cfg;
  cfg.d_word = 16;
  HashTextEmbedder emb(cfg);

  SUBCASE("N=0, one sentence of three words") {
    const auto out = emb.embed_context({"alpha beta gamma"});
    REQUIRE(out.sentences.size() == 1);
    CHECK(out.word_count(0) == 3);
    CHECK(out.sentences[0].cols() == 16);
  }
  SUBCASE("padded slot yields one zero vector") {
    const auto out = emb.embed_context({"", "mid words here", ""});
    REQUIRE(out.sentences.size() == 3);
    CHECK(out.word_count(0) == 1);
    CHECK(out.sentences[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.word_count(1) == 3);
    CHECK(out.word_count(2) == 1);
    CHECK(out.sentences[2].cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pure function: identical calls give identical output") {
    const auto a = emb.embed_context({"pa ra", "one two three", "qu"});
    const auto b = emb.embed_context({"pa ra", "one two three", "qu"});
    for (std::size_t s = 0; s < a.sentences.size(); ++s)
      CHECK((a.sentences[s] - b.sentences[s]).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("word counts preserved per sentence") {
    const auto out = emb.embed_context({"a b", "c", "d e f g"});
    CHECK(out.word_count(0) == 2);
    CHECK(out.word_count(1) == 1);
    CHECK(out.word_count(2) == 4);
  }
  SUBCASE("even sentence count is rejected") {
    CHECK_THROWS_AS(emb.embed_context({"a", "b"}), InvariantError);
    CHECK_THROWS_AS(emb.embed_context({}), InvariantError);
  }
}

TEST_CASE("hash embedder: neighbouring words influence each other") {
  EmbedderConfig cfg;
  cfg.d_word = 16;
  cfg.mixing_radius = 2;
  HashTextEmbedder emb(cfg);
  // Same middle sentence, different neighbours: the middle embeddings
  // change because mixing crosses sentence boundaries.
  const auto a = emb.embed_context({"left words", "same middle", "right side"});
  const auto b = emb.embed_context({"other stuff", "same middle", "more text"});
  CHECK((a.sentences[1] - b.sentences[1]).cwiseAbs().maxCoeff() > 1e-9);

  // With radius zero there is no leakage.
  cfg.mixing_radius = 0;
  HashTextEmbedder isolated(cfg);
  const auto c = isolated.embed_context({"left words", "same middle", "right side"});
  const auto d = isolated.embed_context({"other stuff", "same middle", "more text"});
  CHECK((c.sentences[1] - d.sentences[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("external embedder: unconfigured command is an error") {
  EmbedderConfig cfg;
  cfg.backend = "external";
  CHECK_THROWS_AS(ExternalTextEmbedder{cfg}, IoError);
  CHECK_THROWS_AS(make_text_embedder(cfg), IoError);
  cfg.backend = "nonsense";
  CHECK_THROWS_AS(make_text_embedder(cfg), InvariantError);
}

TEST_CASE("external embedder: subprocess protocol round trip") {
  EmbedderConfig cfg;
  cfg.backend = "external";
  cfg.d_word = 3;
  // Stand-in for a real LM adapter: emits one small vector per word.
  cfg.external_command =
      "python3 -c \"import sys, json; req = json.load(sys.stdin); "
      "print(json.dumps({'embeddings': [[[float(len(w)), 1.0, 2.0] "
      "for w in s.split()] for s in req['sentences']]}))\"";
  ExternalTextEmbedder emb(cfg);
  const auto out = emb.embed_context({"ab cde", "", "f"});
  REQUIRE(out.sentences.size() == 3);
  CHECK(out.word_count(0) == 2);
  CHECK(out.sentences[0](0, 0) == 2.0);
  CHECK(out.sentences[0](1, 0) == 3.0);
  CHECK(out.sentences[1].cwiseAbs().maxCoeff() == 0.0);  // padded slot
  CHECK(out.sentences[2](0, 0) == 1.0);

  // A failing command surfaces as an error.
  cfg.external_command = "false";
  ExternalTextEmbedder broken(cfg);
  CHECK_THROWS_AS(broken.embed_context({"a"}), IoError);
}
