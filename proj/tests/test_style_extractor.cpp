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

#include "castts/style_extractor.hpp"
#include "test_util.hpp"

using namespace castts;
using nn::Tape;
using nn::Var;
using testutil::random_mat;

namespace {

Config tiny_config() {
  Config cfg;
  cfg.corpus.n_mels = 8;
  cfg.extractor.conv_channels = {4};
  cfg.extractor.gru_width = 8;
  cfg.extractor.n_tokens = 2;
  cfg.extractor.heads = 2;
  cfg.extractor.d_style = 8;
  return cfg;
}

MelSpectrogram random_mel(Eigen::Index frames, Eigen::Index bins, Rng& rng) {
  MelSpectrogram mel;
  mel.values = random_mat(frames, bins, rng);
  return mel;
}

}  // namespace

TEST_CASE("reference vector length is independent of frame count") {
  Config cfg = tiny_config();
  Rng rng(5);
  StyleExtractor ext(cfg, rng);
  Rng data(1);
  Tape t;
  Var a = ext.encode_reference(t, random_mel(10, 8, data));
  Var b = ext.encode_reference(t, random_mel(200, 8, data));
  CHECK(a.cols() == ext.d_ref());
  CHECK(b.cols() == ext.d_ref());
  CHECK(a.rows() == 1);
  CHECK(b.rows() == 1);
}

TEST_CASE("extract_style is deterministic and matches its composition") {
  Config cfg = tiny_config();
  Rng rng(7);
  StyleExtractor ext(cfg, rng);
  Rng data(2);
  const MelSpectrogram mel = random_mel(24, 8, data);
  const StyleEmbedding e1 = ext.extract_style(mel);
  const StyleEmbedding e2 = ext.extract_style(mel);
  CHECK(e1.values.size() == cfg.extractor.d_style);
  CHECK((e1.values - e2.values).cwiseAbs().maxCoeff() == 0.0);

  Tape t;
  Var composed = ext.attend_style_tokens(t, ext.encode_reference(t, mel));
  CHECK((composed.val().row(0).transpose() - e1.values).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("appending a silent frame changes the reference in general") {
  Config cfg = tiny_config();
  Rng rng(11);
  StyleExtractor ext(cfg, rng);
  Rng data(3);
  MelSpectrogram mel = random_mel(12, 8, data);
  MelSpectrogram longer;
  longer.values = Mat(13, 8);
  longer.values.topRows(12) = mel.values;
  longer.values.row(12).setConstant(-4.0);
  const StyleEmbedding a = ext.extract_style(mel);
  const StyleEmbedding b = ext.extract_style(longer);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("errors: zero frames and mel width mismatch") {
  Config cfg = tiny_config();
  Rng rng(13);
  StyleExtractor ext(cfg, rng);
  Tape t;
  MelSpectrogram empty;
  empty.values = Mat(0, 8);
  CHECK_THROWS_AS(ext.encode_reference(t, empty), InvariantError);
  Rng data(4);
  MelSpectrogram wrong = random_mel(5, 7, data);
  CHECK_THROWS_AS(ext.encode_reference(t, wrong), InvariantError);
}

TEST_CASE("token attention: weights normalised, single-token degenerate case") {
  Config cfg = tiny_config();
  Rng rng(17);
  StyleExtractor ext(cfg, rng);
  Rng data(5);

  SUBCASE("per-head weights sum to one") {
    Tape t;
    Mat attn;
    Var ref = t.constant(random_mat(1, ext.d_ref(), data));
    ext.attend_style_tokens(t, ref, &attn);
    REQUIRE(attn.rows() == cfg.extractor.heads);
    for (Eigen::Index h = 0; h < attn.rows(); ++h)
      CHECK(attn.row(h).sum() == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("two distinct references give distinct embeddings") {
    Tape t;
    Var r1 = t.constant(random_mat(1, ext.d_ref(), data));
    Var r2 = t.constant(random_mat(1, ext.d_ref(), data));
    Var e1 = ext.attend_style_tokens(t, r1);
    Var e2 = ext.attend_style_tokens(t, r2);
    CHECK((e1.val() - e2.val()).cwiseAbs().maxCoeff() > 1e-9);
  }

  SUBCASE("n_tokens=1: output is the squashed token's value projection") {
    Config one = tiny_config();
    one.extractor.n_tokens = 1;
    Rng r2(19);
    StyleExtractor single(one, r2);
    Tape t;
    Var ra = t.constant(random_mat(1, single.d_ref(), data));
    Var rb = t.constant(random_mat(1, single.d_ref(), data));
    Var ea = single.attend_style_tokens(t, ra);
    Var eb = single.attend_style_tokens(t, rb);
    CHECK((ea.val() - eb.val()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("extractor gradient check at tiny dims") {
  Config cfg = tiny_config();
  Rng rng(23);
  StyleExtractor ext(cfg, rng);
  Rng data(6);
  const MelSpectrogram mel = random_mel(9, 8, data);
  const Mat target = random_mat(1, cfg.extractor.d_style, data);
  std::vector<nn::Parameter*> params;
  ext.params(params);

  auto loss = [&] {
    Tape t;
    return t.mse_loss(ext.extract_style_var(t, mel), target).val()(0, 0);
  };
  for (auto* p : params) p->zero_grad();
  Tape t;
  t.backward(t.mse_loss(ext.extract_style_var(t, mel), target));
  Rng pick(29);
  testutil::check_gradients_fd(params, loss, 80, pick);
}
