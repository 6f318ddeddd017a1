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

#include <fstream>

#include "castts/corpus.hpp"
#include "test_util.hpp"

using namespace castts;

namespace {

/// Writes a tiny hand-rolled corpus: one paragraph, `n` sentences with one
/// phoneme each, `frames` frames per sentence.
ParagraphDocument write_tiny_corpus(const std::filesystem::path& dir, int n,
                                    int frames, int n_mels) {
  std::filesystem::create_directories(dir / "features");
  ParagraphDocument doc;
  doc.paragraph_id = "p0";
  for (int i = 0; i < n; ++i) {
    SentenceRecord rec;
    rec.id = "p0_s" + std::to_string(i);
    rec.paragraph_id = "p0";
    rec.index_in_paragraph = i;
    rec.text = "word" + std::to_string(i);
    rec.phonemes = {"aa"};
    rec.durations = {frames};
    rec.mel_path = "features/" + rec.id + ".melf";
    MelSpectrogram mel;
    mel.values = Mat::Constant(frames, n_mels, 0.25 * i);
    write_features(dir / rec.mel_path, mel);
    doc.sentences.push_back(rec);
  }
  write_manifest(dir / "manifest.jsonl", {doc});
  return doc;
}

}  // namespace

TEST_CASE("manifest: one paragraph of three ordered sentences") {
  const auto dir = testutil::temp_dir("manifest3");
  const ParagraphDocument written = write_tiny_corpus(dir, 3, 4, 8);
  const auto docs = load_manifest(dir / "manifest.jsonl");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0] == written);
  for (int i = 0; i < 3; ++i) CHECK(docs[0].sentences[i].index_in_paragraph == i);
}

TEST_CASE("manifest: duration/frame mismatch names the sentence") {
  const auto dir = testutil::temp_dir("mismatch");
  ParagraphDocument doc = write_tiny_corpus(dir, 2, 4, 8);
  doc.sentences[1].durations = {5};  // mel still has 4 frames
  write_manifest(dir / "manifest.jsonl", {doc});
  try {
    load_manifest(dir / "manifest.jsonl");
    FAIL("expected mismatch error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("p0_s1") != std::string::npos);
  }
}

TEST_CASE("manifest: malformed line reports the line number") {
  const auto dir = testutil::temp_dir("badline");
  write_tiny_corpus(dir, 1, 4, 8);
  std::ofstream os(dir / "manifest.jsonl", std::ios::app);
  os << "{not json\n";
  os.close();
  try {
    load_manifest(dir / "manifest.jsonl");
    FAIL("expected parse error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_manifest(dir / "absent.jsonl"), IoError);
}

TEST_CASE("manifest: paragraph index gaps are rejected") {
  const auto dir = testutil::temp_dir("gaps");
  ParagraphDocument doc = write_tiny_corpus(dir, 2, 4, 8);
  doc.sentences[1].index_in_paragraph = 3;
  write_manifest(dir / "manifest.jsonl", {doc});
  CHECK_THROWS_AS(load_manifest(dir / "manifest.jsonl"), IoError);
}

TEST_CASE("feature files: float32 round trip, bad magic, truncation, zero frames") {
  const auto dir = testutil::temp_dir("melf");
  Rng rng(3);
  MelSpectrogram mel;
  mel.values = testutil::random_mat(10, 80, rng);
  // Quantise through float so equality is exact.
  for (Eigen::Index i = 0; i < mel.values.rows(); ++i)
    for (Eigen::Index j = 0; j < mel.values.cols(); ++j)
      mel.values(i, j) = static_cast<float>(mel.values(i, j));
  write_features(dir / "a.melf", mel);
  const MelSpectrogram back = read_features(dir / "a.melf");
  CHECK((back.values - mel.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(read_feature_header(dir / "a.melf") ==
        std::pair<std::uint64_t, std::uint64_t>{10, 80});

  {
    std::ofstream os(dir / "bad.melf", std::ios::binary);
    os << "NOPE then some bytes";
  }
  try {
    read_features(dir / "bad.melf");
    FAIL("expected magic error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }

  {
    std::ifstream is(dir / "a.melf", std::ios::binary);
    std::vector<char> all((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
    std::ofstream os(dir / "trunc.melf", std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  try {
    read_features(dir / "trunc.melf");
    FAIL("expected truncation error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("header mismatch") != std::string::npos);
  }

  MelSpectrogram empty;
  empty.values = Mat(0, 80);
  CHECK_THROWS_AS(write_features(dir / "e.melf", empty), InvariantError);
}

TEST_CASE("context window: interior, boundary and degenerate radii") {
  const auto dir = testutil::temp_dir("window");
  const ParagraphDocument doc = write_tiny_corpus(dir, 5, 4, 8);

  SUBCASE("interior: no padding") {
    const ContextWindow w = build_context_window(doc, 2, 2, 6);
    CHECK(w.current.id == "p0_s2");
    CHECK(w.past[0].id == "p0_s0");
    CHECK(w.past[1].id == "p0_s1");
    CHECK(w.future[0].id == "p0_s3");
    CHECK(w.future[1].id == "p0_s4");
    for (bool pad : w.past_pad) CHECK_FALSE(pad);
    for (bool pad : w.future_pad) CHECK_FALSE(pad);
  }
  SUBCASE("first sentence: past fully padded with zero styles") {
    const ContextWindow w = build_context_window(doc, 0, 2, 6);
    CHECK(w.past_pad == std::vector<bool>{true, true});
    for (const auto& rec : w.past) CHECK(rec.is_pad());
    for (const auto& s : w.prev_styles) {
      CHECK(s.size() == 6);
      CHECK(s.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(w.future[0].id == "p0_s1");
    CHECK(w.future[1].id == "p0_s2");
  }
  SUBCASE("radius zero: only the current sentence") {
    const ContextWindow w = build_context_window(doc, 3, 0, 6);
    CHECK(w.past.empty());
    CHECK(w.future.empty());
    CHECK(w.current.id == "p0_s3");
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(build_context_window(doc, 5, 2, 6), InvariantError);
    CHECK_THROWS_AS(build_context_window(doc, -1, 2, 6), InvariantError);
  }
}

TEST_CASE("context window property: padded lengths and neighbour identity") {
  const auto dir = testutil::temp_dir("windowprop");
  const int len = 7;
  const ParagraphDocument doc = write_tiny_corpus(dir, len, 3, 8);
  for (int n = 0; n <= 4; ++n)
    for (int i = 0; i < len; ++i) {
      const ContextWindow w = build_context_window(doc, i, n, 4);
      REQUIRE(static_cast<int>(w.past.size()) == n);
      REQUIRE(static_cast<int>(w.future.size()) == n);
      REQUIRE(static_cast<int>(w.prev_styles.size()) == n);
      for (int k = 0; k < n; ++k) {
        const int pi = i - n + k;
        CHECK(w.past_pad[k] == (pi < 0));
        if (pi >= 0) CHECK(w.past[k].id == doc.sentences[pi].id);
        const int fi = i + 1 + k;
        CHECK(w.future_pad[k] == (fi >= len));
        if (fi < len) CHECK(w.future[k].id == doc.sentences[fi].id);
      }
    }
}

TEST_CASE("toy corpus: deterministic, seed-sensitive, loadable round trip") {
  CorpusConfig cfg;
  cfg.paragraphs = 4;
  cfg.sentences_per_paragraph = 5;
  cfg.n_mels = 16;

  const auto dir_a = testutil::temp_dir("toy_a");
  const auto dir_b = testutil::temp_dir("toy_b");
  const auto dir_c = testutil::temp_dir("toy_c");
  generate_toy_corpus(cfg, 11, dir_a);
  generate_toy_corpus(cfg, 11, dir_b);
  generate_toy_corpus(cfg, 12, dir_c);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir_a / "manifest.jsonl") == slurp(dir_b / "manifest.jsonl"));
  CHECK(slurp(dir_a / "features/para0_s0.melf") ==
        slurp(dir_b / "features/para0_s0.melf"));
  CHECK(slurp(dir_a / "features/para0_s0.melf") !=
        slurp(dir_c / "features/para0_s0.melf"));

  // load(write(x)) == x: re-serialising the loaded documents is identical.
  const auto docs = load_manifest(dir_a / "manifest.jsonl");
  write_manifest(dir_a / "manifest2.jsonl", docs);
  CHECK(slurp(dir_a / "manifest.jsonl") == slurp(dir_a / "manifest2.jsonl"));
  const auto docs2 = load_manifest(dir_a / "manifest2.jsonl");
  CHECK(docs == docs2);

  // Invariants hold for every record.
  Corpus c{dir_a, docs};
  for (const auto& doc : docs)
    for (const auto& rec : doc.sentences) {
      CHECK(rec.durations.size() == rec.phonemes.size());
      const MelSpectrogram mel = c.load_mel(rec);
      CHECK(mel.frames() == rec.total_frames());
      CHECK(mel.values.allFinite());
      const Vec f0 = c.load_f0(rec);
      CHECK(f0.size() == mel.frames());
    }
}

TEST_CASE("toy corpus: latent styles of adjacent sentences correlate") {
  CorpusConfig cfg;
  cfg.paragraphs = 15;
  cfg.sentences_per_paragraph = 8;  // 120 sentences
  cfg.n_mels = 16;
  const auto dir = testutil::temp_dir("toy_corr");
  generate_toy_corpus(cfg, 21, dir);
  const auto latents = load_latents(dir);
  REQUIRE(latents.size() >= 100);

  // Pearson correlation between z_i and z_{i-1}, pooled over dimensions,
  // within paragraphs only.
  std::vector<double> xs, ys;
  for (std::size_t i = 1; i < latents.size(); ++i) {
    const auto& [id, z] = latents[i];
    const auto& [pid, zp] = latents[i - 1];
    if (id.substr(0, id.find("_s")) != pid.substr(0, pid.find("_s"))) continue;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      xs.push_back(zp(k));
      ys.push_back(z(k));
    }
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  MESSAGE("adjacent latent correlation: " << corr);
  CHECK(corr > 0.0);
}

TEST_CASE("toy corpus: invalid configs are rejected") {
  const auto dir = testutil::temp_dir("toy_bad");
  CorpusConfig cfg;
  cfg.paragraphs = 0;
  CHECK_THROWS_AS(generate_toy_corpus(cfg, 1, dir), InvariantError);
  cfg = CorpusConfig{};
  cfg.n_mels = 0;
  CHECK_THROWS_AS(generate_toy_corpus(cfg, 1, dir), InvariantError);
  cfg = CorpusConfig{};
  cfg.sentences_per_paragraph = 0;
  CHECK_THROWS_AS(generate_toy_corpus(cfg, 1, dir), InvariantError);
}
