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

#include "castts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace castts {

using nlohmann::json;

int SentenceRecord::total_frames() const {
  return std::accumulate(durations.begin(), durations.end(), 0);
}

namespace {

constexpr char kMelMagic[4] = {'M', 'E', 'L', 'F'};

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

SentenceRecord parse_record(const json& j, const std::string& where) {
  SentenceRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.paragraph_id = j.at("paragraph_id").get<std::string>();
    rec.index_in_paragraph = j.at("index_in_paragraph").get<int>();
    rec.text = j.at("text").get<std::string>();
    rec.phonemes = j.at("phonemes").get<std::vector<std::string>>();
    rec.durations = j.at("durations").get<std::vector<int>>();
    rec.mel_path = j.at("mel_path").get<std::string>();
    if (j.contains("f0_path")) rec.f0_path = j.at("f0_path").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError("malformed manifest record at " + where + ": " + e.what());
  }
  if (rec.index_in_paragraph < 0)
    throw IoError("negative index_in_paragraph at " + where);
  for (int d : rec.durations)
    if (d < 0) throw IoError("negative duration in sentence " + rec.id);
  if (rec.durations.size() != rec.phonemes.size())
    throw IoError("sentence " + rec.id + ": " +
                  std::to_string(rec.durations.size()) + " durations for " +
                  std::to_string(rec.phonemes.size()) + " phonemes");
  return rec;
}

json record_to_json(const SentenceRecord& rec) {
  json j{{"id", rec.id},
         {"paragraph_id", rec.paragraph_id},
         {"index_in_paragraph", rec.index_in_paragraph},
         {"text", rec.text},
         {"phonemes", rec.phonemes},
         {"durations", rec.durations},
         {"mel_path", rec.mel_path}};
  if (!rec.f0_path.empty()) j["f0_path"] = rec.f0_path;
  return j;
}

}  // namespace

std::vector<ParagraphDocument> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();

  std::map<std::string, std::vector<SentenceRecord>> groups;
  std::vector<std::string> order;  // paragraphs in first-seen order
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("manifest " + path.string() + " line " +
                    std::to_string(line_no) + ": " + e.what());
    }
    SentenceRecord rec =
        parse_record(j, path.string() + " line " + std::to_string(line_no));
    auto [it, inserted] = groups.try_emplace(rec.paragraph_id);
    if (inserted) order.push_back(rec.paragraph_id);
    it->second.push_back(std::move(rec));
  }

  std::vector<ParagraphDocument> docs;
  docs.reserve(order.size());
  for (const std::string& pid : order) {
    ParagraphDocument doc;
    doc.paragraph_id = pid;
    doc.sentences = std::move(groups.at(pid));
    std::sort(doc.sentences.begin(), doc.sentences.end(),
              [](const SentenceRecord& a, const SentenceRecord& b) {
                return a.index_in_paragraph < b.index_in_paragraph;
              });
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const SentenceRecord& rec = doc.sentences[i];
      if (rec.index_in_paragraph != static_cast<int>(i))
        throw IoError("paragraph " + pid + ": sentence indices must be 0.." +
                      std::to_string(doc.sentences.size() - 1) +
                      " without gaps (got " +
                      std::to_string(rec.index_in_paragraph) + ")");
      const auto [frames, mels] =
          read_feature_header(resolve(base, rec.mel_path));
      (void)mels;
      if (static_cast<int>(frames) != rec.total_frames())
        throw IoError("sentence " + rec.id + ": durations sum to " +
                      std::to_string(rec.total_frames()) + " but mel has " +
                      std::to_string(frames) + " frames");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ParagraphDocument>& docs) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  for (const ParagraphDocument& doc : docs)
    for (const SentenceRecord& rec : doc.sentences)
      os << record_to_json(rec).dump() << "\n";
}

ContextWindow build_context_window(const ParagraphDocument& doc, int i,
                                   int n_radius, int d_style) {
  const int len = static_cast<int>(doc.sentences.size());
  if (i < 0 || i >= len)
    throw InvariantError("context window: sentence index " + std::to_string(i) +
                         " out of range for paragraph of " +
                         std::to_string(len) + " sentences");
  if (n_radius < 0) throw InvariantError("context window: negative radius");
  ContextWindow w;
  w.current = doc.sentences[i];
  w.past.resize(n_radius);
  w.future.resize(n_radius);
  w.prev_styles.assign(n_radius, Vec::Zero(d_style));
  w.past_pad.assign(n_radius, true);
  w.future_pad.assign(n_radius, true);
  for (int k = 0; k < n_radius; ++k) {
    const int pi = i - n_radius + k;  // window slot k holds sentence i-N+k
    if (pi >= 0) {
      w.past[k] = doc.sentences[pi];
      w.past_pad[k] = false;
    }
    const int fi = i + 1 + k;
    if (fi < len) {
      w.future[k] = doc.sentences[fi];
      w.future_pad[k] = false;
    }
  }
  return w;
}

MelSpectrogram read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMelMagic, 4) != 0)
    throw IoError("bad magic bytes in " + path.string());
  std::uint64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 8);
  is.read(reinterpret_cast<char*>(&cols), 8);
  if (!is) throw IoError("header mismatch in " + path.string());
  if (rows == 0 || cols == 0)
    throw IoError("zero-frame feature matrix in " + path.string());
  MelSpectrogram mel;
  mel.values.resize(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::vector<float> buf(rows * cols);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is || is.gcount() !=
                 static_cast<std::streamsize>(buf.size() * sizeof(float)))
    throw IoError("header mismatch in " + path.string() +
                  ": payload shorter than rows*cols");
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c)
      mel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          buf[r * cols + c];
  return mel;
}

void write_features(const std::filesystem::path& path, const MelSpectrogram& mel) {
  if (mel.frames() == 0 || mel.n_mels() == 0)
    throw InvariantError("refusing to write zero-frame feature matrix to " +
                         path.string());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature file: " + path.string());
  os.write(kMelMagic, 4);
  const std::uint64_t rows = mel.frames(), cols = mel.n_mels();
  os.write(reinterpret_cast<const char*>(&rows), 8);
  os.write(reinterpret_cast<const char*>(&cols), 8);
  std::vector<float> buf(rows * cols);
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c)
      buf[r * cols + c] = static_cast<float>(
          mel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw IoError("short write on " + path.string());
}

std::pair<std::uint64_t, std::uint64_t> read_feature_header(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMelMagic, 4) != 0)
    throw IoError("bad magic bytes in " + path.string());
  std::uint64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 8);
  is.read(reinterpret_cast<char*>(&cols), 8);
  if (!is) throw IoError("header mismatch in " + path.string());
  return {rows, cols};
}

MelSpectrogram Corpus::load_mel(const SentenceRecord& rec) const {
  return read_features(resolve(base_dir, rec.mel_path));
}

Vec Corpus::load_f0(const SentenceRecord& rec) const {
  if (rec.f0_path.empty())
    throw IoError("sentence " + rec.id + " has no f0 track");
  const MelSpectrogram f0 = read_features(resolve(base_dir, rec.f0_path));
  if (f0.n_mels() != 1)
    throw IoError("f0 track for " + rec.id + " must have one column");
  return f0.values.col(0);
}

std::vector<std::string> Corpus::load_inventory() const {
  const auto path = base_dir / "inventory.txt";
  std::ifstream is(path);
  if (!is) throw IoError("cannot open phoneme inventory: " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) symbols.push_back(line);
  if (symbols.empty()) throw IoError("empty phoneme inventory: " + path.string());
  return symbols;
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  Corpus c;
  c.base_dir = manifest_path.parent_path();
  c.documents = load_manifest(manifest_path);
  return c;
}

// ---------------------------------------------------------------------------
// Toy corpus generator
// ---------------------------------------------------------------------------

namespace {

double unit_from_hash(std::uint64_t h) {
  // Map to [-1, 1).
  return static_cast<double>(h % 100000) / 50000.0 - 1.0;
}

/// Stable 3-dim content feature of one word.
Vec word_feature(const std::string& word) {
  Vec f(3);
  for (int k = 0; k < 3; ++k)
    f(k) = unit_from_hash(fnv1a64(word + "#" + std::to_string(k)));
  return f;
}

/// Position-weighted word content: earlier words weigh more, so the feature
/// is order sensitive and mean pooling cannot recover it exactly.
Vec sentence_content(const std::vector<std::string>& words) {
  Vec u = Vec::Zero(3);
  double wsum = 0.0;
  for (std::size_t p = 0; p < words.size(); ++p) {
    const double w = 1.0 / (1.0 + static_cast<double>(p));
    u += w * word_feature(words[p]);
    wsum += w;
  }
  if (wsum > 0) u /= wsum;
  return u;
}

std::vector<std::string> word_to_phonemes(const std::string& word,
                                          const std::vector<std::string>& inventory,
                                          int min_count, int max_count) {
  const std::uint64_t h = fnv1a64(word);
  const int count = min_count + static_cast<int>(h % (max_count - min_count + 1));
  std::vector<std::string> out;
  for (int k = 0; k < count; ++k)
    out.push_back(inventory[fnv1a64(word + "@" + std::to_string(k)) %
                            inventory.size()]);
  return out;
}

bool phoneme_voiced(const std::string& ph) { return fnv1a64(ph) % 4 != 0; }

}  // namespace

void generate_toy_corpus(const CorpusConfig& config, std::uint64_t seed,
                         const std::filesystem::path& out_dir) {
  if (config.paragraphs < 1 || config.sentences_per_paragraph < 1)
    throw InvariantError("toy corpus: need at least one paragraph and sentence");
  if (config.n_mels < 1) throw InvariantError("toy corpus: n_mels must be >= 1");
  if (config.vocab_size < 1 || config.phoneme_inventory < 1)
    throw InvariantError("toy corpus: empty vocabulary or inventory");
  if (config.words_min < 1 || config.words_max < config.words_min)
    throw InvariantError("toy corpus: bad word count range");
  if (config.frames_per_phoneme_min < 1 ||
      config.frames_per_phoneme_max < config.frames_per_phoneme_min)
    throw InvariantError("toy corpus: bad frame count range");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "features");
  fs::create_directories(out_dir / "f0");

  std::vector<std::string> inventory;
  for (int i = 0; i < config.phoneme_inventory; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "p%02d", i);
    inventory.emplace_back(buf);
  }
  {
    std::ofstream os(out_dir / "inventory.txt");
    for (const auto& s : inventory) os << s << "\n";
  }

  Rng rng(seed);
  std::uniform_int_distribution<int> word_pick(0, config.vocab_size - 1);
  std::uniform_int_distribution<int> word_count(config.words_min,
                                                config.words_max);
  std::uniform_int_distribution<int> frame_count(config.frames_per_phoneme_min,
                                                 config.frames_per_phoneme_max);
  std::normal_distribution<double> style_eps(0.0, config.style_noise);
  std::normal_distribution<double> mel_eps(0.0, 0.02);

  std::vector<std::string> vocab;
  vocab.reserve(config.vocab_size);
  for (int i = 0; i < config.vocab_size; ++i) {
    static const char* syll[] = {"ka", "lo", "mi", "ru", "ta", "ve",
                                 "zo", "ne", "shi", "pa", "du", "gri"};
    std::string w = syll[i % 12];
    w += syll[(i / 12 + i) % 12];
    w += std::to_string(i);
    vocab.push_back(w);
  }

  const Vec coef_own = (Vec(3) << 0.9, 0.8, 0.7).finished();
  const Vec coef_neighbor = (Vec(3) << 0.5, 0.6, 0.4).finished();

  std::vector<ParagraphDocument> docs;
  json latents = json::array();

  for (int p = 0; p < config.paragraphs; ++p) {
    ParagraphDocument doc;
    doc.paragraph_id = "para" + std::to_string(p);

    // Draw all word sequences first: each latent depends on its neighbours.
    std::vector<std::vector<std::string>> words(config.sentences_per_paragraph);
    for (auto& sentence : words) {
      sentence.resize(word_count(rng));
      for (auto& w : sentence) w = vocab[word_pick(rng)];
    }
    std::vector<Vec> content(words.size());
    for (std::size_t i = 0; i < words.size(); ++i)
      content[i] = sentence_content(words[i]);

    Vec prev_latent = Vec::Zero(3);
    for (int i = 0; i < config.sentences_per_paragraph; ++i) {
      Vec neighbor = Vec::Zero(3);
      int n_neighbors = 0;
      if (i > 0) {
        neighbor += content[i - 1];
        ++n_neighbors;
      }
      if (i + 1 < config.sentences_per_paragraph) {
        neighbor += content[i + 1];
        ++n_neighbors;
      }
      if (n_neighbors > 0) neighbor /= n_neighbors;

      Vec z(3);
      for (int k = 0; k < 3; ++k)
        z(k) = std::tanh(coef_own(k) * content[i](k) +
                         coef_neighbor(k) * neighbor(k) +
                         config.style_autocorrelation * prev_latent(k) +
                         style_eps(rng));

      SentenceRecord rec;
      rec.paragraph_id = doc.paragraph_id;
      rec.index_in_paragraph = i;
      rec.id = doc.paragraph_id + "_s" + std::to_string(i);
      std::string text;
      for (const auto& w : words[i]) {
        if (!text.empty()) text += ' ';
        text += w;
      }
      rec.text = text;
      for (const auto& w : words[i]) {
        auto phs = word_to_phonemes(w, inventory, config.phonemes_per_word_min,
                                    config.phonemes_per_word_max);
        rec.phonemes.insert(rec.phonemes.end(), phs.begin(), phs.end());
      }
      for (std::size_t k = 0; k < rec.phonemes.size(); ++k)
        rec.durations.push_back(frame_count(rng));

      const int total = rec.total_frames();
      MelSpectrogram mel;
      mel.sample_rate_hz = config.sample_rate_hz;
      mel.values.resize(total, config.n_mels);
      Vec f0(total);
      int t0 = 0;
      for (std::size_t ph = 0; ph < rec.phonemes.size(); ++ph) {
        const std::string& sym = rec.phonemes[ph];
        const double center =
            static_cast<double>(fnv1a64(sym) % config.n_mels);
        const bool voiced = phoneme_voiced(sym);
        for (int d = 0; d < rec.durations[ph]; ++d, ++t0) {
          const double tpos =
              total > 1 ? static_cast<double>(t0) / (total - 1) - 0.5 : 0.0;
          for (int m = 0; m < config.n_mels; ++m) {
            const double mpos =
                config.n_mels > 1
                    ? static_cast<double>(m) / (config.n_mels - 1) - 0.5
                    : 0.0;
            const double band =
                2.0 * std::exp(-0.5 * std::pow((m - center) / 2.0, 2.0));
            double v = -2.0 + band + 0.8 * z(0) + 1.2 * z(1) * mpos +
                       1.0 * z(2) * tpos + mel_eps(rng);
            v = std::clamp(v, config.mel_floor, 4.0);
            // Quantise through float so the on-disk round trip is exact.
            mel.values(t0, m) = static_cast<float>(v);
          }
          const double hz =
              voiced ? config.f0_base_hz + 30.0 * z(2) + 12.0 * z(0) +
                           6.0 * std::sin(6.283 * tpos)
                     : 0.0;
          f0(t0) = static_cast<float>(std::max(0.0, hz));
        }
      }

      rec.mel_path = "features/" + rec.id + ".melf";
      rec.f0_path = "f0/" + rec.id + ".melf";
      write_features(out_dir / rec.mel_path, mel);
      MelSpectrogram f0mat;
      f0mat.sample_rate_hz = config.sample_rate_hz;
      f0mat.values = f0;
      write_features(out_dir / rec.f0_path, f0mat);

      latents.push_back(
          {{"id", rec.id}, {"latent", std::vector<double>{z(0), z(1), z(2)}}});
      prev_latent = z;
      doc.sentences.push_back(std::move(rec));
    }
    docs.push_back(std::move(doc));
  }

  write_manifest(out_dir / "manifest.jsonl", docs);
  std::ofstream lat(out_dir / "latents.jsonl");
  for (const auto& item : latents) lat << item.dump() << "\n";
}

std::vector<std::pair<std::string, Vec>> load_latents(
    const std::filesystem::path& corpus_dir) {
  const auto path = corpus_dir / "latents.jsonl";
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, Vec>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto vals = j.at("latent").get<std::vector<double>>();
    Vec v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
    out.emplace_back(j.at("id").get<std::string>(), std::move(v));
  }
  return out;
}

}  // namespace castts
