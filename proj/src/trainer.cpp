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

#include "castts/trainer.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "castts/metrics.hpp"
#include "castts/nn/checkpoint.hpp"

namespace castts {

using nn::Mode;
using nn::Tape;
using nn::Var;

Models::Models(const Config& config, std::vector<std::string> inventory) {
  embedder = make_text_embedder(config.embedder);
  Rng ext_rng(config.seed ^ 0x5e1fc0deull);
  extractor = std::make_unique<StyleExtractor>(config, ext_rng);
  Rng pred_rng(config.seed ^ 0x9d1c7a3bull);
  predictor = std::make_unique<StylePredictor>(config, pred_rng);
  Rng ac_rng(config.seed ^ 0xac0571c5ull);
  acoustic = std::make_unique<AcousticModel>(config, std::move(inventory), ac_rng);
}

Trainer::Trainer(const Config& config, Corpus corpus,
                 std::filesystem::path run_dir)
    : cfg_(config), corpus_(std::move(corpus)), run_dir_(std::move(run_dir)),
      models_(config, corpus_.load_inventory()) {
  if (corpus_.documents.empty()) throw InvariantError("trainer: empty corpus");
  std::filesystem::create_directories(run_dir_);
  cfg_.save(run_dir_ / "config.json");
  prepare_examples();
}

void Trainer::prepare_examples() {
  const int n_docs = static_cast<int>(corpus_.documents.size());
  int n_val = 0;
  if (cfg_.training.validation_fraction > 0.0 && n_docs > 1) {
    n_val = std::max(
        1, static_cast<int>(std::lround(n_docs * cfg_.training.validation_fraction)));
    n_val = std::min(n_val, n_docs - 1);
  }
  const int first_val_doc = n_docs - n_val;

  for (int d = 0; d < n_docs; ++d) {
    const ParagraphDocument& doc = corpus_.documents[d];
    for (int s = 0; s < static_cast<int>(doc.sentences.size()); ++s) {
      const SentenceRecord& rec = doc.sentences[s];
      TrainingExample ex;
      ex.doc_index = d;
      ex.sent_index = s;
      ex.id = rec.id;
      ex.phoneme_ids = models_.acoustic->to_ids(rec.phonemes);
      ex.mel = corpus_.load_mel(rec);
      const Vec f0 = corpus_.load_f0(rec);
      if (f0.size() != ex.mel.frames())
        throw InvariantError("sentence " + rec.id +
                             ": f0 length != mel frames");
      const auto n_ph = static_cast<Eigen::Index>(rec.phonemes.size());
      ex.targets.durations = rec.durations;
      ex.targets.pitch.resize(n_ph);
      ex.targets.energy.resize(n_ph);
      Eigen::Index t0 = 0;
      for (Eigen::Index p = 0; p < n_ph; ++p) {
        const int len = rec.durations[p];
        double pitch_sum = 0.0;
        int voiced = 0;
        double energy_sum = 0.0;
        for (int k = 0; k < len; ++k) {
          if (f0(t0 + k) > 0.0) {
            pitch_sum += f0(t0 + k);
            ++voiced;
          }
          energy_sum += ex.mel.values.row(t0 + k).mean();
        }
        ex.targets.pitch(p) = voiced > 0 ? pitch_sum / voiced : 0.0;
        ex.targets.energy(p) = len > 0 ? energy_sum / len : 0.0;
        t0 += len;
      }
      (d < first_val_doc ? train_ : val_).push_back(std::move(ex));
    }
  }
  if (train_.empty()) throw InvariantError("trainer: empty training split");
}

void Trainer::log_loss(int stage, std::int64_t iteration,
                       const std::vector<std::pair<std::string, double>>& parts) {
  std::ofstream os(run_dir_ / "loss_log.jsonl", std::ios::app);
  nlohmann::json j{{"stage", stage}, {"iteration", iteration}};
  for (const auto& [k, v] : parts) j[k] = v;
  os << j.dump() << "\n";
}

void Trainer::ensure_finite(double loss, int stage, std::int64_t iteration,
                            const std::string& sentence_id) const {
  if (!std::isfinite(loss))
    throw std::runtime_error(
        "non-finite loss at stage " + std::to_string(stage) + " iteration " +
        std::to_string(iteration) + " (sentence " + sentence_id +
        "); aborting");
}

std::vector<std::vector<Vec>> Trainer::build_style_cache() {
  std::vector<std::vector<Vec>> cache(corpus_.documents.size());
  for (std::size_t d = 0; d < corpus_.documents.size(); ++d) {
    const auto& doc = corpus_.documents[d];
    cache[d].resize(doc.sentences.size());
    for (std::size_t s = 0; s < doc.sentences.size(); ++s)
      cache[d][s] =
          models_.extractor->extract_style(corpus_.load_mel(doc.sentences[s]))
              .values;
  }
  return cache;
}

ContextWindow Trainer::window_for(
    const TrainingExample& ex,
    const std::vector<std::vector<Vec>>& style_cache) const {
  const int n = cfg_.predictor.context_radius;
  ContextWindow w = build_context_window(corpus_.documents[ex.doc_index],
                                         ex.sent_index, n,
                                         cfg_.extractor.d_style);
  for (int k = 0; k < n; ++k) {
    if (!w.past_pad[k])
      w.prev_styles[k] = style_cache[ex.doc_index][ex.sent_index - n + k];
  }
  return w;
}

void Trainer::run_stage1(bool resume) {
  const auto dir = run_dir_ / "stage1";
  std::filesystem::create_directories(dir);
  std::vector<nn::Parameter*> params;
  models_.extractor->params(params);
  models_.acoustic->params(params);
  nn::Adam opt(params, cfg_.training.lr_stage1, cfg_.training.adam_beta1,
               cfg_.training.adam_beta2, cfg_.training.adam_eps);
  Rng data_rng(cfg_.seed ^ 0x1111ull);
  Rng drop_rng(cfg_.seed ^ 0x2222ull);
  std::int64_t start = 1;
  if (resume) {
    nn::load_checkpoint(dir / "extractor.ckpt", [&] {
      std::vector<nn::Parameter*> p;
      models_.extractor->params(p);
      return p;
    }(), cfg_.extractor_hash());
    nn::load_checkpoint(dir / "acoustic.ckpt", [&] {
      std::vector<nn::Parameter*> p;
      models_.acoustic->params(p);
      return p;
    }(), cfg_.acoustic_hash(static_cast<int>(models_.acoustic->inventory_size())));
    std::int64_t it = 0;
    nn::load_train_state(dir / "state.bin", opt, &it, &data_rng, &drop_rng);
    start = it + 1;
  }
  const std::int64_t total = cfg_.training.scaled(cfg_.training.iterations_stage1);
  const int batch = cfg_.training.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);

  auto save = [&](std::int64_t it) {
    std::vector<nn::Parameter*> pe, pa;
    models_.extractor->params(pe);
    models_.acoustic->params(pa);
    nn::save_checkpoint(dir / "extractor.ckpt", pe, cfg_.extractor_hash());
    nn::save_checkpoint(
        dir / "acoustic.ckpt", pa,
        cfg_.acoustic_hash(static_cast<int>(models_.acoustic->inventory_size())));
    nn::save_train_state(dir / "state.bin", opt, it, data_rng, drop_rng);
  };

  for (std::int64_t it = start; it <= total; ++it) {
    opt.zero_grad();
    double sum = 0, mel = 0, dur = 0, pit = 0, ene = 0;
    for (int b = 0; b < batch; ++b) {
      const TrainingExample& ex = train_[pick(data_rng)];
      Tape t;
      Var style = models_.extractor->extract_style_var(t, ex.mel);
      auto parts = models_.acoustic->training_loss(
          t, ex.phoneme_ids, style, ex.targets, ex.mel.values, Mode::kTrain,
          drop_rng);
      const double item = parts.total.val()(0, 0);
      ensure_finite(item, 1, it, ex.id);
      t.backward(t.scale(parts.total, 1.0 / batch));
      sum += item / batch;
      mel += parts.mel.val()(0, 0) / batch;
      dur += parts.duration.val()(0, 0) / batch;
      pit += parts.pitch.val()(0, 0) / batch;
      ene += parts.energy.val()(0, 0) / batch;
    }
    opt.step();
    if (it == 1 || it == total || it % cfg_.training.log_interval == 0)
      log_loss(1, it, {{"loss", sum}, {"mel", mel}, {"duration", dur},
                       {"pitch", pit}, {"energy", ene}});
    if (cfg_.training.checkpoint_interval > 0 &&
        it % cfg_.training.checkpoint_interval == 0 && it != total)
      save(it);
  }
  save(total);
}

void Trainer::run_stage2(bool resume) {
  const auto stage1 = run_dir_ / "stage1";
  if (!std::filesystem::exists(stage1 / "extractor.ckpt"))
    throw IoError("missing extractor checkpoint: " +
                  (stage1 / "extractor.ckpt").string() + " (run stage 1 first)");
  {
    std::vector<nn::Parameter*> pe;
    models_.extractor->params(pe);
    nn::load_checkpoint(stage1 / "extractor.ckpt", pe, cfg_.extractor_hash());
  }
  const auto dir = run_dir_ / "stage2";
  std::filesystem::create_directories(dir);

  // Frozen extractor: distillation targets and ground-truth previous styles.
  const auto style_cache = build_style_cache();

  std::vector<nn::Parameter*> params;
  models_.predictor->params(params);
  nn::Adam opt(params, cfg_.training.lr_stage2, cfg_.training.adam_beta1,
               cfg_.training.adam_beta2, cfg_.training.adam_eps);
  Rng data_rng(cfg_.seed ^ 0x3333ull);
  Rng drop_rng(cfg_.seed ^ 0x4444ull);
  std::int64_t start = 1;
  if (resume) {
    nn::load_checkpoint(dir / "predictor.ckpt", params, cfg_.predictor_hash());
    std::int64_t it = 0;
    nn::load_train_state(dir / "state.bin", opt, &it, &data_rng, &drop_rng);
    start = it + 1;
  }
  const std::int64_t total = cfg_.training.scaled(cfg_.training.iterations_stage2);
  const int batch = cfg_.training.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);

  auto save = [&](std::int64_t it) {
    nn::save_checkpoint(dir / "predictor.ckpt", params, cfg_.predictor_hash());
    nn::save_train_state(dir / "state.bin", opt, it, data_rng, drop_rng);
  };

  for (std::int64_t it = start; it <= total; ++it) {
    opt.zero_grad();
    double sum = 0;
    for (int b = 0; b < batch; ++b) {
      const TrainingExample& ex = train_[pick(data_rng)];
      const ContextWindow w = window_for(ex, style_cache);
      Tape t;
      Var pred = models_.predictor->predict_style_var(
          t, w, *models_.embedder, Mode::kTrain, drop_rng);
      const Vec& target = style_cache[ex.doc_index][ex.sent_index];
      Var loss = t.mse_loss(pred, target.transpose());
      const double item = loss.val()(0, 0);
      ensure_finite(item, 2, it, ex.id);
      t.backward(t.scale(loss, 1.0 / batch));
      sum += item / batch;
    }
    opt.step();
    if (it == 1 || it == total || it % cfg_.training.log_interval == 0)
      log_loss(2, it, {{"loss", sum}, {"style_mse", sum}});
    if (cfg_.training.checkpoint_interval > 0 &&
        it % cfg_.training.checkpoint_interval == 0 && it != total)
      save(it);
  }
  save(total);
}

void Trainer::run_stage3(bool resume) {
  const auto stage1 = run_dir_ / "stage1";
  const auto stage2 = run_dir_ / "stage2";
  for (const auto& need :
       {stage1 / "extractor.ckpt", stage1 / "acoustic.ckpt",
        stage2 / "predictor.ckpt"})
    if (!std::filesystem::exists(need))
      throw IoError("missing checkpoint: " + need.string() +
                    " (run earlier stages first)");
  {
    std::vector<nn::Parameter*> pe, pa, pp;
    models_.extractor->params(pe);
    models_.acoustic->params(pa);
    models_.predictor->params(pp);
    nn::load_checkpoint(stage1 / "extractor.ckpt", pe, cfg_.extractor_hash());
    nn::load_checkpoint(
        stage1 / "acoustic.ckpt", pa,
        cfg_.acoustic_hash(static_cast<int>(models_.acoustic->inventory_size())));
    nn::load_checkpoint(stage2 / "predictor.ckpt", pp, cfg_.predictor_hash());
  }
  const auto dir = run_dir_ / "stage3";
  std::filesystem::create_directories(dir);

  const auto style_cache = build_style_cache();

  std::vector<nn::Parameter*> params;
  models_.acoustic->params(params);
  models_.predictor->params(params);
  nn::Adam opt(params, cfg_.training.lr_stage1 * cfg_.training.stage3_lr_factor,
               cfg_.training.adam_beta1, cfg_.training.adam_beta2,
               cfg_.training.adam_eps);
  Rng data_rng(cfg_.seed ^ 0x5555ull);
  Rng drop_rng(cfg_.seed ^ 0x6666ull);
  std::int64_t start = 1;
  if (resume) {
    std::vector<nn::Parameter*> pa, pp;
    models_.acoustic->params(pa);
    models_.predictor->params(pp);
    nn::load_checkpoint(
        dir / "acoustic.ckpt", pa,
        cfg_.acoustic_hash(static_cast<int>(models_.acoustic->inventory_size())));
    nn::load_checkpoint(dir / "predictor.ckpt", pp, cfg_.predictor_hash());
    std::int64_t it = 0;
    nn::load_train_state(dir / "state.bin", opt, &it, &data_rng, &drop_rng);
    start = it + 1;
  }
  const std::int64_t total = cfg_.training.scaled(cfg_.training.iterations_stage3);
  const int batch = cfg_.training.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);

  auto save = [&](std::int64_t it) {
    std::vector<nn::Parameter*> pa, pp;
    models_.acoustic->params(pa);
    models_.predictor->params(pp);
    nn::save_checkpoint(
        dir / "acoustic.ckpt", pa,
        cfg_.acoustic_hash(static_cast<int>(models_.acoustic->inventory_size())));
    nn::save_checkpoint(dir / "predictor.ckpt", pp, cfg_.predictor_hash());
    nn::save_train_state(dir / "state.bin", opt, it, data_rng, drop_rng);
  };

  for (std::int64_t it = start; it <= total; ++it) {
    opt.zero_grad();
    double sum = 0, mel = 0;
    for (int b = 0; b < batch; ++b) {
      const TrainingExample& ex = train_[pick(data_rng)];
      const ContextWindow w = window_for(ex, style_cache);
      Tape t;
      Var style = models_.predictor->predict_style_var(
          t, w, *models_.embedder, Mode::kTrain, drop_rng);
      auto parts = models_.acoustic->training_loss(
          t, ex.phoneme_ids, style, ex.targets, ex.mel.values, Mode::kTrain,
          drop_rng);
      const double item = parts.total.val()(0, 0);
      ensure_finite(item, 3, it, ex.id);
      t.backward(t.scale(parts.total, 1.0 / batch));
      sum += item / batch;
      mel += parts.mel.val()(0, 0) / batch;
    }
    opt.step();
    if (it == 1 || it == total || it % cfg_.training.log_interval == 0)
      log_loss(3, it, {{"loss", sum}, {"mel", mel}});
    if (cfg_.training.checkpoint_interval > 0 &&
        it % cfg_.training.checkpoint_interval == 0 && it != total)
      save(it);
  }
  save(total);
}

void Trainer::run_all() {
  run_stage1();
  run_stage2();
  run_stage3();
}

double Trainer::held_out_style_mse() {
  const auto& eval_set = val_.empty() ? train_ : val_;
  const auto style_cache = build_style_cache();
  double acc = 0.0;
  for (const TrainingExample& ex : eval_set) {
    const ContextWindow w = window_for(ex, style_cache);
    const StyleEmbedding pred =
        models_.predictor->predict_style(w, *models_.embedder);
    acc += metrics::style_mse(pred.values,
                              style_cache[ex.doc_index][ex.sent_index]);
  }
  return acc / static_cast<double>(eval_set.size());
}

}  // namespace castts
