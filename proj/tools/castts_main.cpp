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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "castts/config.hpp"
#include "castts/corpus.hpp"
#include "castts/inference.hpp"
#include "castts/metrics.hpp"
#include "castts/style_predictor.hpp"
#include "castts/svg_plot.hpp"
#include "castts/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigArgs {
  std::string preset = "toy";
  std::string config_file;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--preset", args.preset, "Config preset: toy or paper")
      ->check(CLI::IsMember({"toy", "paper"}));
  cmd->add_option("--config", args.config_file, "JSON config file overlay");
  cmd->add_option("--set", args.overrides,
                  "Dotted config override, e.g. training.batch_size=8");
  cmd->add_option("--seed", args.seed, "Override config seed");
}

castts::Config resolve_config(const ConfigArgs& args) {
  castts::Config cfg = castts::Config::preset(args.preset);
  if (!args.config_file.empty()) cfg.apply_file(args.config_file);
  for (const auto& kv : args.overrides) cfg.apply_override(kv);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  return cfg;
}

fs::path manifest_path(const std::string& corpus_arg) {
  fs::path p(corpus_arg);
  if (fs::is_directory(p)) p /= "manifest.jsonl";
  return p;
}

const castts::ParagraphDocument& find_doc(const castts::Corpus& corpus,
                                          const std::string& doc_id) {
  for (const auto& d : corpus.documents)
    if (d.paragraph_id == doc_id) return d;
  throw castts::IoError("paragraph '" + doc_id + "' not found in manifest");
}

int run(int argc, char** argv) {
  CLI::App app{"Context-aware coherent speaking-style synthesis pipeline"};
  app.require_subcommand(1);

  // make-toy-corpus
  auto* make_cmd = app.add_subcommand(
      "make-toy-corpus", "Generate the deterministic synthetic corpus");
  ConfigArgs make_args;
  std::string make_out;
  add_config_options(make_cmd, make_args);
  make_cmd->add_option("--out", make_out, "Output corpus directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Run the training stages");
  ConfigArgs train_args;
  std::string train_corpus, train_out, train_stage = "all";
  bool train_resume = false;
  add_config_options(train_cmd, train_args);
  train_cmd->add_option("--corpus", train_corpus, "Corpus directory or manifest")
      ->required();
  train_cmd->add_option("--out", train_out, "Run directory")->required();
  train_cmd->add_option("--stage", train_stage, "1, 2, 3 or all")
      ->check(CLI::IsMember({"1", "2", "3", "all"}));
  train_cmd->add_flag("--resume", train_resume, "Resume from saved state");

  // synthesize
  auto* synth_cmd =
      app.add_subcommand("synthesize", "Long-form sentence-by-sentence synthesis");
  ConfigArgs synth_args;
  std::string synth_corpus, synth_run, synth_doc, synth_out;
  std::vector<std::string> synth_overrides;
  bool synth_gt_prev = false;
  add_config_options(synth_cmd, synth_args);
  synth_cmd->add_option("--corpus", synth_corpus, "Corpus directory or manifest")
      ->required();
  synth_cmd->add_option("--run", synth_run, "Run directory with checkpoints")
      ->required();
  synth_cmd->add_option("--doc", synth_doc, "Paragraph id to synthesize")
      ->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option(
      "--override-prev", synth_overrides,
      "Replace a previous speech: sentence_index=path/to/features.melf");
  synth_cmd->add_flag("--gt-prev", synth_gt_prev,
                      "Take previous styles from ground-truth mels");

  // evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Objective metrics between synthesized and ground truth");
  ConfigArgs eval_args;
  std::string eval_corpus, eval_run, eval_outputs, eval_report;
  add_config_options(eval_cmd, eval_args);
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus directory or manifest")
      ->required();
  eval_cmd->add_option("--run", eval_run, "Run directory with checkpoints")
      ->required();
  eval_cmd->add_option("--outputs", eval_outputs,
                       "Directory written by synthesize")
      ->required();
  eval_cmd->add_option("--out", eval_report, "Report path (.jsonl)")->required();

  // dump-mask
  auto* mask_cmd =
      app.add_subcommand("dump-mask", "Print a mixture attention mask");
  int mask_context = 0, mask_style = 0;
  mask_cmd->add_option("--n-context", mask_context, "Context token count")
      ->required();
  mask_cmd->add_option("--n-style", mask_style, "Style token count (incl. UNK)")
      ->required();

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Loss curves or pitch contours");
  ConfigArgs plot_args;
  std::string plot_kind, plot_run, plot_corpus, plot_outputs, plot_id, plot_out;
  add_config_options(plot_cmd, plot_args);
  plot_cmd->add_option("--kind", plot_kind, "loss or pitch")
      ->required()
      ->check(CLI::IsMember({"loss", "pitch"}));
  plot_cmd->add_option("--run", plot_run, "Run directory (loss plot)");
  plot_cmd->add_option("--corpus", plot_corpus, "Corpus (pitch plot)");
  plot_cmd->add_option("--outputs", plot_outputs, "Synthesize outputs (pitch plot)");
  plot_cmd->add_option("--id", plot_id, "Sentence id (pitch plot)");
  plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  if (*make_cmd) {
    castts::Config cfg = resolve_config(make_args);
    fs::create_directories(make_out);
    cfg.save(fs::path(make_out) / "corpus_config.json");
    castts::generate_toy_corpus(cfg.corpus, cfg.seed, make_out);
    std::cout << "wrote toy corpus to " << make_out << "\n";
    return 0;
  }

  if (*train_cmd) {
    castts::Config cfg = resolve_config(train_args);
    castts::Corpus corpus = castts::load_corpus(manifest_path(train_corpus));
    castts::Trainer trainer(cfg, std::move(corpus), train_out);
    if (train_stage == "all")
      trainer.run_all();
    else if (train_stage == "1")
      trainer.run_stage1(train_resume);
    else if (train_stage == "2")
      trainer.run_stage2(train_resume);
    else
      trainer.run_stage3(train_resume);
    std::cout << "training stage " << train_stage << " complete; outputs in "
              << train_out << "\n";
    return 0;
  }

  if (*synth_cmd) {
    castts::Config cfg = resolve_config(synth_args);
    castts::Corpus corpus = castts::load_corpus(manifest_path(synth_corpus));
    castts::Models models(cfg, corpus.load_inventory());
    castts::load_pipeline_checkpoints(models, cfg, synth_run);
    const auto& doc = find_doc(corpus, synth_doc);

    castts::InferenceOptions options;
    options.ground_truth_prev =
        synth_gt_prev || cfg.inference.prev_mode == "ground_truth";
    for (const std::string& ov : synth_overrides) {
      const auto eq = ov.find('=');
      if (eq == std::string::npos)
        throw castts::IoError("--override-prev expects index=path, got: " + ov);
      options.override_prev[std::stoi(ov.substr(0, eq))] =
          castts::read_features(ov.substr(eq + 1));
    }

    std::vector<castts::Vec> styles;
    const auto results = castts::synthesize_long_form(models, cfg, doc, &corpus,
                                                      options, &styles);
    fs::create_directories(synth_out);
    std::ofstream manifest(fs::path(synth_out) / "outputs.jsonl");
    std::vector<castts::MelSpectrogram> mels;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& rec = doc.sentences[i];
      const std::string mel_name = rec.id + ".melf";
      const std::string f0_name = rec.id + ".f0.melf";
      castts::write_features(fs::path(synth_out) / mel_name, results[i].mel);
      castts::MelSpectrogram f0;
      f0.sample_rate_hz = results[i].mel.sample_rate_hz;
      f0.values = results[i].frame_f0;
      castts::write_features(fs::path(synth_out) / f0_name, f0);
      std::vector<double> style_vals(styles[i].data(),
                                     styles[i].data() + styles[i].size());
      manifest << json{{"id", rec.id},
                       {"mel_path", mel_name},
                       {"f0_path", f0_name},
                       {"durations", results[i].variances.durations},
                       {"style", style_vals}}
                      .dump()
               << "\n";
      mels.push_back(results[i].mel);
    }
    const auto combined = castts::concat_features(
        mels, cfg.inference.silence_frames, cfg.corpus.mel_floor);
    castts::write_features(fs::path(synth_out) / "combined.melf", combined);
    std::cout << "synthesized " << results.size() << " sentences into "
              << synth_out << "\n";
    return 0;
  }

  if (*eval_cmd) {
    castts::Config cfg = resolve_config(eval_args);
    castts::Corpus corpus = castts::load_corpus(manifest_path(eval_corpus));
    castts::Models models(cfg, corpus.load_inventory());
    castts::load_pipeline_checkpoints(models, cfg, eval_run);

    std::map<std::string, const castts::SentenceRecord*> by_id;
    for (const auto& d : corpus.documents)
      for (const auto& s : d.sentences) by_id[s.id] = &s;

    std::ifstream outputs(fs::path(eval_outputs) / "outputs.jsonl");
    if (!outputs)
      throw castts::IoError("cannot open " +
                            (fs::path(eval_outputs) / "outputs.jsonl").string());
    std::vector<castts::metrics::EvalRecord> records;
    std::string line;
    while (std::getline(outputs, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string id = j.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw castts::IoError("synthesized id '" + id + "' not in corpus");
      const castts::SentenceRecord& rec = *it->second;
      const auto mel_syn = castts::read_features(
          fs::path(eval_outputs) / j.at("mel_path").get<std::string>());
      const auto f0_syn_mat = castts::read_features(
          fs::path(eval_outputs) / j.at("f0_path").get<std::string>());
      const auto durations = j.at("durations").get<std::vector<int>>();
      const auto style_vals = j.at("style").get<std::vector<double>>();
      castts::Vec style(static_cast<Eigen::Index>(style_vals.size()));
      for (std::size_t k = 0; k < style_vals.size(); ++k) style(k) = style_vals[k];

      const auto mel_gt = corpus.load_mel(rec);
      const auto f0_gt = corpus.load_f0(rec);
      const castts::Vec target =
          models.extractor->extract_style(mel_gt).values;

      records.push_back({id, "f0_rmse",
                         castts::metrics::f0_rmse(f0_syn_mat.values.col(0),
                                                  f0_gt, mel_syn.values,
                                                  mel_gt.values)});
      records.push_back(
          {id, "mcd", castts::metrics::mcd(mel_syn.values, mel_gt.values)});
      records.push_back({id, "duration_mse",
                         castts::metrics::duration_mse(durations, rec.durations)});
      records.push_back(
          {id, "style_mse", castts::metrics::style_mse(style, target)});
    }
    castts::metrics::write_eval_report(eval_report, records);
    std::cout << "wrote " << records.size() << " metric records to "
              << eval_report << "\n";
    return 0;
  }

  if (*mask_cmd) {
    const auto mask = castts::build_mixture_attention_mask(mask_context, mask_style);
    for (Eigen::Index q = 0; q < mask.rows(); ++q) {
      for (Eigen::Index k = 0; k < mask.cols(); ++k)
        std::cout << (mask(q, k) ? '1' : '0') << (k + 1 < mask.cols() ? " " : "");
      std::cout << "\n";
    }
    return 0;
  }

  if (*plot_cmd) {
    if (plot_kind == "loss") {
      if (plot_run.empty())
        throw castts::IoError("plot --kind loss needs --run");
      std::ifstream is(fs::path(plot_run) / "loss_log.jsonl");
      if (!is)
        throw castts::IoError("cannot open " +
                              (fs::path(plot_run) / "loss_log.jsonl").string());
      std::map<int, castts::PlotSeries> by_stage;
      const char* colors[] = {"steelblue", "darkorange", "seagreen"};
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const int stage = j.at("stage").get<int>();
        auto& s = by_stage[stage];
        if (s.label.empty()) {
          s.label = "stage " + std::to_string(stage);
          s.color = colors[(stage - 1) % 3];
        }
        s.x.push_back(j.at("iteration").get<double>());
        s.y.push_back(j.at("loss").get<double>());
      }
      std::vector<castts::PlotSeries> series;
      for (auto& [stage, s] : by_stage) series.push_back(std::move(s));
      castts::write_line_chart(plot_out, "training loss", "iteration", "loss",
                               series);
    } else {
      if (plot_corpus.empty() || plot_outputs.empty() || plot_id.empty())
        throw castts::IoError(
            "plot --kind pitch needs --corpus, --outputs and --id");
      castts::Corpus corpus = castts::load_corpus(manifest_path(plot_corpus));
      const castts::SentenceRecord* rec = nullptr;
      for (const auto& d : corpus.documents)
        for (const auto& s : d.sentences)
          if (s.id == plot_id) rec = &s;
      if (!rec) throw castts::IoError("sentence '" + plot_id + "' not found");
      const auto mel_syn = castts::read_features(
          fs::path(plot_outputs) / (plot_id + ".melf"));
      const auto f0_syn = castts::read_features(
          fs::path(plot_outputs) / (plot_id + ".f0.melf"));
      const castts::Vec f0_gt = corpus.load_f0(*rec);
      castts::PlotSeries gt{"ground truth F0", "steelblue", {}, {}};
      for (Eigen::Index i = 0; i < f0_gt.size(); ++i) {
        gt.x.push_back(static_cast<double>(i));
        gt.y.push_back(f0_gt(i));
      }
      castts::PlotSeries syn{"synthesized F0", "darkorange", {}, {}};
      for (Eigen::Index i = 0; i < f0_syn.values.rows(); ++i) {
        syn.x.push_back(static_cast<double>(i));
        syn.y.push_back(f0_syn.values(i, 0));
      }
      castts::write_mel_pitch_chart(plot_out, "pitch contours: " + plot_id,
                                    mel_syn.values, {gt, syn});
    }
    std::cout << "wrote " << plot_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
