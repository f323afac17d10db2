// Copyright 2026 The Posegen Authors.
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


// Command-line front end. cli_main is kept separate from main() so tests can
// drive it in-process.

#pragma once

#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "posegen/bench.hpp"
#include "posegen/clapp.hpp"
#include "posegen/png_writer.hpp"
#include "posegen/pose_io.hpp"
#include "posegen/render.hpp"
#include "posegen/synth.hpp"
#include "posegen/t2p.hpp"
#include "posegen/tempered_demo.hpp"
#include "posegen/text_features.hpp"
#include "posegen/trainer.hpp"

namespace posegen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

namespace fs = std::filesystem;

/// Text outputs are buffered and written only once the command succeeded.
class PendingFiles {
 public:
  void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }
  void commit() const {
    for (const auto& [path, content] : files_) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      plots::write_text(path, content);
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

inline std::string records_jsonl(const std::vector<PoseRecord>& records) {
  std::ostringstream s;
  write_records(s, records);
  return s.str();
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct Common {
  bool verbose = false;
  std::uint64_t seed = 0;
};

struct SynthArgs {
  std::size_t size = 5000;
  std::string out, train_out, eval_out;
  double train_frac = 0.9;
};

struct TrainT2pArgs {
  std::string corpus, out, loss_csv;
  TrainConfig train{.batch_size = 16, .learning_rate = 2e-3, .warmup_steps = 200, .existence_weight = 10.0};
  T2pConfig model{.n_layers = 2, .d_model = 64};
};

struct TrainClappArgs {
  std::string corpus, out, loss_csv, eval;
  TrainConfig train{.steps = 1000, .batch_size = 32, .learning_rate = 1e-3};
  ClappConfig model;
};

struct GenerateArgs {
  std::string ckpt, prompt, out, svg, features;
  double temp = 1.0;
  std::size_t count = 1, candidates = kDefaultCandidates;
  bool threshold = false;
};

struct ScoreArgs {
  std::string clapp, records, prompt, out;
  bool matrix = false;
};

struct BenchArgs {
  std::string t2p, clapp, train, eval, out;
  double temp = 0.3;
  std::size_t k = 1, candidates = kDefaultCandidates, limit = 0;
  bool self_control = false;
};

struct RenderArgs {
  std::string in, out;
  std::size_t index = 0;
  int size = 512;
};

struct DemoArgs {
  std::string out;
  std::vector<double> temps{1.0, 0.3, 0.05};
  std::size_t n = 10000, candidates = kDemoCandidates;
};

inline void log(const Common& c, std::ostream& err, const std::string& msg) {
  if (c.verbose) err << "[posegen] " << msg << "\n";
}

inline int run_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  const auto corpus = generate_corpus(c.seed, a.size);
  PendingFiles files;
  files.add(a.out, records_jsonl(corpus.records));
  if (!a.train_out.empty() || !a.eval_out.empty()) {
    const auto sp = split(corpus, a.train_frac);
    if (!a.train_out.empty()) files.add(a.train_out, records_jsonl(sp.train));
    if (!a.eval_out.empty()) files.add(a.eval_out, records_jsonl(sp.eval));
  }
  files.commit();
  out << "wrote " << corpus.records.size() << " records (" << kGrammarVersion << ", seed " << c.seed << ") to "
      << a.out << "\n";
  return kExitOk;
}

inline int run_train_t2p(const Common& c, TrainT2pArgs a, std::ostream& out, std::ostream& err) {
  a.train.seed = c.seed;
  a.model.validate();
  a.train.validate();
  const auto corpus = load_records(a.corpus);
  T2pModel<float> model(a.model, derive_seed(c.seed, 0));
  log(c, err, "t2p config " + to_json(a.model).dump() + ", " + std::to_string(model.parameters().count_scalars()) + " params");
  TrainOutputs o;
  o.checkpoint = fs::path(a.out);
  ensure_parent(a.out);
  if (!a.loss_csv.empty()) {
    o.loss_csv = fs::path(a.loss_csv);
    ensure_parent(a.loss_csv);
  }
  if (c.verbose) {
    o.on_log = [&err](const LossPoint& p) {
      err << "[posegen] step " << p.step << " loss " << p.loss << " nll " << p.term_a << " bce " << p.term_b
          << " |g| " << p.grad_norm << "\n";
    };
  }
  const auto res = train_t2p(a.train, corpus, model, ToyTextEncoder{}, o);
  out << "trained t2p for " << a.train.steps << " steps";
  if (!res.curve.empty()) {
    const auto e = smoothed_ends(res.curve, 50);
    out << ", smoothed loss " << plots::fmt("%.4f", e.initial) << " -> " << plots::fmt("%.4f", e.final);
  }
  out << "; checkpoint " << a.out << "\n";
  return kExitOk;
}

inline int run_train_clapp(const Common& c, TrainClappArgs a, std::ostream& out, std::ostream& err) {
  a.train.seed = c.seed;
  a.model.validate();
  a.train.validate(2);
  const auto corpus = load_records(a.corpus);
  std::vector<PoseRecord> eval;
  if (!a.eval.empty()) eval = load_records(a.eval);
  ClappModel<float> model(a.model, derive_seed(c.seed, 0));
  TrainOutputs o;
  o.checkpoint = fs::path(a.out);
  ensure_parent(a.out);
  if (!a.loss_csv.empty()) {
    o.loss_csv = fs::path(a.loss_csv);
    ensure_parent(a.loss_csv);
  }
  if (c.verbose) {
    o.on_log = [&err](const LossPoint& p) {
      err << "[posegen] step " << p.step << " loss " << p.loss << " |g| " << p.grad_norm << "\n";
    };
  }
  const auto res = train_clapp(a.train, corpus, model, ToyTextEncoder{}, o);
  out << "trained clapp for " << a.train.steps << " steps";
  if (!res.curve.empty()) out << ", final loss " << plots::fmt("%.4f", res.curve.back().loss);
  if (eval.size() >= 64) {
    out << ", held-out top-1 retrieval@64 "
        << plots::fmt("%.3f", clapp_retrieval_accuracy(model, eval, ToyTextEncoder{}, 64, c.seed));
  }
  out << "; checkpoint " << a.out << "\n";
  return kExitOk;
}

inline int run_generate(const Common& c, const GenerateArgs& a, std::ostream& out) {
  const Temperature temp(a.temp);
  const auto model = load_t2p(a.ckpt);
  const TextFeatures text =
      a.features.empty() ? ToyTextEncoder{}.encode(a.prompt) : load_features(a.features, model.config().d_text);
  check_feature_dim(text, model.config().d_text);
  const GenerateOptions opt{a.candidates, a.threshold ? ExistenceMode::kThreshold : ExistenceMode::kSample};
  std::vector<PoseRecord> recs;
  for (std::size_t i = 0; i < a.count; ++i) {
    Rng rng(derive_seed(c.seed, i));
    recs.emplace_back(a.prompt, generate(model, text, temp, rng, opt),
                      "t2p:seed=" + std::to_string(c.seed) + ":temp=" + plots::fmt("%g", a.temp) + ":i=" +
                          std::to_string(i));
  }
  PendingFiles files;
  files.add(a.out, records_jsonl(recs));
  if (!a.svg.empty()) files.add(a.svg, render_svg(recs[0].pose, 512));
  files.commit();
  out << "generated " << recs.size() << " pose(s) at T=" << a.temp << " to " << a.out << "\n";
  return kExitOk;
}

inline int run_score(const ScoreArgs& a, std::ostream& out) {
  const auto model = load_clapp(a.clapp);
  const auto records = load_records(a.records);
  if (records.empty()) throw std::invalid_argument("score: no records in " + a.records);
  const ToyTextEncoder enc;
  std::string csv = "index,caption,pose_caption,score\n";
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string& caption = a.prompt.empty() ? records[i].caption : a.prompt;
    const double s = clapp_score(model, caption, records[i].pose, enc);
    total += s;
    csv += std::to_string(i) + "," + plots::csv_field(caption) + "," + plots::csv_field(records[i].caption) + "," +
           plots::fmt("%.6f", s) + "\n";
    if (a.out.empty()) out << i << "\t" << plots::fmt("%.6f", s) << "\t" << caption << "\n";
  }
  PendingFiles files;
  if (!a.out.empty()) files.add(fs::path(a.out) / "scores.csv", csv);
  if (a.matrix) {
    const auto m = score_matrix(model, records, enc);
    std::string mc = "caption";
    for (std::size_t j = 0; j < m.size(); ++j) mc += ",pose_" + std::to_string(j);
    mc += "\n";
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m.size(); ++i) {
      mc += plots::csv_field(records[i].caption);
      for (double v : m[i]) mc += "," + plots::fmt("%.6f", v);
      mc += "\n";
      labels.push_back(records[i].caption);
    }
    std::vector<std::string> cols;
    for (std::size_t j = 0; j < m.size(); ++j) cols.push_back("pose " + std::to_string(j));
    if (a.out.empty()) throw std::invalid_argument("score: --matrix needs --out");
    files.add(fs::path(a.out) / "score_matrix.csv", mc);
    files.add(fs::path(a.out) / "score_matrix.svg", plots::heatmap_svg(m, labels, cols, "CLaPP score matrix"));
    out << "diagonal dominance " << plots::fmt("%.3f", diagonal_dominance(m)) << "\n";
  }
  files.commit();
  out << "mean score " << plots::fmt("%.6f", total / static_cast<double>(records.size())) << " over "
      << records.size() << " record(s)\n";
  return kExitOk;
}

inline int run_benchmark_cmd(const Common& c, const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const auto t2p = load_t2p(a.t2p);
  const auto clapp = load_clapp(a.clapp);
  const auto train = load_records(a.train);
  auto eval = load_records(a.eval);
  if (a.limit && eval.size() > a.limit) eval.erase(eval.begin() + static_cast<std::ptrdiff_t>(a.limit), eval.end());
  const BenchmarkConfig cfg{a.temp, c.seed, a.k, a.candidates};
  log(c, err, "benchmark over " + std::to_string(eval.size()) + " prompts, index of " + std::to_string(train.size()));
  const auto rep = run_benchmark(t2p, clapp, ToyTextEncoder{}, train, eval, cfg);
  auto summary = benchmark_summary_json(rep);
  PendingFiles files;
  files.add(fs::path(a.out) / "benchmark.csv", benchmark_csv(rep));
  files.add(fs::path(a.out) / "benchmark.svg", benchmark_svg(rep));
  if (a.self_control) {
    const auto ctl = run_self_comparison(t2p, clapp, ToyTextEncoder{}, eval, cfg);
    summary["self_control_win_rate"] = ctl.win_rate;
    files.add(fs::path(a.out) / "self_control.csv", benchmark_csv(ctl));
  }
  files.add(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  files.commit();
  out << "win rate " << plots::fmt("%.3f", rep.win_rate) << " (t2p " << plots::fmt("%.4f", rep.t2p.mean) << " +- "
      << plots::fmt("%.4f", rep.t2p.half_width) << ", knn " << plots::fmt("%.4f", rep.knn.mean) << " +- "
      << plots::fmt("%.4f", rep.knn.half_width) << ") over " << rep.prompts.size() << " prompts at T=" << a.temp
      << "\n";
  return kExitOk;
}

inline int run_render(const RenderArgs& a, std::ostream& out) {
  const auto records = load_records(a.in);
  if (a.index >= records.size()) {
    throw std::out_of_range("render: index " + std::to_string(a.index) + " out of range (" +
                            std::to_string(records.size()) + " records)");
  }
  const auto& pose = records[a.index].pose;
  const auto ext = fs::path(a.out).extension().string();
  if (ext == ".png") {
    const auto img = rasterize(pose, a.size);
    ensure_parent(a.out);
    write_png(img, a.out);
  } else {
    PendingFiles files;
    files.add(a.out, render_svg(pose, a.size));
    files.commit();
  }
  out << "rendered record " << a.index << " to " << a.out << "\n";
  return kExitOk;
}

inline int run_demo(const Common& c, const DemoArgs& a, std::ostream& out) {
  TemperedDemoConfig cfg;
  cfg.temperatures = a.temps;
  cfg.n_samples = a.n;
  cfg.n_candidates = a.candidates;
  cfg.seed = c.seed;
  const auto res = tempered_demo(cfg);
  PendingFiles files;
  files.add(fs::path(a.out) / "tempered_demo.csv", tempered_demo_csv(res));
  files.add(fs::path(a.out) / "tempered_demo.svg", tempered_demo_svg(res));
  files.commit();
  out << "wrote tempered_demo.csv and tempered_demo.svg to " << a.out << "\n";
  return kExitOk;
}

}  // namespace detail

/// Runs one subcommand. Exit codes: 0 success, 1 runtime error, 2 usage error.
inline int cli_main(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"posegen: text-conditioned pose generation with tempered sampling", "posegen"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_flag("-v,--verbose", common.verbose, "Progress messages on stderr");
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  };
  app.add_flag("-v,--verbose", common.verbose, "Progress messages on stderr");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic captioned pose corpus");
  add_common(s_synth);
  s_synth->add_option("--size", synth.size, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
  s_synth->add_option("--out", synth.out, "Output JSON-lines file")->required();
  s_synth->add_option("--train-frac", synth.train_frac, "Train fraction for the split")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  s_synth->add_option("--train-out", synth.train_out, "Also write the train split here");
  s_synth->add_option("--eval-out", synth.eval_out, "Also write the eval split here");

  TrainT2pArgs tt;
  auto* s_tt = app.add_subcommand("train-t2p", "Train the text-to-pose generator");
  add_common(s_tt);
  s_tt->add_option("--corpus", tt.corpus, "Training records (JSON lines)")->required()->check(CLI::ExistingFile);
  s_tt->add_option("--out", tt.out, "Checkpoint path (a .json sidecar is written next to it)")->required();
  s_tt->add_option("--loss-csv", tt.loss_csv, "Loss curve CSV");
  s_tt->add_option("--steps", tt.train.steps)->capture_default_str();
  s_tt->add_option("--batch", tt.train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--lr", tt.train.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--clip", tt.train.grad_clip)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_flag("--cosine", tt.train.cosine_decay, "Cosine learning-rate decay");
  s_tt->add_option("--warmup", tt.train.warmup_steps, "Linear warmup steps")->capture_default_str();
  s_tt->add_option("--existence-weight", tt.train.existence_weight, "Gradient weight of the existence BCE term")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_tt->add_option("--log-every", tt.train.log_every)->capture_default_str();
  s_tt->add_option("--checkpoint-every", tt.train.checkpoint_every)->capture_default_str();
  s_tt->add_option("--layers", tt.model.n_layers)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--d-model", tt.model.d_model)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--heads", tt.model.n_heads)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--mixtures", tt.model.k_mixtures)->capture_default_str()->check(CLI::PositiveNumber);
  s_tt->add_option("--dropout", tt.model.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.99));

  TrainClappArgs tc;
  auto* s_tc = app.add_subcommand("train-clapp", "Train the contrastive text/pose scorer");
  add_common(s_tc);
  s_tc->add_option("--corpus", tc.corpus, "Training records (JSON lines)")->required()->check(CLI::ExistingFile);
  s_tc->add_option("--out", tc.out, "Checkpoint path")->required();
  s_tc->add_option("--eval", tc.eval, "Held-out records for retrieval accuracy")->check(CLI::ExistingFile);
  s_tc->add_option("--loss-csv", tc.loss_csv, "Loss curve CSV");
  s_tc->add_option("--steps", tc.train.steps)->capture_default_str();
  s_tc->add_option("--batch", tc.train.batch_size)->capture_default_str()->check(CLI::Range(2, 1 << 20));
  s_tc->add_option("--lr", tc.train.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  s_tc->add_flag("--cosine", tc.train.cosine_decay, "Cosine learning-rate decay");
  s_tc->add_option("--warmup", tc.train.warmup_steps, "Linear warmup steps")->capture_default_str();
  s_tc->add_option("--log-every", tc.train.log_every)->capture_default_str();
  s_tc->add_option("--hidden", tc.model.hidden)->capture_default_str()->check(CLI::PositiveNumber);
  s_tc->add_option("--d-joint", tc.model.d_joint)->capture_default_str()->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* s_gen = app.add_subcommand("generate", "Sample poses for a prompt");
  add_common(s_gen);
  s_gen->add_option("--ckpt", gen.ckpt, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  s_gen->add_option("--prompt", gen.prompt, "Caption")->required();
  s_gen->add_option("--temp", gen.temp, "Sampling temperature")->capture_default_str()->check(CLI::PositiveNumber);
  s_gen->add_option("--out", gen.out, "Output JSON-lines file")->required();
  s_gen->add_option("--svg", gen.svg, "Also render the first pose as SVG");
  s_gen->add_option("--count", gen.count, "Number of poses")->capture_default_str()->check(CLI::PositiveNumber);
  s_gen->add_option("--candidates", gen.candidates, "Candidates per tempered draw")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_gen->add_option("--features", gen.features, "Precomputed text features (checkpoint file)")
      ->check(CLI::ExistingFile);
  s_gen->add_flag("--threshold-existence", gen.threshold, "Keep a point iff its existence logit is positive");

  ScoreArgs sc;
  auto* s_sc = app.add_subcommand("score", "Score poses against captions");
  add_common(s_sc);
  s_sc->add_option("--clapp", sc.clapp, "Scorer checkpoint")->required()->check(CLI::ExistingFile);
  s_sc->add_option("--records", sc.records, "Pose records (JSON lines)")->required()->check(CLI::ExistingFile);
  s_sc->add_option("--prompt", sc.prompt, "Score every pose against this caption instead of its own");
  s_sc->add_option("--out", sc.out, "Output directory");
  s_sc->add_flag("--matrix", sc.matrix, "Also write the caption x pose score matrix and heatmap");

  BenchArgs bench;
  auto* s_b = app.add_subcommand("benchmark", "Generator vs nearest-neighbour retrieval, scored by the scorer");
  add_common(s_b);
  s_b->add_option("--t2p", bench.t2p, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  s_b->add_option("--clapp", bench.clapp, "Scorer checkpoint")->required()->check(CLI::ExistingFile);
  s_b->add_option("--train", bench.train, "Retrieval corpus")->required()->check(CLI::ExistingFile);
  s_b->add_option("--eval", bench.eval, "Evaluation prompts (records)")->required()->check(CLI::ExistingFile);
  s_b->add_option("--out", bench.out, "Output directory")->required();
  s_b->add_option("--temp", bench.temp)->capture_default_str()->check(CLI::PositiveNumber);
  s_b->add_option("--k", bench.k, "Neighbours in the retrieval arm")->capture_default_str()->check(CLI::PositiveNumber);
  s_b->add_option("--candidates", bench.candidates)->capture_default_str()->check(CLI::PositiveNumber);
  s_b->add_option("--limit", bench.limit, "Use at most this many eval prompts (0 = all)")->capture_default_str();
  s_b->add_flag("--self-control", bench.self_control, "Also run the generator-vs-itself control");

  RenderArgs rend;
  auto* s_r = app.add_subcommand("render", "Draw a pose record as SVG or PNG");
  add_common(s_r);
  s_r->add_option("--in", rend.in, "Pose records (JSON lines)")->required()->check(CLI::ExistingFile);
  s_r->add_option("--index", rend.index, "Record index")->capture_default_str();
  s_r->add_option("--out", rend.out, "Output .svg or .png")->required();
  s_r->add_option("--size", rend.size, "Canvas size in pixels")->capture_default_str()->check(CLI::Range(64, 8192));

  DemoArgs demo;
  auto* s_d = app.add_subcommand("tempered-demo", "Tempered sampling on a 1-D mixture: density vs histogram");
  add_common(s_d);
  s_d->add_option("--out", demo.out, "Output directory")->required();
  s_d->add_option("--temps", demo.temps, "Temperatures")->delimiter(',')->capture_default_str()->check(
      CLI::PositiveNumber);
  s_d->add_option("--n", demo.n, "Draws per temperature")->capture_default_str()->check(CLI::PositiveNumber);
  s_d->add_option("--candidates", demo.candidates)->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  for (auto it = args.rbegin(); it != args.rend(); ++it) {
    if (it->empty() || (*it)[0] == '-') continue;
    if (app.get_subcommand_no_throw(*it) == nullptr) {
      err << "error: unknown subcommand '" << *it << "'\n\n" << app.help();
      return kExitUsage;
    }
    break;
  }
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
      out << sub->help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*s_synth) return run_synth(common, synth, out);
    if (*s_tt) return run_train_t2p(common, tt, out, err);
    if (*s_tc) return run_train_clapp(common, tc, out, err);
    if (*s_gen) return run_generate(common, gen, out);
    if (*s_sc) return run_score(sc, out);
    if (*s_b) return run_benchmark_cmd(common, bench, out, err);
    if (*s_r) return run_render(rend, out);
    if (*s_d) return run_demo(common, demo, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

inline int cli_main(int argc, const char* const* argv) {
  return cli_main(std::vector<std::string>(argv, argv + argc));
}

}  // namespace posegen::cli
