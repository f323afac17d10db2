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

// Nearest-neighbour retrieval baseline and the generator-vs-retrieval
// benchmark scored by the contrastive model.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "posegen/clapp.hpp"
#include "posegen/plots.hpp"
#include "posegen/pose.hpp"
#include "posegen/rng.hpp"
#include "posegen/stats.hpp"
#include "posegen/t2p.hpp"
#include "posegen/text_features.hpp"

namespace posegen {

/// Brute-force cosine index over unit-normalized embeddings.
class KnnIndex {
 public:
  struct Entry {
    std::vector<double> embedding;
    Pose pose;
  };

  void add(std::vector<double> embedding, Pose pose) {
    double n = 0.0;
    for (double v : embedding) n += v * v;
    n = std::sqrt(n);
    if (!(n > 0.0)) throw std::invalid_argument("KnnIndex: zero embedding");
    if (!entries_.empty() && embedding.size() != entries_[0].embedding.size()) {
      throw std::invalid_argument("KnnIndex: embedding dim " + std::to_string(embedding.size()) + " differs from " +
                                  std::to_string(entries_[0].embedding.size()));
    }
    for (double& v : embedding) v /= n;
    entries_.push_back({std::move(embedding), std::move(pose)});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<Entry> entries_;
};

struct KnnHit {
  std::size_t index = 0;
  double distance = 0.0;  ///< 1 - cosine
  const Pose* pose = nullptr;
};

struct KnnResult {
  std::vector<KnnHit> hits;
  bool truncated = false;  ///< k exceeded the index size; every entry returned
};

/// k smallest cosine distances; ties go to the lower insertion index.
inline KnnResult knn_retrieve(const KnnIndex& index, std::span<const double> query, std::size_t k) {
  if (k == 0) throw std::invalid_argument("knn_retrieve: k must be >= 1");
  if (index.empty()) throw std::invalid_argument("knn_retrieve: empty index");
  std::vector<KnnHit> all(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (query.size() != index[i].embedding.size()) {
      throw std::invalid_argument("knn_retrieve: query dim " + std::to_string(query.size()) +
                                  " does not match index dim " + std::to_string(index[i].embedding.size()));
    }
    all[i] = {i, 1.0 - cosine(query, index[i].embedding), &index[i].pose};
  }
  KnnResult r;
  r.truncated = k > all.size();
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const KnnHit& a, const KnnHit& b) {
                      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
                    });
  all.resize(take);
  r.hits = std::move(all);
  return r;
}

struct PromptResult {
  std::string caption;
  double clapp_t2p = 0.0;
  double clapp_knn = 0.0;
  double winner = 0.0;  ///< 1 generator wins, 0 retrieval wins, 0.5 tie
};

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  ///< 2 * sd / sqrt(n)
};

/// Normal-approximation interval: mean +- 2 * s / sqrt(n), s the sample sd.
inline MeanCi mean_ci(std::span<const double> v) {
  MeanCi r;
  r.mean = stats::mean(v);
  r.half_width = v.size() > 1 ? 2.0 * stats::stddev(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
  return r;
}

struct BenchmarkReport {
  std::vector<PromptResult> prompts;
  double win_rate = 0.0;
  MeanCi win_rate_ci, t2p, knn;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::size_t k = 1;
};

inline double winner_of(double a, double b) { return a > b ? 1.0 : a < b ? 0.0 : 0.5; }

/// Aggregates per-prompt scores; ties count as half a win.
inline BenchmarkReport summarize(std::vector<PromptResult> prompts) {
  if (prompts.empty()) throw std::invalid_argument("summarize: no prompts");
  BenchmarkReport r;
  std::vector<double> w, a, b;
  for (auto& p : prompts) {
    p.winner = winner_of(p.clapp_t2p, p.clapp_knn);
    w.push_back(p.winner);
    a.push_back(p.clapp_t2p);
    b.push_back(p.clapp_knn);
  }
  r.win_rate = stats::mean(w);
  r.win_rate_ci = mean_ci(w);
  r.t2p = mean_ci(a);
  r.knn = mean_ci(b);
  r.prompts = std::move(prompts);
  return r;
}

struct BenchmarkConfig {
  double temperature = 0.3;
  std::uint64_t seed = 0;
  std::size_t k = 1;  ///< with k > 1 the retrieval arm scores the mean over the k poses
  std::size_t n_candidates = kDefaultCandidates;
};

template <std::floating_point T>
KnnIndex build_text_index(const ClappModel<T>& clapp, const std::vector<PoseRecord>& train,
                          const TextFeatureProvider& provider) {
  std::vector<TextFeatures> texts;
  for (const auto& r : train) texts.push_back(provider.encode(r.caption));
  const auto emb = clapp_text_embeddings(clapp, texts);
  KnnIndex idx;
  for (std::size_t i = 0; i < train.size(); ++i) idx.add(emb[i], train[i].pose);
  return idx;
}

/// Generator vs nearest training pose, one generated pose per eval caption.
template <std::floating_point T>
BenchmarkReport run_benchmark(const T2pModel<T>& t2p, const ClappModel<T>& clapp, const TextFeatureProvider& provider,
                              const std::vector<PoseRecord>& train, const std::vector<PoseRecord>& eval,
                              const BenchmarkConfig& cfg) {
  if (eval.empty()) throw std::invalid_argument("run_benchmark: no eval records");
  if (train.empty()) throw std::invalid_argument("run_benchmark: empty training corpus");
  if (t2p.config().d_text != clapp.config().d_text || provider.dim() != t2p.config().d_text) {
    throw std::invalid_argument("run_benchmark: text dims differ (t2p " + std::to_string(t2p.config().d_text) +
                                ", clapp " + std::to_string(clapp.config().d_text) + ", provider " +
                                std::to_string(provider.dim()) + ")");
  }
  const Temperature temp(cfg.temperature);
  const auto index = build_text_index(clapp, train, provider);
  std::vector<PromptResult> out;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto text = provider.encode(eval[i].caption);
    Rng rng(derive_seed(cfg.seed, i));
    const Pose gen = generate(t2p, text, temp, rng, {cfg.n_candidates, ExistenceMode::kSample});
    const auto q = clapp_text_embeddings(clapp, std::span<const TextFeatures>(&text, 1));
    const auto knn = knn_retrieve(index, q[0], cfg.k);
    std::vector<Pose> cand{gen};
    for (const auto& h : knn.hits) cand.push_back(*h.pose);
    const auto pe = clapp_pose_embeddings(clapp, cand);
    PromptResult pr;
    pr.caption = eval[i].caption;
    pr.clapp_t2p = cosine(q[0], pe[0]);
    for (std::size_t j = 1; j < pe.size(); ++j) pr.clapp_knn += cosine(q[0], pe[j]);
    pr.clapp_knn /= static_cast<double>(pe.size() - 1);
    out.push_back(pr);
  }
  auto rep = summarize(std::move(out));
  rep.temperature = cfg.temperature;
  rep.seed = cfg.seed;
  rep.k = cfg.k;
  return rep;
}

/**
 * Control: the generator against itself. Each eval caption gets
 * draws_per_prompt pairs of independent generations; the expected win rate
 * is exactly 0.5.
 */
template <std::floating_point T>
BenchmarkReport run_self_comparison(const T2pModel<T>& t2p, const ClappModel<T>& clapp,
                                    const TextFeatureProvider& provider, const std::vector<PoseRecord>& eval,
                                    const BenchmarkConfig& cfg, std::size_t draws_per_prompt = 8) {
  if (eval.empty()) throw std::invalid_argument("run_self_comparison: no eval records");
  const Temperature temp(cfg.temperature);
  std::vector<PromptResult> out;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto text = provider.encode(eval[i].caption);
    const auto q = clapp_text_embeddings(clapp, std::span<const TextFeatures>(&text, 1));
    for (std::size_t d = 0; d < draws_per_prompt; ++d) {
      Rng ra(derive_seed(cfg.seed ^ 0x5e1fULL, 2 * (i * draws_per_prompt + d)));
      Rng rb(derive_seed(cfg.seed ^ 0x5e1fULL, 2 * (i * draws_per_prompt + d) + 1));
      const std::vector<Pose> pair{generate(t2p, text, temp, ra, {cfg.n_candidates, ExistenceMode::kSample}),
                                   generate(t2p, text, temp, rb, {cfg.n_candidates, ExistenceMode::kSample})};
      const auto pe = clapp_pose_embeddings(clapp, pair);
      out.push_back({eval[i].caption, cosine(q[0], pe[0]), cosine(q[0], pe[1]), 0.0});
    }
  }
  auto rep = summarize(std::move(out));
  rep.temperature = cfg.temperature;
  rep.seed = cfg.seed;
  return rep;
}

/// index,caption,clapp_t2p,clapp_knn,winner
inline std::string benchmark_csv(const BenchmarkReport& r) {
  std::string s = "index,caption,clapp_t2p,clapp_knn,winner\n";
  for (std::size_t i = 0; i < r.prompts.size(); ++i) {
    const auto& p = r.prompts[i];
    s += std::to_string(i) + "," + plots::csv_field(p.caption) + "," + plots::fmt("%.6f", p.clapp_t2p) + "," +
         plots::fmt("%.6f", p.clapp_knn) + "," + (p.winner == 1.0 ? "t2p" : p.winner == 0.0 ? "knn" : "tie") + "\n";
  }
  return s;
}

inline nlohmann::json benchmark_summary_json(const BenchmarkReport& r) {
  return {{"prompts", r.prompts.size()},
          {"win_rate", r.win_rate},
          {"win_rate_ci_half_width", r.win_rate_ci.half_width},
          {"clapp_t2p_mean", r.t2p.mean},
          {"clapp_t2p_ci_half_width", r.t2p.half_width},
          {"clapp_knn_mean", r.knn.mean},
          {"clapp_knn_ci_half_width", r.knn.half_width},
          {"temperature", r.temperature},
          {"seed", r.seed},
          {"k", r.k}};
}

inline std::string benchmark_svg(const BenchmarkReport& r) {
  const double lo = std::min({0.0, r.t2p.mean - r.t2p.half_width, r.knn.mean - r.knn.half_width});
  return plots::bar_chart_svg({{"T2P", r.t2p.mean, r.t2p.half_width}, {"KNN", r.knn.mean, r.knn.half_width}},
                              "CLaPP score (mean +- 2 sd/sqrt(n)), win rate " + plots::fmt("%.2f", r.win_rate) +
                                  ", T=" + plots::fmt("%g", r.temperature),
                              lo, 1.0);
}

}  // namespace posegen
