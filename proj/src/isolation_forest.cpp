// Copyright 2026 The pickle-sentry Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "ml_internal.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;
  constexpr double kEulerGamma = 0.57721566490153286;
  return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

namespace ml {

double isolation_score(const IsolationParams& params, std::span<const double> input) {
  double total = 0.0;
  for (const auto& tree : params.trees) {
    std::size_t depth = 0;
    const auto& leaf = leaf_for(tree, input, &depth);
    total += static_cast<double>(depth) + average_path_length(leaf.value);
  }
  double mean = total / static_cast<double>(params.trees.size());
  return std::exp2(-mean / average_path_length(static_cast<double>(params.subsample)));
}

}  // namespace ml

namespace {

DecisionTree grow(const ml::Matrix& x, std::vector<std::uint32_t> rows, std::size_t height_limit,
                  ml::Rng& rng) {
  struct Work {
    std::uint32_t node;
    std::size_t begin;
    std::size_t end;
    std::size_t depth;
  };
  DecisionTree tree;
  tree.nodes.emplace_back();
  std::vector<Work> stack{{0, 0, rows.size(), 0}};
  std::vector<std::size_t> features;
  std::vector<std::pair<double, double>> ranges;
  while (!stack.empty()) {
    Work w = stack.back();
    stack.pop_back();
    std::size_t n = w.end - w.begin;
    tree.nodes[w.node].value = static_cast<double>(n);
    if (n <= 1 || w.depth >= height_limit) continue;

    features.clear();
    ranges.clear();
    for (std::size_t f = 0; f < x.cols; ++f) {
      double lo = x.at(rows[w.begin], f);
      double hi = lo;
      for (std::size_t i = w.begin + 1; i < w.end; ++i) {
        double v = x.at(rows[i], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo < hi) {
        features.push_back(f);
        ranges.emplace_back(lo, hi);
      }
    }
    if (features.empty()) continue;
    std::size_t pick = rng.index(features.size());
    std::size_t f = features[pick];
    auto [lo, hi] = ranges[pick];
    double t = lo + rng.unit() * (hi - lo);
    if (!(t < hi)) t = lo;

    auto first = rows.begin() + static_cast<std::ptrdiff_t>(w.begin);
    auto last = rows.begin() + static_cast<std::ptrdiff_t>(w.end);
    auto mid = std::stable_partition(first, last, [&](std::uint32_t r) { return x.at(r, f) <= t; });
    auto split_at = static_cast<std::size_t>(mid - rows.begin());

    auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[w.node];
    node.feature = static_cast<std::int32_t>(f);
    node.threshold = t;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split_at, w.end, w.depth + 1});
    stack.push_back({left, w.begin, split_at, w.depth + 1});
  }
  return tree;
}

}  // namespace

TrainedModel train_isolation_forest(const LabeledCorpus& corpus,
                                    const IsolationForestConfig& config) {
  if (corpus.size() < 8) {
    throw Error(ErrorCode::kCorpusTooSmall, "isolation forest needs at least 8 samples");
  }
  if (config.n_trees == 0) throw Error(ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  if (config.subsample < 2) throw Error(ErrorCode::kInvalidArgument, "subsample must be >= 2");
  if (!(config.contamination >= 0.0 && config.contamination < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "contamination must be in [0, 1)");
  }
  TrainedModel model;
  ml::Matrix x = ml::prepare(corpus, model.projection);

  IsolationParams params;
  params.subsample = std::min(config.subsample, x.rows);
  auto height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(params.subsample))));
  std::vector<std::uint32_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0u);
  params.trees.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    ml::Rng rng(ml::stream_seed(config.seed, t));
    std::vector<std::uint32_t> rows = all;
    for (std::size_t i = 0; i < params.subsample; ++i) {
      std::swap(rows[i], rows[i + rng.index(rows.size() - i)]);
    }
    rows.resize(params.subsample);
    params.trees.push_back(grow(x, std::move(rows), height_limit, rng));
  }

  std::vector<double> scores;
  scores.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) scores.push_back(ml::isolation_score(params, x.row(r)));
  std::sort(scores.begin(), scores.end());
  auto flagged = static_cast<std::size_t>(
      std::floor(config.contamination * static_cast<double>(scores.size())));
  model.threshold = scores[scores.size() - 1 - flagged];

  model.kind = ModelKind::kIsolationForest;
  model.params = std::move(params);
  model.seed = config.seed;
  model.vocabulary_fingerprint = vocabulary_fingerprint();
  return model;
}

}  // namespace pickle_sentry
