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
#include <atomic>
#include <cmath>
#include <thread>
#include <utility>
#include <vector>

#include "ml_internal.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {
namespace ml {

Matrix prepare(const LabeledCorpus& corpus, VocabularyProjection& projection) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "training corpus is empty");
  std::vector<FeatureVector> vectors;
  vectors.reserve(corpus.size());
  for (const auto& s : corpus) vectors.push_back(s.vector);
  projection = fit_projection(vectors);

  Matrix m;
  m.rows = corpus.size();
  m.cols = projection.kept_indices.size() + 1;
  m.data.reserve(m.rows * m.cols);
  for (const auto& v : vectors) {
    auto p = project(v, projection);
    m.data.insert(m.data.end(), p.freqs.begin(), p.freqs.end());
    m.data.push_back(p.oov_mass);
  }
  return m;
}

double forest_score(const ForestParams& params, std::span<const double> input) {
  double sum = 0.0;
  for (const auto& tree : params.trees) sum += leaf_for(tree, input).value;
  return sum / static_cast<double>(params.trees.size());
}

}  // namespace ml

namespace {

struct Work {
  std::uint32_t node;
  std::size_t begin;
  std::size_t end;
  std::size_t depth;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;
  bool found = false;
};

class TreeBuilder {
 public:
  TreeBuilder(const ml::Matrix& x, const std::vector<std::uint8_t>& y, const ForestConfig& config,
              std::size_t mtry)
      : x_(x), y_(y), config_(config), mtry_(mtry) {}

  DecisionTree build(std::uint64_t seed) {
    ml::Rng rng(seed);
    std::vector<std::uint32_t> sample(x_.rows);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.index(x_.rows));

    DecisionTree tree;
    tree.nodes.emplace_back();
    std::vector<Work> stack{{0, 0, sample.size(), 0}};
    std::vector<std::size_t> candidates;
    while (!stack.empty()) {
      Work w = stack.back();
      stack.pop_back();
      std::size_t n = w.end - w.begin;
      std::size_t malicious = 0;
      for (std::size_t i = w.begin; i < w.end; ++i) malicious += y_[sample[i]];
      tree.nodes[w.node].value = static_cast<double>(malicious) / static_cast<double>(n);

      bool pure = malicious == 0 || malicious == n;
      bool too_small = n < 2 * config_.min_leaf;
      bool too_deep = config_.max_depth && w.depth >= *config_.max_depth;
      if (pure || too_small || too_deep) continue;

      non_constant(sample, w, candidates);
      std::size_t take = std::min(mtry_, candidates.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
      }
      Split best;
      for (std::size_t i = 0; i < take; ++i) {
        evaluate(sample, w, candidates[i], malicious, best);
      }
      if (!best.found) continue;

      auto first = sample.begin() + static_cast<std::ptrdiff_t>(w.begin);
      auto last = sample.begin() + static_cast<std::ptrdiff_t>(w.end);
      auto mid = std::stable_partition(first, last, [&](std::uint32_t r) {
        return x_.at(r, best.feature) <= best.threshold;
      });
      auto split_at = static_cast<std::size_t>(mid - sample.begin());

      auto left = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[w.node];
      node.feature = static_cast<std::int32_t>(best.feature);
      node.threshold = best.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, split_at, w.end, w.depth + 1});
      stack.push_back({left, w.begin, split_at, w.depth + 1});
    }
    return tree;
  }

 private:
  void non_constant(const std::vector<std::uint32_t>& sample, const Work& w,
                    std::vector<std::size_t>& out) const {
    out.clear();
    for (std::size_t f = 0; f < x_.cols; ++f) {
      double first = x_.at(sample[w.begin], f);
      for (std::size_t i = w.begin + 1; i < w.end; ++i) {
        if (x_.at(sample[i], f) != first) {
          out.push_back(f);
          break;
        }
      }
    }
  }

  void evaluate(const std::vector<std::uint32_t>& sample, const Work& w, std::size_t feature,
                std::size_t malicious, Split& best) {
    std::size_t n = w.end - w.begin;
    column_.clear();
    for (std::size_t i = w.begin; i < w.end; ++i) {
      column_.emplace_back(x_.at(sample[i], feature), y_[sample[i]]);
    }
    std::sort(column_.begin(), column_.end());
    std::size_t left_n = 0;
    std::size_t left_m = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      ++left_n;
      left_m += column_[i].second;
      if (!(column_[i].first < column_[i + 1].first)) continue;
      std::size_t right_n = n - left_n;
      if (left_n < config_.min_leaf || right_n < config_.min_leaf) continue;
      std::size_t right_m = malicious - left_m;
      // n * weighted Gini impurity of the two children.
      double impurity = gini_mass(left_m, left_n) + gini_mass(right_m, right_n);
      if (!best.found || impurity < best.impurity) {
        double a = column_[i].first;
        double b = column_[i + 1].first;
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best = {feature, t, impurity, true};
      }
    }
  }

  static double gini_mass(std::size_t m, std::size_t n) {
    return 2.0 * static_cast<double>(m) * static_cast<double>(n - m) / static_cast<double>(n);
  }

  const ml::Matrix& x_;
  const std::vector<std::uint8_t>& y_;
  const ForestConfig& config_;
  std::size_t mtry_;
  std::vector<std::pair<double, std::uint8_t>> column_;
};

}  // namespace

TrainedModel train_random_forest(const LabeledCorpus& corpus, const ForestConfig& config) {
  if (config.n_trees == 0) throw Error(ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  if (config.min_leaf == 0) throw Error(ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  bool has_benign = false;
  bool has_malicious = false;
  for (const auto& s : corpus) {
    (s.label == Label::kMalicious ? has_malicious : has_benign) = true;
  }
  TrainedModel model;
  ml::Matrix x = ml::prepare(corpus, model.projection);
  if (!has_benign || !has_malicious) {
    throw Error(ErrorCode::kSingleClassCorpus, "forest training needs both labels");
  }
  std::vector<std::uint8_t> y;
  y.reserve(corpus.size());
  for (const auto& s : corpus) y.push_back(s.label == Label::kMalicious ? 1 : 0);

  std::size_t mtry = config.features_per_split.value_or(
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols)))));
  mtry = std::clamp<std::size_t>(mtry, 1, x.cols);

  ForestParams params;
  params.trees.resize(config.n_trees);
  unsigned threads = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(config.n_trees));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    TreeBuilder builder(x, y, config, mtry);
    for (std::size_t t = next++; t < config.n_trees; t = next++) {
      params.trees[t] = builder.build(ml::stream_seed(config.seed, t));
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }

  model.kind = ModelKind::kRandomForest;
  model.params = std::move(params);
  model.threshold = 0.5;
  model.seed = config.seed;
  model.vocabulary_fingerprint = std::string(vocabulary_fingerprint());
  return model;
}

}  // namespace pickle_sentry
