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

// Classifiers over opcode-frequency vectors: random forest, isolation
// forest and local outlier factor, with metrics and JSON persistence.
//
// Models see the projected frequencies followed by one extra coordinate
// holding the out-of-vocabulary mass.

#ifndef PICKLE_SENTRY_MLCORE_HPP_
#define PICKLE_SENTRY_MLCORE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pickle_sentry/features.hpp"

namespace pickle_sentry {

enum class Label : std::uint8_t { kBenign, kMalicious };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

struct LabeledSample {
  FeatureVector vector;
  Label label = Label::kBenign;
  std::string source_path;
};

using LabeledCorpus = std::vector<LabeledSample>;

enum class ModelKind : std::uint8_t { kRandomForest, kIsolationForest, kLof };

// "random-forest", "isolation-forest", "lof".
std::string_view to_string(ModelKind kind);
// Also accepts the short names "forest" and "iforest".
std::optional<ModelKind> parse_model_kind(std::string_view text);

struct ForestConfig {
  std::size_t n_trees = 100;
  // Unbounded when empty.
  std::optional<std::size_t> max_depth;
  std::size_t min_leaf = 1;
  // ceil(sqrt(d)) when empty.
  std::optional<std::size_t> features_per_split;
  std::uint64_t seed = 0;
  // Worker threads for tree construction; 0 = hardware concurrency.
  unsigned threads = 0;
};

struct IsolationForestConfig {
  std::size_t n_trees = 100;
  // Capped at the corpus size.
  std::size_t subsample = 256;
  std::uint64_t seed = 0;
  // Fraction of training scores above the threshold.
  double contamination = 0.05;
};

struct LofConfig {
  std::size_t k = 20;
  std::uint64_t seed = 0;
  double threshold = 1.5;
};

// Flat binary tree. A node with feature < 0 is a leaf carrying `value`:
// the malicious fraction (forest) or the sample count (isolation tree).
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  bool operator==(const DecisionTree&) const = default;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
  bool operator==(const ForestParams&) const = default;
};

struct IsolationParams {
  std::vector<DecisionTree> trees;
  std::size_t subsample = 0;
  bool operator==(const IsolationParams&) const = default;
};

struct LofParams {
  std::size_t k = 0;
  std::vector<std::vector<double>> points;
  // Per training point: distance to its k-th neighbour and local
  // reachability density.
  std::vector<double> k_distance;
  std::vector<double> lrd;
  bool operator==(const LofParams&) const = default;
};

using ModelParams = std::variant<ForestParams, IsolationParams, LofParams>;

struct TrainedModel {
  ModelKind kind = ModelKind::kRandomForest;
  VocabularyProjection projection;
  ModelParams params;
  // Malicious iff score > threshold.
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::string vocabulary_fingerprint;

  // Number of model input coordinates (kept dimensions + 1).
  std::size_t input_dimension() const { return projection.kept_indices.size() + 1; }
  bool operator==(const TrainedModel&) const = default;
};

struct Prediction {
  double score = 0.0;
  Label verdict = Label::kBenign;
};

// Throws kSingleClassCorpus, kDimensionMismatch, kEmptyCorpus.
TrainedModel train_random_forest(const LabeledCorpus& corpus, const ForestConfig& config = {});
// Uses every sample regardless of label. Throws kCorpusTooSmall below 8.
TrainedModel train_isolation_forest(const LabeledCorpus& corpus,
                                    const IsolationForestConfig& config = {});
// Throws kCorpusTooSmall unless the corpus has more than k samples.
TrainedModel train_lof(const LabeledCorpus& corpus, const LofConfig& config = {});

// `v` must be full-dimensional. Throws kVocabularyFingerprintMismatch.
Prediction predict(const TrainedModel& model, const FeatureVector& v);

// Model input for `v`: projected frequencies, then oov_mass.
std::vector<double> model_input(const TrainedModel& model, const FeatureVector& v);
// Score of an already-built model input.
double score_input(const TrainedModel& model, std::span<const double> input);

// Isolation-forest normalizer c(n): 0 for n <= 1, 1 for n == 2.
double average_path_length(double n);

struct Metrics {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double tp_rate = 0.0;
  double tn_rate = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Rates with an empty denominator are 0.
Metrics metrics_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp,
                            std::uint64_t fn);

// Malicious is the positive class. Throws kEmptyCorpus.
Metrics evaluate(const TrainedModel& model, const LabeledCorpus& corpus);

// JSON with fixed key order; reals written with 17 significant digits.
std::string model_to_json(const TrainedModel& model);
// Throws kParse, kUnsupportedVersion, kModelKindMismatch,
// kVocabularyFingerprintMismatch.
TrainedModel model_from_json(std::string_view text,
                             std::optional<ModelKind> expected = std::nullopt);

// Throws kIo in addition to the model_from_json errors.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path,
                        std::optional<ModelKind> expected = std::nullopt);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_MLCORE_HPP_
