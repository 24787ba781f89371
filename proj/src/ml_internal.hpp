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

// Shared pieces of the model implementations.

#ifndef PICKLE_SENTRY_SRC_ML_INTERNAL_HPP_
#define PICKLE_SENTRY_SRC_ML_INTERNAL_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pickle_sentry/mlcore.hpp"
#include "rng.hpp"

namespace pickle_sentry::ml {

using pickle_sentry::Rng;
using pickle_sentry::splitmix64;
using pickle_sentry::stream_seed;

// Row-major sample matrix in model-input space.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
};

// Checks dimensions, fits the projection and builds the input matrix.
// Throws kEmptyCorpus / kDimensionMismatch.
Matrix prepare(const LabeledCorpus& corpus, VocabularyProjection& projection);

// Index of the leaf reached by `input`.
inline const TreeNode& leaf_for(const DecisionTree& tree, std::span<const double> input,
                                std::size_t* depth = nullptr) {
  std::uint32_t i = 0;
  std::size_t d = 0;
  while (tree.nodes[i].feature >= 0) {
    const auto& n = tree.nodes[i];
    i = input[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    ++d;
  }
  if (depth != nullptr) *depth = d;
  return tree.nodes[i];
}

double forest_score(const ForestParams& params, std::span<const double> input);
double isolation_score(const IsolationParams& params, std::span<const double> input);
double lof_score(const LofParams& params, std::span<const double> input);

}  // namespace pickle_sentry::ml

#endif  // PICKLE_SENTRY_SRC_ML_INTERNAL_HPP_
