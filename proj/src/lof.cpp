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
#include <utility>
#include <vector>

#include "ml_internal.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {
namespace {

constexpr double kMinDistance = 1e-12;

double distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return std::max(std::sqrt(sum), kMinDistance);
}

// The k nearest points as (distance, index), ties broken by index.
std::vector<std::pair<double, std::size_t>> neighbours(const std::vector<std::vector<double>>& points,
                                                       std::span<const double> query,
                                                       std::size_t k, std::size_t skip) {
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == skip) continue;
    all.emplace_back(distance(points[i], query), i);
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

double reach_density(const LofParams& params,
                     const std::vector<std::pair<double, std::size_t>>& near) {
  double sum = 0.0;
  for (const auto& [d, i] : near) sum += std::max(params.k_distance[i], d);
  return static_cast<double>(near.size()) / sum;
}

}  // namespace

namespace ml {

double lof_score(const LofParams& params, std::span<const double> input) {
  auto near = neighbours(params.points, input, params.k, params.points.size());
  double lrd = reach_density(params, near);
  double sum = 0.0;
  for (const auto& [d, i] : near) sum += params.lrd[i] / lrd;
  return sum / static_cast<double>(near.size());
}

}  // namespace ml

TrainedModel train_lof(const LabeledCorpus& corpus, const LofConfig& config) {
  if (config.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (corpus.size() <= config.k) {
    throw Error(ErrorCode::kCorpusTooSmall, "LOF needs more than k samples");
  }
  if (!std::isfinite(config.threshold)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be finite");
  }
  TrainedModel model;
  ml::Matrix x = ml::prepare(corpus, model.projection);

  LofParams params;
  params.k = config.k;
  params.points.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto row = x.row(r);
    params.points.emplace_back(row.begin(), row.end());
  }
  std::vector<std::vector<std::pair<double, std::size_t>>> near(x.rows);
  params.k_distance.resize(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    near[r] = neighbours(params.points, params.points[r], params.k, r);
    params.k_distance[r] = near[r].back().first;
  }
  params.lrd.resize(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) params.lrd[r] = reach_density(params, near[r]);

  model.kind = ModelKind::kLof;
  model.params = std::move(params);
  model.threshold = config.threshold;
  model.seed = config.seed;
  model.vocabulary_fingerprint = vocabulary_fingerprint();
  return model;
}

}  // namespace pickle_sentry
