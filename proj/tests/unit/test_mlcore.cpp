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

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/mlcore.hpp"

namespace ps = pickle_sentry;

namespace {

// Points on five vocabulary dimensions, the rest zero.
ps::FeatureVector point(std::initializer_list<double> coords) {
  ps::FeatureVector v;
  v.freqs.assign(ps::kVocabularySize, 0.0);
  std::size_t i = 3;
  for (double c : coords) v.freqs[i++ * 7 % ps::kVocabularySize] = c;
  v.total_opcodes = 100;
  return v;
}

ps::FeatureVector random_point(std::mt19937_64& rng, double center, double spread) {
  std::normal_distribution<double> n(center, spread);
  return point({n(rng), n(rng), n(rng), n(rng), n(rng)});
}

ps::LabeledCorpus two_blobs(std::uint64_t seed, std::size_t per_class) {
  std::mt19937_64 rng(seed);
  ps::LabeledCorpus corpus;
  for (std::size_t i = 0; i < per_class; ++i) {
    corpus.push_back({random_point(rng, 0.2, 0.03), ps::Label::kBenign, ""});
    corpus.push_back({random_point(rng, 0.6, 0.03), ps::Label::kMalicious, ""});
  }
  return corpus;
}

ps::LabeledCorpus one_blob(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  ps::LabeledCorpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    corpus.push_back({random_point(rng, 0.2, 0.03), ps::Label::kBenign, ""});
  }
  return corpus;
}

double harmonic(std::uint64_t n) {
  double h = 0.0;
  for (std::uint64_t i = n; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

// Textbook LOF over explicit points, written independently of the model's
// data layout.
double brute_force_lof(const std::vector<std::vector<double>>& train,
                       const std::vector<double>& q, std::size_t k) {
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  auto knn = [&](const std::vector<double>& p, std::ptrdiff_t self) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) != self) d.emplace_back(dist(p, train[i]), i);
    }
    std::sort(d.begin(), d.end());
    d.resize(k);
    return d;
  };
  std::vector<double> kdist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    kdist[i] = knn(train[i], static_cast<std::ptrdiff_t>(i)).back().first;
  }
  auto lrd = [&](const std::vector<double>& p, std::ptrdiff_t self) {
    double s = 0.0;
    for (auto [d, o] : knn(p, self)) s += std::max(kdist[o], d);
    return static_cast<double>(k) / s;
  };
  double lq = lrd(q, -1);
  double s = 0.0;
  for (auto [d, o] : knn(q, -1)) s += lrd(train[o], static_cast<std::ptrdiff_t>(o)) / lq;
  return s / static_cast<double>(k);
}

}  // namespace

TEST(Metrics, KnownCounts) {
  auto m = ps::metrics_from_counts(8, 85, 5, 2);
  EXPECT_DOUBLE_EQ(m.tp_rate, 0.8);
  EXPECT_DOUBLE_EQ(m.tn_rate, 85.0 / 90.0);
  EXPECT_DOUBLE_EQ(m.precision, 8.0 / 13.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.8);
  EXPECT_DOUBLE_EQ(m.f1, 16.0 / 23.0);
}

TEST(Metrics, EmptyDenominatorsAreZero) {
  auto m = ps::metrics_from_counts(0, 10, 0, 0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.tn_rate, 1.0);
  auto all_zero = ps::metrics_from_counts(0, 0, 0, 0);
  EXPECT_EQ(all_zero.tp_rate, 0.0);
  EXPECT_EQ(all_zero.tn_rate, 0.0);
}

// F1 equals the harmonic mean of precision and recall.
TEST(Metrics, F1IsHarmonicMean) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    auto m = ps::metrics_from_counts(1 + rng() % 1000, rng() % 1000, rng() % 1000, rng() % 1000);
    EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-12);
  }
}

TEST(Labels, Names) {
  EXPECT_EQ(ps::parse_label("malicious"), ps::Label::kMalicious);
  EXPECT_EQ(ps::parse_label(ps::to_string(ps::Label::kBenign)), ps::Label::kBenign);
  EXPECT_FALSE(ps::parse_label("evil").has_value());
  EXPECT_EQ(ps::parse_model_kind("iforest"), ps::ModelKind::kIsolationForest);
  EXPECT_EQ(ps::parse_model_kind("random-forest"), ps::ModelKind::kRandomForest);
  EXPECT_EQ(ps::to_string(ps::ModelKind::kLof), "lof");
}

TEST(AveragePathLength, SmallValues) {
  EXPECT_EQ(ps::average_path_length(0), 0.0);
  EXPECT_EQ(ps::average_path_length(1), 0.0);
  EXPECT_EQ(ps::average_path_length(2), 1.0);
}

// c(n) = 2 H(n-1) - 2(n-1)/n; the logarithmic approximation of H(n-1)
// overshoots by less than 1/(2(n-1)).
TEST(AveragePathLength, MatchesHarmonicNumbers) {
  for (std::uint64_t n : {3ull, 4ull, 10ull, 64ull, 256ull, 1000ull, 100000ull}) {
    double exact = 2.0 * harmonic(n - 1) - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
    EXPECT_NEAR(ps::average_path_length(static_cast<double>(n)), exact,
                1.0 / static_cast<double>(n - 1))
        << n;
  }
}

TEST(RandomForest, SeparatesBlobs) {
  auto train = two_blobs(1, 60);
  auto test = two_blobs(2, 60);
  ps::ForestConfig cfg;
  cfg.n_trees = 25;
  auto model = ps::train_random_forest(train, cfg);
  EXPECT_EQ(model.kind, ps::ModelKind::kRandomForest);
  EXPECT_EQ(model.input_dimension(), 6u);
  EXPECT_EQ(ps::evaluate(model, train).f1, 1.0);
  EXPECT_EQ(ps::evaluate(model, test).f1, 1.0);
  for (const auto& s : test) {
    double score = ps::predict(model, s.vector).score;
    EXPECT_GE(score, 0.0);
    EXPECT_LE(score, 1.0);
  }
}

TEST(RandomForest, DeterministicAcrossThreadCounts) {
  auto train = two_blobs(3, 40);
  ps::ForestConfig a;
  a.n_trees = 16;
  a.seed = 9;
  a.threads = 1;
  ps::ForestConfig b = a;
  b.threads = 4;
  EXPECT_EQ(ps::train_random_forest(train, a), ps::train_random_forest(train, b));
  b.seed = 10;
  EXPECT_NE(ps::train_random_forest(train, a), ps::train_random_forest(train, b));
}

TEST(RandomForest, SingleStumpSplitsBetweenClasses) {
  ps::LabeledCorpus corpus = {{point({0.1}), ps::Label::kBenign, ""},
                              {point({0.2}), ps::Label::kBenign, ""},
                              {point({0.8}), ps::Label::kMalicious, ""},
                              {point({0.9}), ps::Label::kMalicious, ""}};
  ps::ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.features_per_split = 2;
  auto model = ps::train_random_forest(corpus, cfg);
  for (const auto& s : corpus) {
    EXPECT_EQ(ps::predict(model, s.vector).verdict, s.label);
  }
}

TEST(RandomForest, Errors) {
  auto benign_only = one_blob(1, 20);
  try {
    ps::train_random_forest(benign_only);
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kSingleClassCorpus);
  }
  EXPECT_THROW(ps::train_random_forest({}), ps::Error);
  auto corpus = two_blobs(1, 5);
  corpus[3].vector.freqs.pop_back();
  try {
    ps::train_random_forest(corpus);
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kDimensionMismatch);
  }
}

TEST(IsolationForest, OutliersScoreHigher) {
  auto train = one_blob(4, 300);
  auto model = ps::train_isolation_forest(train);
  std::mt19937_64 rng(8);
  double inlier = ps::predict(model, random_point(rng, 0.2, 0.03)).score;
  auto far = ps::predict(model, point({0.9, 0.9, 0.0, 0.9, 0.0}));
  EXPECT_GT(far.score, inlier);
  EXPECT_EQ(far.verdict, ps::Label::kMalicious);
  EXPECT_GT(far.score, 0.0);
  EXPECT_LE(far.score, 1.0);
}

TEST(IsolationForest, ThresholdIsTrainingQuantile) {
  auto train = one_blob(5, 400);
  ps::IsolationForestConfig cfg;
  cfg.contamination = 0.05;
  auto model = ps::train_isolation_forest(train, cfg);
  std::size_t flagged = 0;
  for (const auto& s : train) flagged += ps::predict(model, s.vector).verdict == ps::Label::kMalicious;
  EXPECT_LE(flagged, 20u);
  EXPECT_GE(flagged, 15u);
}

TEST(IsolationForest, TooSmall) {
  try {
    ps::train_isolation_forest(one_blob(1, 7));
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kCorpusTooSmall);
  }
}

TEST(Lof, MatchesBruteForce) {
  auto train = one_blob(6, 120);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 40; ++i) train.push_back({random_point(rng, 0.4, 0.1), ps::Label::kBenign, ""});
  ps::LofConfig cfg;
  cfg.k = 7;
  auto model = ps::train_lof(train, cfg);
  std::vector<std::vector<double>> points;
  for (const auto& s : train) points.push_back(ps::model_input(model, s.vector));
  for (int i = 0; i < 50; ++i) {
    auto q = random_point(rng, 0.3, 0.15);
    double expected = brute_force_lof(points, ps::model_input(model, q), cfg.k);
    EXPECT_NEAR(ps::predict(model, q).score, expected, 1e-9 * expected);
  }
}

// Points on a regular grid have LOF close to one away from the border.
TEST(Lof, UniformGridIsNotAnomalous) {
  ps::LabeledCorpus grid;
  for (int a = 0; a < 15; ++a) {
    for (int b = 0; b < 15; ++b) grid.push_back({point({a * 0.01, b * 0.01}), ps::Label::kBenign, ""});
  }
  auto model = ps::train_lof(grid);
  for (double a : {0.05, 0.07, 0.091}) {
    double score = ps::predict(model, point({a, 0.075})).score;
    EXPECT_GT(score, 0.8);
    EXPECT_LT(score, 1.2);
  }
  EXPECT_GT(ps::predict(model, point({0.5, 0.5})).score, 1.5);
}

TEST(Lof, Errors) {
  ps::LofConfig cfg;
  cfg.k = 20;
  EXPECT_THROW(ps::train_lof(one_blob(1, 20), cfg), ps::Error);
  cfg.k = 0;
  EXPECT_THROW(ps::train_lof(one_blob(1, 50), cfg), ps::Error);
}

TEST(Persistence, RoundTripAllKinds) {
  auto corpus = two_blobs(7, 40);
  ps::ForestConfig fc;
  fc.n_trees = 10;
  std::vector<ps::TrainedModel> models = {ps::train_random_forest(corpus, fc),
                                          ps::train_isolation_forest(corpus),
                                          ps::train_lof(corpus)};
  auto dir = std::filesystem::path(PS_TEST_TMP) / "persistence";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(3);
  for (const auto& m : models) {
    auto path = dir / (std::string(ps::to_string(m.kind)) + ".json");
    ps::save_model(m, path);
    auto back = ps::load_model(path, m.kind);
    EXPECT_EQ(back, m);
    for (int i = 0; i < 20; ++i) {
      auto q = random_point(rng, 0.4, 0.2);
      EXPECT_EQ(std::bit_cast<std::uint64_t>(ps::predict(back, q).score),
                std::bit_cast<std::uint64_t>(ps::predict(m, q).score));
    }
    EXPECT_EQ(ps::model_to_json(back), ps::model_to_json(m));
  }
}

TEST(Persistence, Errors) {
  auto model = ps::train_lof(one_blob(2, 30));
  auto json = ps::model_to_json(model);
  auto expect_code = [](const std::string& text, ps::ErrorCode code,
                        std::optional<ps::ModelKind> kind = std::nullopt) {
    try {
      ps::model_from_json(text, kind);
      ADD_FAILURE() << "accepted";
    } catch (const ps::Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code("{not json", ps::ErrorCode::kParse);
  expect_code(json, ps::ErrorCode::kModelKindMismatch, ps::ModelKind::kRandomForest);
  auto bumped = json;
  bumped.replace(bumped.find("\"format_version\": 1"), 19, "\"format_version\": 99");
  expect_code(bumped, ps::ErrorCode::kUnsupportedVersion);
  auto other_vocab = json;
  auto at = other_vocab.find(ps::vocabulary_fingerprint());
  other_vocab.replace(at, 16, "0000000000000000");
  expect_code(other_vocab, ps::ErrorCode::kVocabularyFingerprintMismatch);
  try {
    ps::load_model("/nonexistent/model.json");
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kIo);
  }
}

TEST(Predict, RejectsProjectedInput) {
  auto model = ps::train_lof(one_blob(2, 30));
  ps::FeatureVector v;
  v.freqs = {1.0, 0.0};
  EXPECT_THROW(ps::predict(model, v), ps::Error);
}
