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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "ml_internal.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {

using Json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::kMalicious ? "malicious" : "benign";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "benign") return Label::kBenign;
  if (text == "malicious") return Label::kMalicious;
  return std::nullopt;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForest: return "random-forest";
    case ModelKind::kIsolationForest: return "isolation-forest";
    case ModelKind::kLof: return "lof";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "random-forest" || text == "forest") return ModelKind::kRandomForest;
  if (text == "isolation-forest" || text == "iforest") return ModelKind::kIsolationForest;
  if (text == "lof") return ModelKind::kLof;
  return std::nullopt;
}

std::vector<double> model_input(const TrainedModel& model, const FeatureVector& v) {
  FeatureVector p = project(v, model.projection);
  std::vector<double> input = std::move(p.freqs);
  input.push_back(p.oov_mass);
  return input;
}

double score_input(const TrainedModel& model, std::span<const double> input) {
  if (input.size() != model.input_dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model expects " + std::to_string(model.input_dimension()) + " inputs, got " +
                    std::to_string(input.size()));
  }
  return std::visit(
      Overloaded{
          [&](const ForestParams& p) { return ml::forest_score(p, input); },
          [&](const IsolationParams& p) { return ml::isolation_score(p, input); },
          [&](const LofParams& p) { return ml::lof_score(p, input); },
      },
      model.params);
}

Prediction predict(const TrainedModel& model, const FeatureVector& v) {
  if (model.vocabulary_fingerprint != vocabulary_fingerprint()) {
    throw Error(ErrorCode::kVocabularyFingerprintMismatch,
                "model built for opcode table " + model.vocabulary_fingerprint);
  }
  auto input = model_input(model, v);
  Prediction p;
  p.score = score_input(model, input);
  p.verdict = p.score > model.threshold ? Label::kMalicious : Label::kBenign;
  return p;
}

Metrics metrics_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp,
                            std::uint64_t fn) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m{tp, tn, fp, fn};
  m.tp_rate = ratio(tp, tp + fn);
  m.tn_rate = ratio(tn, tn + fp);
  m.precision = ratio(tp, tp + fp);
  m.recall = m.tp_rate;
  // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn) whenever P+R > 0.
  m.f1 = tp == 0 ? 0.0 : ratio(2 * tp, 2 * tp + fp + fn);
  return m;
}

Metrics evaluate(const TrainedModel& model, const LabeledCorpus& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "evaluation corpus is empty");
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (const auto& s : corpus) {
    bool flagged = predict(model, s.vector).verdict == Label::kMalicious;
    if (s.label == Label::kMalicious) {
      ++(flagged ? tp : fn);
    } else {
      ++(flagged ? fp : tn);
    }
  }
  return metrics_from_counts(tp, tn, fp, fn);
}

// --- persistence ---

namespace {

void write_json(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += Json(key).dump();
        out += ':';
        write_json(value, out);
      }
      out += '}';
      return;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ',';
        write_json(j[i], out);
      }
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

Json tree_to_json(const DecisionTree& tree) {
  Json feature = Json::array(), threshold = Json::array(), left = Json::array(),
       right = Json::array(), value = Json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return Json{{"feature", feature}, {"threshold", threshold}, {"left", left},
              {"right", right},     {"value", value}};
}

Json trees_to_json(const std::vector<DecisionTree>& trees) {
  Json out = Json::array();
  for (const auto& t : trees) out.push_back(tree_to_json(t));
  return out;
}

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::kParse, "invalid model file: " + what);
}

DecisionTree tree_from_json(const Json& j, std::size_t input_dimension) {
  const auto& feature = j.at("feature");
  const auto& threshold = j.at("threshold");
  const auto& left = j.at("left");
  const auto& right = j.at("right");
  const auto& value = j.at("value");
  std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
      value.size() != n) {
    invalid("tree arrays disagree in length");
  }
  DecisionTree tree;
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = tree.nodes[i];
    node.feature = feature[i].get<std::int32_t>();
    node.threshold = threshold[i].get<double>();
    node.left = left[i].get<std::uint32_t>();
    node.right = right[i].get<std::uint32_t>();
    node.value = value[i].get<double>();
    if (!std::isfinite(node.value) || !std::isfinite(node.threshold)) invalid("non-finite value");
    if (node.feature >= 0) {
      // Children after their parent keeps traversal finite.
      if (static_cast<std::size_t>(node.feature) >= input_dimension || node.left <= i ||
          node.right <= i || node.left >= n || node.right >= n) {
        invalid("tree node " + std::to_string(i) + " is out of range");
      }
    }
  }
  return tree;
}

std::vector<DecisionTree> trees_from_json(const Json& j, std::size_t input_dimension) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j) trees.push_back(tree_from_json(t, input_dimension));
  if (trees.empty()) invalid("no trees");
  return trees;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  Json params = std::visit(
      Overloaded{
          [](const ForestParams& p) { return Json{{"trees", trees_to_json(p.trees)}}; },
          [](const IsolationParams& p) {
            return Json{{"subsample", p.subsample}, {"trees", trees_to_json(p.trees)}};
          },
          [](const LofParams& p) {
            return Json{{"k", p.k},
                        {"points", p.points},
                        {"k_distance", p.k_distance},
                        {"lrd", p.lrd}};
          },
      },
      model.params);
  Json top{{"format_version", kFormatVersion},
           {"kind", std::string(to_string(model.kind))},
           {"seed", model.seed},
           {"vocabulary_fingerprint", model.vocabulary_fingerprint},
           {"projection", model.projection.kept_indices},
           {"threshold", model.threshold},
           {"params", std::move(params)}};
  std::string out = "{\n";
  bool first = true;
  for (const auto& [key, value] : top.items()) {
    if (!first) out += ",\n";
    first = false;
    out += "  " + Json(key).dump() + ": ";
    write_json(value, out);
  }
  out += "\n}\n";
  return out;
}

TrainedModel model_from_json(std::string_view text, std::optional<ModelKind> expected) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model file is not JSON: ") + e.what());
  }
  try {
    if (!j.is_object()) invalid("top level is not an object");
    const auto& version = j.at("format_version");
    if (!version.is_number_integer() || version.get<std::int64_t>() != kFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  "unsupported model format_version " + version.dump());
    }
    TrainedModel model;
    auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) invalid("unknown kind " + j.at("kind").dump());
    model.kind = *kind;
    if (expected && *expected != model.kind) {
      throw Error(ErrorCode::kModelKindMismatch,
                  "file holds a " + std::string(to_string(model.kind)) + " model, expected " +
                      std::string(to_string(*expected)));
    }
    model.seed = j.at("seed").get<std::uint64_t>();
    model.vocabulary_fingerprint = j.at("vocabulary_fingerprint").get<std::string>();
    if (model.vocabulary_fingerprint != vocabulary_fingerprint()) {
      throw Error(ErrorCode::kVocabularyFingerprintMismatch,
                  "model built for opcode table " + model.vocabulary_fingerprint +
                      ", this build uses " + vocabulary_fingerprint());
    }
    model.projection.kept_indices = j.at("projection").get<std::vector<std::size_t>>();
    model.projection.validate();
    model.threshold = j.at("threshold").get<double>();
    if (!std::isfinite(model.threshold)) invalid("threshold is not finite");

    const auto& params = j.at("params");
    std::size_t dim = model.input_dimension();
    switch (model.kind) {
      case ModelKind::kRandomForest:
        model.params = ForestParams{trees_from_json(params.at("trees"), dim)};
        break;
      case ModelKind::kIsolationForest: {
        IsolationParams p;
        p.subsample = params.at("subsample").get<std::size_t>();
        if (p.subsample < 2) invalid("subsample < 2");
        p.trees = trees_from_json(params.at("trees"), dim);
        model.params = std::move(p);
        break;
      }
      case ModelKind::kLof: {
        LofParams p;
        p.k = params.at("k").get<std::size_t>();
        p.points = params.at("points").get<std::vector<std::vector<double>>>();
        p.k_distance = params.at("k_distance").get<std::vector<double>>();
        p.lrd = params.at("lrd").get<std::vector<double>>();
        if (p.k == 0 || p.k >= p.points.size()) invalid("k out of range");
        if (p.k_distance.size() != p.points.size() || p.lrd.size() != p.points.size()) {
          invalid("LOF arrays disagree in length");
        }
        for (const auto& pt : p.points) {
          if (pt.size() != dim) invalid("LOF point of wrong dimension");
        }
        model.params = std::move(p);
        break;
      }
    }
    return model;
  } catch (const Json::exception& e) {
    invalid(e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << model_to_json(model);
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path, std::optional<ModelKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path.string());
  return model_from_json(buffer.str(), expected);
}

}  // namespace pickle_sentry
