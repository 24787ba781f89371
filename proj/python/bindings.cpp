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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/decompiler.hpp"
#include "pickle_sentry/disasm.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/features.hpp"
#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/opcodes.hpp"
#include "pickle_sentry/policy.hpp"
#include "pickle_sentry/scan.hpp"
#include "pickle_sentry/unwrap.hpp"

namespace py = pybind11;
namespace ps = pickle_sentry;
using namespace pybind11::literals;

namespace {

std::string_view view(const py::bytes& b) {
  char* data = nullptr;
  Py_ssize_t size = 0;
  if (PyBytes_AsStringAndSize(b.ptr(), &data, &size) != 0) throw py::error_already_set();
  return {data, static_cast<std::size_t>(size)};
}

py::object arg_to_py(const ps::OpcodeArg& arg) {
  return std::visit(
      [](const auto& v) -> py::object {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return py::none();
        } else if constexpr (std::is_same_v<T, bool>) {
          return py::bool_(v);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return py::int_(v);
        } else if constexpr (std::is_same_v<T, ps::BigInt>) {
          return py::reinterpret_steal<py::object>(
              PyLong_FromString(v.literal.c_str(), nullptr, 0));
        } else if constexpr (std::is_same_v<T, double>) {
          return py::float_(v);
        } else if constexpr (std::is_same_v<T, ps::ByteString>) {
          return py::bytes(v.data);
        } else if constexpr (std::is_same_v<T, ps::Text>) {
          auto* s = PyUnicode_DecodeUTF8(v.utf8.data(), static_cast<Py_ssize_t>(v.utf8.size()),
                                         "surrogatepass");
          if (s == nullptr) throw py::error_already_set();
          return py::reinterpret_steal<py::object>(s);
        } else if constexpr (std::is_same_v<T, ps::ImportPair>) {
          return py::make_tuple(v.module, v.name);
        } else {
          return py::dict("skipped"_a = v.length);
        }
      },
      arg);
}

py::dict segment_to_py(const ps::Disassembly& d) {
  py::list events;
  for (const auto& e : d.events) {
    events.append(py::make_tuple(e.offset, std::string(e.descriptor().mnemonic), arg_to_py(e.arg)));
  }
  py::object reason = py::none();
  if (d.malform_reason) reason = py::str(std::string(ps::to_string(*d.malform_reason)));
  return py::dict("events"_a = events, "protocol"_a = d.protocol, "start_offset"_a = d.start_offset,
                  "byte_len"_a = d.byte_len, "well_formed"_a = d.well_formed,
                  "malform_reason"_a = reason, "error_offset"_a = d.error_offset);
}

// Python objects to the pickler's value model; shared references map to
// shared nodes so the memo behaves like CPython's.
class ValueBuilder {
 public:
  ps::corpus::ValuePtr build(const py::handle& obj) {
    if (auto it = seen_.find(obj.ptr()); it != seen_.end()) return it->second;
    ps::corpus::Value v;
    if (obj.is_none()) {
      v.v = std::monostate{};
    } else if (py::isinstance<py::bool_>(obj)) {
      v.v = obj.cast<bool>();
    } else if (py::isinstance<py::int_>(obj)) {
      int overflow = 0;
      long long i = PyLong_AsLongLongAndOverflow(obj.ptr(), &overflow);
      if (overflow != 0) throw py::value_error("integers must fit in 64 bits");
      v.v = static_cast<std::int64_t>(i);
    } else if (py::isinstance<py::float_>(obj)) {
      v.v = obj.cast<double>();
    } else if (py::isinstance<py::str>(obj)) {
      auto* b = PyUnicode_AsEncodedString(obj.ptr(), "utf-8", "surrogatepass");
      if (b == nullptr) throw py::error_already_set();
      auto bytes = py::reinterpret_steal<py::bytes>(b);
      v.v = ps::corpus::Str{std::string(view(bytes))};
    } else if (py::isinstance<py::bytes>(obj)) {
      v.v = ps::corpus::Bytes{obj.cast<std::string>()};
    } else if (py::isinstance<py::list>(obj)) {
      // Registered before the children so self-references resolve.
      auto node = std::make_shared<ps::corpus::Value>(ps::corpus::Value{ps::corpus::List{}});
      seen_[obj.ptr()] = node;
      ps::corpus::List list;
      for (auto item : obj) list.items.push_back(build(item));
      node->v = std::move(list);
      return node;
    } else if (py::isinstance<py::tuple>(obj)) {
      ps::corpus::Tuple t;
      for (auto item : obj) t.items.push_back(build(item));
      v.v = std::move(t);
    } else if (py::isinstance<py::dict>(obj)) {
      auto node = std::make_shared<ps::corpus::Value>(ps::corpus::Value{ps::corpus::Dict{}});
      seen_[obj.ptr()] = node;
      ps::corpus::Dict dict;
      for (auto [k, val] : py::reinterpret_borrow<py::dict>(obj)) {
        dict.items.emplace_back(build(k), build(val));
      }
      node->v = std::move(dict);
      return node;
    } else if (py::isinstance<py::set>(obj) || py::isinstance<py::frozenset>(obj)) {
      ps::corpus::Set set;
      set.frozen = py::isinstance<py::frozenset>(obj);
      for (auto item : obj) set.items.push_back(build(item));
      v.v = std::move(set);
    } else {
      throw py::type_error("unsupported type " + std::string(py::str(py::type::handle_of(obj))));
    }
    auto node = std::make_shared<const ps::corpus::Value>(std::move(v));
    keep_.push_back(py::reinterpret_borrow<py::object>(obj));
    seen_[obj.ptr()] = node;
    return node;
  }

 private:
  std::unordered_map<PyObject*, ps::corpus::ValuePtr> seen_;
  std::vector<py::object> keep_;
};

std::shared_ptr<const ps::TrainedModel> load_optional(const std::optional<std::string>& path) {
  if (!path) return nullptr;
  return std::make_shared<const ps::TrainedModel>(ps::load_model(*path));
}

ps::ScanOptions scan_options(const std::optional<std::string>& model,
                             const std::optional<std::string>& policy, bool ml_only) {
  ps::ScanOptions options;
  options.model = load_optional(model);
  if (policy) options.policy = ps::load_policy(*policy);
  options.ml_only = ml_only;
  return options;
}

py::object report_to_py(const ps::ScanReport& report) {
  return py::module_::import("json").attr("loads")(ps::to_json_line(report));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Static scanner for pickle-based model files";

  py::register_exception<ps::Error>(m, "Error", PyExc_RuntimeError);

  m.def("vocabulary", [] {
    py::list out;
    for (const auto& d : ps::opcode_vocabulary()) out.append(std::string(d.mnemonic));
    return out;
  }, "The 68 opcode mnemonics in feature-vector order.");
  m.def("vocabulary_fingerprint", [] { return ps::vocabulary_fingerprint(); });

  m.def("disassemble", [](const py::bytes& data) {
    py::list out;
    for (const auto& d : ps::disassemble_all(view(data))) out.append(segment_to_py(d));
    return out;
  }, "data"_a, "Decode back-to-back pickles; one dict per segment.");

  m.def("decompile", [](const py::bytes& data) {
    std::string text;
    for (const auto& d : ps::disassemble_all(view(data))) {
      if (!d.events.empty()) text += ps::decompile(d).text();
    }
    return text;
  }, "data"_a);

  m.def("extract_imports", [](const py::bytes& data) {
    py::list out;
    for (const auto& i : ps::extract_imports(ps::disassemble_all(view(data)))) {
      out.append(py::make_tuple(i.module, i.name));
    }
    return out;
  }, "data"_a);

  m.def("features", [](const py::bytes& data) {
    auto v = ps::corpus::file_features(view(data));
    return py::dict("freqs"_a = v.freqs, "total_opcodes"_a = v.total_opcodes);
  }, "data"_a, "Opcode frequencies over every pickle found in the file.");

  m.def("unwrap", [](const py::bytes& data) {
    auto u = ps::unwrap(view(data));
    py::list out;
    for (const auto& c : u.candidates) {
      out.append(py::make_tuple(ps::format_origin_chain(c.origin_chain), py::bytes(*c.bytes)));
    }
    return out;
  }, "data"_a);

  m.def("scan_bytes", [](const py::bytes& data, std::string path, std::optional<std::string> model,
                         std::optional<std::string> policy, bool ml_only) {
    auto options = scan_options(model, policy, ml_only);
    ps::ScanReport report;
    {
      py::gil_scoped_release release;
      report = ps::scan_bytes(view(data), std::move(path), options);
    }
    return report_to_py(report);
  }, "data"_a, "path"_a = "", "model"_a = py::none(), "policy"_a = py::none(), "ml_only"_a = false);

  m.def("scan_tree", [](const std::string& root, std::optional<std::string> model,
                        std::optional<std::string> policy, bool ml_only, unsigned jobs) {
    auto options = scan_options(model, policy, ml_only);
    options.jobs = jobs;
    std::vector<ps::ScanReport> reports;
    {
      py::gil_scoped_release release;
      reports = ps::scan_tree(root, options);
    }
    py::list out;
    for (const auto& r : reports) out.append(report_to_py(r));
    return out;
  }, "root"_a, "model"_a = py::none(), "policy"_a = py::none(), "ml_only"_a = false, "jobs"_a = 0);

  m.def("train", [](const std::string& kind_text, const std::string& manifest, const std::string& out,
                    std::uint64_t seed) {
    auto kind = ps::parse_model_kind(kind_text);
    if (!kind) throw py::value_error("unknown model kind '" + kind_text + "'");
    py::gil_scoped_release release;
    auto corpus = ps::corpus::load_corpus(manifest);
    if (*kind != ps::ModelKind::kRandomForest) {
      std::erase_if(corpus, [](const auto& s) { return s.label != ps::Label::kBenign; });
    }
    ps::TrainedModel model;
    if (*kind == ps::ModelKind::kRandomForest) {
      ps::ForestConfig c;
      c.seed = seed;
      model = ps::train_random_forest(corpus, c);
    } else if (*kind == ps::ModelKind::kIsolationForest) {
      ps::IsolationForestConfig c;
      c.seed = seed;
      model = ps::train_isolation_forest(corpus, c);
    } else {
      ps::LofConfig c;
      c.seed = seed;
      model = ps::train_lof(corpus, c);
    }
    ps::save_model(model, out);
  }, "kind"_a, "manifest"_a, "out"_a, "seed"_a = 0);

  m.def("dumps", [](const py::handle& obj, int protocol) {
    if (protocol < 0 || protocol > 5) throw py::value_error("protocol must be 0..5");
    ValueBuilder builder;
    return py::bytes(ps::corpus::dumps(builder.build(obj), protocol));
  }, "obj"_a, "protocol"_a, "Serialize plain Python data the way the standard pickler does.");

  m.def("make_sample", [](const std::string& recipe, std::uint64_t seed) {
    return py::bytes(ps::corpus::make_sample(recipe, seed));
  }, "recipe"_a, "seed"_a);
  m.def("benign_recipes", &ps::corpus::benign_recipes);
  m.def("malicious_recipes", &ps::corpus::malicious_recipes);
  m.def("wrap_paths", &ps::corpus::wrap_paths);
  m.def("wrap", [](const std::string& path, const py::bytes& payload, const std::string& inner_name) {
    auto [data, ext] = ps::corpus::wrap(path, view(payload), inner_name);
    return py::make_tuple(py::bytes(data), ext);
  }, "path"_a, "payload"_a, "inner_name"_a);

  m.def("generate_corpus", [](const std::string& out_dir, std::uint64_t seed, std::size_t n_benign,
                              std::size_t n_malicious, std::optional<std::vector<std::string>> wrap_paths) {
    auto spec = ps::corpus::GenSpec::defaults();
    spec.seed = seed;
    spec.n_benign = n_benign;
    spec.n_malicious = n_malicious;
    if (wrap_paths) spec.wrap_paths = *wrap_paths;
    py::list out;
    for (const auto& r : ps::corpus::generate(spec, out_dir)) {
      out.append(py::dict("path"_a = r.path, "label"_a = std::string(ps::to_string(r.label)),
                          "recipe"_a = r.recipe, "wrap_chain"_a = r.wrap_chain));
    }
    return out;
  }, "out_dir"_a, "seed"_a = 0, "n_benign"_a = 500, "n_malicious"_a = 100,
     "wrap_paths"_a = py::none());
}
