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

#include "pickle_sentry/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "parallel.hpp"
#include "pickle_sentry/archive.hpp"
#include "pickle_sentry/codecs.hpp"
#include "pickle_sentry/error.hpp"
#include "rng.hpp"

namespace pickle_sentry::corpus {
namespace {

// --- value construction ---

ValuePtr make(Value v) { return std::make_shared<const Value>(std::move(v)); }
ValuePtr none() { return make({std::monostate{}}); }
ValuePtr boolean(bool b) { return make({b}); }
ValuePtr integer(std::int64_t i) { return make({i}); }
ValuePtr real(double d) { return make({d}); }
ValuePtr str(std::string s) { return make({Str{std::move(s)}}); }
ValuePtr bytes(std::string b) { return make({Bytes{std::move(b)}}); }
ValuePtr list(std::vector<ValuePtr> items) { return make({List{std::move(items)}}); }
ValuePtr tuple(std::vector<ValuePtr> items) { return make({Tuple{std::move(items)}}); }
ValuePtr dict(std::vector<std::pair<ValuePtr, ValuePtr>> items) {
  return make({Dict{std::move(items)}});
}
ValuePtr set(std::vector<ValuePtr> items, bool frozen) {
  return make({Set{std::move(items), frozen}});
}
ValuePtr global(std::string module, std::string name) {
  return make({Global{std::move(module), std::move(name)}});
}
ValuePtr call(ValuePtr callable, std::vector<ValuePtr> args) {
  Reduce r;
  r.callable = std::move(callable);
  r.args = std::move(args);
  return make({std::move(r)});
}

// --- random helpers ---

template <typename T, std::size_t N>
const T& pick(Rng& rng, const std::array<T, N>& options) {
  return options[rng.index(N)];
}

std::int64_t between(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
}

bool chance(Rng& rng, double p) { return rng.unit() < p; }

std::string random_bytes(Rng& rng, std::size_t n) {
  std::string out(n, '\0');
  for (auto& c : out) c = static_cast<char>(rng.index(256));
  return out;
}

std::string word(Rng& rng) {
  static constexpr std::array<std::string_view, 24> kSyllables = {
      "ka", "lo", "mi", "ne", "ra", "to", "vi", "zu", "an", "el", "or", "us",
      "be", "di", "fo", "gu", "ha", "je", "ki", "pu", "sa", "te", "wo", "xi"};
  std::string out;
  auto n = between(rng, 1, 4);
  for (std::int64_t i = 0; i < n; ++i) out += pick(rng, kSyllables);
  return out;
}

std::string text(Rng& rng) {
  static constexpr std::array<std::string_view, 8> kExtras = {
      "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x99\x82", " ", "\\", "\n", "'", "\""};
  std::string out = word(rng);
  if (chance(rng, 0.3)) out += pick(rng, kExtras);
  if (chance(rng, 0.3)) out += "_" + word(rng);
  return out;
}

// --- benign recipes ---

// Protocol as written by the default pickler of recent Python versions,
// with a tail of older writers.
int writer_protocol(Rng& rng) {
  double u = rng.unit();
  if (u < 0.80) return 4;
  if (u < 0.92) return 5;
  if (u < 0.97) return 3;
  return 2;
}

ValuePtr scalar(Rng& rng, int protocol) {
  switch (rng.index(protocol >= 3 ? 8 : 7)) {
    case 0: return none();
    case 1: return boolean(chance(rng, 0.5));
    case 2: return integer(between(rng, -300, 70000));
    case 3: return integer(between(rng, INT64_MIN / 2, INT64_MAX / 2));
    case 4: return real(std::ldexp(rng.unit() - 0.5, static_cast<int>(between(rng, -20, 20))));
    case 5:
    case 6: return str(text(rng));
    default: return bytes(random_bytes(rng, static_cast<std::size_t>(between(rng, 0, 40))));
  }
}

// Hashable scalars for dict keys and set members.
ValuePtr key(Rng& rng) {
  return chance(rng, 0.8) ? str(text(rng)) : integer(between(rng, -1000, 100000));
}

class NestedBuilder {
 public:
  NestedBuilder(Rng& rng, int protocol) : rng_(rng), protocol_(protocol) {}

  ValuePtr build(int depth) {
    if (!shared_.empty() && chance(rng_, 0.08)) return shared_[rng_.index(shared_.size())];
    if (depth <= 0 || chance(rng_, 0.35)) return scalar(rng_, protocol_);
    ValuePtr out;
    auto width = static_cast<std::size_t>(between(rng_, 0, 8));
    switch (rng_.index(protocol_ >= 4 ? 5 : 3)) {
      case 0: {
        std::vector<ValuePtr> items;
        for (std::size_t i = 0; i < width; ++i) items.push_back(build(depth - 1));
        out = list(std::move(items));
        break;
      }
      case 1: {
        std::vector<ValuePtr> items;
        for (std::size_t i = 0; i < width; ++i) items.push_back(build(depth - 1));
        out = tuple(std::move(items));
        break;
      }
      case 2: {
        std::vector<std::pair<ValuePtr, ValuePtr>> items;
        for (std::size_t i = 0; i < width; ++i) items.emplace_back(key(rng_), build(depth - 1));
        out = dict(std::move(items));
        break;
      }
      default: {
        std::vector<ValuePtr> items;
        for (std::size_t i = 0; i < width; ++i) items.push_back(key(rng_));
        out = set(std::move(items), chance(rng_, 0.5));
        break;
      }
    }
    shared_.push_back(out);
    return out;
  }

 private:
  Rng& rng_;
  int protocol_;
  std::vector<ValuePtr> shared_;
};

ValuePtr nested_value(Rng& rng, int protocol) {
  NestedBuilder b(rng, protocol);
  std::vector<std::pair<ValuePtr, ValuePtr>> top;
  auto n = between(rng, 8, 40);
  for (std::int64_t i = 0; i < n; ++i) top.emplace_back(str(word(rng)), b.build(4));
  if (chance(rng, 0.5)) {
    std::vector<ValuePtr> history;
    auto epochs = between(rng, 10, 200);
    for (std::int64_t i = 0; i < epochs; ++i) history.push_back(real(rng.unit()));
    top.emplace_back(str("history"), list(std::move(history)));
  }
  return dict(std::move(top));
}

// numpy.ndarray as its __reduce__ spells it.
ValuePtr ndarray(Rng& rng, std::size_t max_bytes) {
  struct DType {
    std::string_view code;
    std::string_view order;
    std::size_t size;
  };
  static constexpr std::array<DType, 4> kTypes = {
      DType{"f8", "<", 8}, DType{"f4", "<", 4}, DType{"i8", "<", 8}, DType{"u1", "|", 1}};
  const auto& t = pick(rng, kTypes);
  std::vector<ValuePtr> shape;
  std::size_t count = 1;
  auto dims = between(rng, 1, 2);
  for (std::int64_t i = 0; i < dims; ++i) {
    auto d = static_cast<std::size_t>(between(rng, 1, 64));
    count *= d;
    shape.push_back(integer(static_cast<std::int64_t>(d)));
  }
  std::size_t nbytes = std::min(count * t.size, max_bytes);

  Reduce dtype;
  dtype.callable = global("numpy", "dtype");
  dtype.args = {str(std::string(t.code)), boolean(false), boolean(true)};
  dtype.state = tuple({integer(3), str(std::string(t.order)), none(), none(), none(),
                       integer(-1), integer(-1), integer(0)});

  Reduce arr;
  arr.callable = global("numpy.core.multiarray", "_reconstruct");
  arr.args = {global("numpy", "ndarray"), tuple({integer(0)}), bytes("b")};
  arr.state = tuple({integer(1), tuple(std::move(shape)), make({std::move(dtype)}),
                     boolean(false), bytes(random_bytes(rng, nbytes))});
  return make({std::move(arr)});
}

std::string numpy_sample(Rng& rng) {
  int protocol = writer_protocol(rng);
  if (chance(rng, 0.5)) return dumps(ndarray(rng, 32 << 10), protocol);
  std::vector<std::pair<ValuePtr, ValuePtr>> items;
  auto n = between(rng, 2, 6);
  for (std::int64_t i = 0; i < n; ++i) items.emplace_back(str(word(rng)), ndarray(rng, 8 << 10));
  return dumps(dict(std::move(items)), protocol);
}

std::string sklearn_sample(Rng& rng) {
  struct Estimator {
    std::string_view module;
    std::string_view name;
    std::array<std::string_view, 3> fitted;
  };
  static constexpr std::array<Estimator, 4> kEstimators = {
      Estimator{"sklearn.linear_model._logistic", "LogisticRegression",
                {"coef_", "intercept_", "classes_"}},
      Estimator{"sklearn.preprocessing._data", "StandardScaler", {"mean_", "var_", "scale_"}},
      Estimator{"sklearn.decomposition._pca", "PCA",
                {"components_", "explained_variance_", "mean_"}},
      Estimator{"sklearn.svm._classes", "LinearSVC", {"coef_", "intercept_", "classes_"}}};
  const auto& e = pick(rng, kEstimators);
  std::vector<std::pair<ValuePtr, ValuePtr>> state;
  auto params = between(rng, 2, 8);
  for (std::int64_t i = 0; i < params; ++i) state.emplace_back(str(word(rng)), scalar(rng, 4));
  for (auto field : e.fitted) state.emplace_back(str(std::string(field)), ndarray(rng, 4 << 10));
  state.emplace_back(str("n_features_in_"), integer(between(rng, 1, 512)));
  state.emplace_back(str("_sklearn_version"), str("1.3." + std::to_string(between(rng, 0, 2))));
  NewObj obj;
  obj.cls = global(std::string(e.module), std::string(e.name));
  obj.state = dict(std::move(state));
  return dumps(make({std::move(obj)}), writer_protocol(rng));
}

std::string large_bytes_sample(Rng& rng) {
  std::vector<std::pair<ValuePtr, ValuePtr>> items;
  items.emplace_back(str("format"), str(word(rng)));
  items.emplace_back(str("version"), integer(between(rng, 1, 9)));
  auto blobs = between(rng, 1, 4);
  for (std::int64_t i = 0; i < blobs; ++i) {
    auto size = static_cast<std::size_t>(between(rng, 16 << 10, 128 << 10));
    items.emplace_back(str("blob_" + std::to_string(i)), bytes(random_bytes(rng, size)));
  }
  return dumps(dict(std::move(items)), writer_protocol(rng));
}

std::string vocab_sample(Rng& rng) {
  std::vector<std::pair<ValuePtr, ValuePtr>> vocab;
  auto n = between(rng, 100, 1500);
  double subword = rng.unit();
  for (std::int64_t i = 0; i < n; ++i) {
    std::string token = chance(rng, subword) ? "##" + word(rng) : word(rng);
    if (chance(rng, 0.05)) token += "\xc4\xa0";
    vocab.emplace_back(str(std::move(token)), integer(i));
  }
  std::vector<std::pair<ValuePtr, ValuePtr>> top;
  top.emplace_back(str("vocab"), dict(std::move(vocab)));
  std::vector<ValuePtr> merges;
  auto m = between(rng, 0, n);
  for (std::int64_t i = 0; i < m; ++i) merges.push_back(tuple({str(word(rng)), str(word(rng))}));
  top.emplace_back(str("merges"), list(std::move(merges)));
  std::vector<std::pair<ValuePtr, ValuePtr>> special;
  for (const char* t : {"[UNK]", "[CLS]", "[SEP]", "[PAD]", "[MASK]", "<s>", "</s>"}) {
    if (chance(rng, 0.6)) special.emplace_back(str(t), integer(between(rng, 0, n - 1)));
  }
  top.emplace_back(str("special_tokens"), dict(std::move(special)));
  top.emplace_back(str("lowercase"), boolean(chance(rng, 0.5)));
  top.emplace_back(str("model_max_length"), integer(pick(rng, std::array<std::int64_t, 4>{512, 1024, 2048, 4096})));
  return dumps(dict(std::move(top)), writer_protocol(rng));
}

// torch.save layout: <prefix>/data.pkl (protocol 2) with tensors as
// persistent-ID storage references, storages as separate members.
struct TorchArchive {
  std::string prefix;
  std::string data_pkl;
  std::vector<std::pair<std::string, std::string>> storages;
};

TorchArchive torch_archive(Rng& rng) {
  TorchArchive a;
  a.prefix = chance(rng, 0.7) ? "archive" : word(rng) + "_model";
  auto ordered_dict = global("collections", "OrderedDict");
  auto rebuild = global("torch._utils", "_rebuild_tensor_v2");
  struct Storage {
    std::string_view name;
    std::size_t size;
  };
  static constexpr std::array<Storage, 3> kStorages = {
      Storage{"FloatStorage", 4}, Storage{"HalfStorage", 2}, Storage{"LongStorage", 8}};
  static constexpr std::array<std::string_view, 6> kParts = {"attn", "mlp", "norm",
                                                             "proj", "conv", "embed"};
  static constexpr std::array<std::int64_t, 6> kDims = {4, 8, 16, 32, 64, 128};
  const auto& main_storage = kStorages[rng.index(kStorages.size())];

  std::vector<std::pair<ValuePtr, ValuePtr>> entries;
  auto layers = between(rng, 1, 24);
  std::size_t key = 0;
  for (std::int64_t layer = 0; layer < layers; ++layer) {
    std::string base = "layers." + std::to_string(layer) + "." + std::string(pick(rng, kParts));
    const auto& storage = chance(rng, 0.8) ? main_storage : kStorages[rng.index(kStorages.size())];
    auto storage_type = global("torch", std::string(storage.name));
    for (bool weight : {true, false}) {
      if (!weight && chance(rng, 0.3)) continue;
      std::vector<std::int64_t> shape = {pick(rng, kDims)};
      if (weight) shape.push_back(pick(rng, kDims));
      std::vector<ValuePtr> dims, strides;
      std::int64_t numel = 1;
      for (auto d : shape) numel *= d;
      std::int64_t stride = numel;
      for (auto d : shape) {
        stride /= d;
        dims.push_back(integer(d));
        strides.push_back(integer(stride));
      }
      std::string id = std::to_string(key++);
      auto pid = make({PersistentId{tuple({str("storage"), storage_type, str(id), str("cpu"),
                                            integer(numel)})}});
      auto tensor = call(rebuild, {pid, integer(0), tuple(std::move(dims)),
                                   tuple(std::move(strides)), boolean(false),
                                   call(ordered_dict, {})});
      entries.emplace_back(str(base + (weight ? ".weight" : ".bias")), tensor);
      auto nbytes = std::min<std::size_t>(static_cast<std::size_t>(numel) * storage.size, 4096);
      a.storages.emplace_back(a.prefix + "/data/" + id, random_bytes(rng, nbytes));
    }
  }
  Reduce top;
  top.callable = ordered_dict;
  top.dict_items = std::move(entries);
  if (chance(rng, 0.5)) {
    Reduce meta;
    meta.callable = ordered_dict;
    meta.dict_items = {{str(""), dict({{str("version"), integer(1)}})}};
    top.state = dict({{str("_metadata"), make({std::move(meta)})}});
  }
  a.data_pkl = dumps(make({std::move(top)}), 2);
  return a;
}

std::string torch_zip(const TorchArchive& a) {
  archive::ZipWriter zip;
  zip.add(a.prefix + "/data.pkl", a.data_pkl, false);
  for (const auto& [name, data] : a.storages) zip.add(name, data, false);
  zip.add(a.prefix + "/version", "3\n", false);
  zip.add(a.prefix + "/byteorder", "little", false);
  return zip.finish();
}

// --- malicious recipes ---

struct Payload {
  std::string_view module;
  std::string_view name;
};

constexpr std::array<Payload, 10> kPayloads = {
    Payload{"os", "system"},           Payload{"posix", "system"},
    Payload{"nt", "system"},           Payload{"subprocess", "check_output"},
    Payload{"subprocess", "Popen"},    Payload{"builtins", "eval"},
    Payload{"builtins", "exec"},       Payload{"runpy", "_run_code"},
    Payload{"pty", "spawn"},           Payload{"webbrowser", "open"}};

std::string tag(Rng& rng) { return "pickle-sentry-" + word(rng); }

std::vector<ValuePtr> payload_args(const Payload& p, Rng& rng) {
  std::string marker = tag(rng);
  std::string_view name = p.name;
  if (name == "system") return {str("echo " + marker)};
  if (name == "check_output" || name == "Popen" || name == "spawn") {
    return {list({str("echo"), str(marker)})};
  }
  if (name == "eval") return {str("__import__('os').system('echo " + marker + "')")};
  if (name == "exec") return {str("import os\nos.system('echo " + marker + "')")};
  if (name == "_run_code") return {str("print('" + marker + "')"), dict({})};
  return {str("http://127.0.0.1/" + marker)};
}

ValuePtr exploit_call(Rng& rng) {
  const auto& p = pick(rng, kPayloads);
  return call(global(std::string(p.module), std::string(p.name)), payload_args(p, rng));
}

std::string reduce_exec_sample(Rng& rng) {
  return dumps(exploit_call(rng), static_cast<int>(between(rng, 0, 5)));
}

std::string early_trigger_sample(Rng& rng) {
  int protocol = static_cast<int>(between(rng, 2, 5));
  std::vector<std::pair<ValuePtr, ValuePtr>> items;
  items.emplace_back(str(chance(rng, 0.5) ? "__init__" : "config"), exploit_call(rng));
  auto n = between(rng, 3, 20);
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<ValuePtr> values;
    auto m = between(rng, 1, 8);
    for (std::int64_t k = 0; k < m; ++k) values.push_back(real(rng.unit()));
    items.emplace_back(str(word(rng)), list(std::move(values)));
  }
  return dumps(dict(std::move(items)), protocol);
}

std::string truncated_tail_sample(Rng& rng) {
  int protocol = static_cast<int>(between(rng, 1, 5));
  std::vector<ValuePtr> items{exploit_call(rng)};
  auto n = between(rng, 4, 40);
  for (std::int64_t i = 0; i < n; ++i) items.push_back(scalar(rng, protocol));
  std::string full = dumps(list(std::move(items)), protocol);
  auto d = disassemble(full);
  std::uint64_t after_reduce = full.size() - 1;
  for (const auto& ev : d.events) {
    if (ev.opcode == Opcode::kReduce) {
      after_reduce = ev.offset + 1;
      break;
    }
  }
  auto cut = static_cast<std::size_t>(
      between(rng, static_cast<std::int64_t>(after_reduce), static_cast<std::int64_t>(full.size()) - 2));
  std::string out = full.substr(0, cut);
  if (chance(rng, 0.5)) out += random_bytes(rng, static_cast<std::size_t>(between(rng, 4, 64)));
  return out;
}

std::string getattr_chain_sample(Rng& rng) {
  static constexpr std::array<Payload, 4> kTargets = {
      Payload{"os", "system"}, Payload{"subprocess", "check_output"}, Payload{"posix", "system"},
      Payload{"pty", "spawn"}};
  const auto& p = pick(rng, kTargets);
  auto module = call(global("builtins", "__import__"), {str(std::string(p.module))});
  auto fn = call(global("builtins", "getattr"), {module, str(std::string(p.name))});
  return dumps(call(fn, payload_args(p, rng)), static_cast<int>(between(rng, 2, 5)));
}

// A benign torch archive whose data.pkl first runs exec(...) and discards
// the result, as model-injection tools do.
std::string injected_model_sample(Rng& rng) {
  TorchArchive a = torch_archive(rng);
  std::string code = "import os\nos.system('echo " + tag(rng) + "')";
  std::string inject;
  inject += static_cast<char>(Opcode::kGlobal);
  inject += chance(rng, 0.5) ? "__builtin__\nexec\n" : "builtins\nexec\n";
  inject += static_cast<char>(Opcode::kBinUnicode);
  for (int i = 0; i < 4; ++i) inject += static_cast<char>((code.size() >> (8 * i)) & 0xff);
  inject += code;
  inject += static_cast<char>(Opcode::kTuple1);
  inject += static_cast<char>(Opcode::kReduce);
  inject += static_cast<char>(Opcode::kPop);
  a.data_pkl.insert(2, inject);
  return torch_zip(a);
}

struct Recipe {
  std::string_view name;
  std::string (*make)(Rng&);
  std::string_view extension;
};

std::string state_dict_sample(Rng& rng) { return torch_zip(torch_archive(rng)); }
std::string nested_sample(Rng& rng) {
  int protocol = writer_protocol(rng);
  return dumps(nested_value(rng, protocol), protocol);
}

constexpr std::array<Recipe, 6> kBenign = {
    Recipe{"state-dict", state_dict_sample, ".pt"},
    Recipe{"numpy-array", numpy_sample, ".pkl"},
    Recipe{"nested-containers", nested_sample, ".pkl"},
    Recipe{"sklearn-like", sklearn_sample, ".pkl"},
    Recipe{"large-bytes", large_bytes_sample, ".pkl"},
    Recipe{"vocab", vocab_sample, ".pkl"}};

constexpr std::array<Recipe, 5> kMalicious = {
    Recipe{"reduce-exec", reduce_exec_sample, ".pkl"},
    Recipe{"early-trigger", early_trigger_sample, ".pkl"},
    Recipe{"truncated-tail", truncated_tail_sample, ".pkl"},
    Recipe{"getattr-chain", getattr_chain_sample, ".pkl"},
    Recipe{"injected-model", injected_model_sample, ".pt"}};

const Recipe* find_recipe(std::string_view name) {
  for (const auto& r : kBenign) {
    if (r.name == name) return &r;
  }
  for (const auto& r : kMalicious) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

bool is_benign_recipe(std::string_view name) {
  return std::any_of(kBenign.begin(), kBenign.end(), [&](const Recipe& r) { return r.name == name; });
}

std::vector<std::string> names_of(std::span<const Recipe> recipes) {
  std::vector<std::string> out;
  for (const auto& r : recipes) out.emplace_back(r.name);
  return out;
}

// Largest-remainder apportionment of n samples over the mix.
std::vector<std::string> apportion(const std::vector<std::pair<std::string, double>>& mix,
                                   std::size_t n) {
  double total = 0.0;
  for (const auto& [_, w] : mix) total += w;
  std::vector<std::size_t> counts(mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    double exact = static_cast<double>(n) * mix[i].second / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  std::vector<std::string> out;
  for (std::size_t i = 0; i < mix.size(); ++i) out.insert(out.end(), counts[i], mix[i].first);
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "failed reading " + path.string());
  return buffer.str();
}

std::string file_tag(std::string_view path) {
  std::string out(path);
  std::replace(out.begin(), out.end(), '>', '-');
  return out;
}

std::string numbered(char prefix, std::size_t i) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%c%05zu", prefix, i);
  return buf.data();
}

}  // namespace

const std::vector<std::string>& benign_recipes() {
  static const auto names = names_of(kBenign);
  return names;
}

const std::vector<std::string>& malicious_recipes() {
  static const auto names = names_of(kMalicious);
  return names;
}

std::string make_sample(std::string_view recipe, std::uint64_t seed) {
  const Recipe* r = find_recipe(recipe);
  if (r == nullptr) throw Error(ErrorCode::kInvalidArgument, "unknown recipe '" + std::string(recipe) + "'");
  Rng rng(seed);
  return r->make(rng);
}

std::string_view sample_extension(std::string_view recipe) {
  const Recipe* r = find_recipe(recipe);
  if (r == nullptr) throw Error(ErrorCode::kInvalidArgument, "unknown recipe '" + std::string(recipe) + "'");
  return r->extension;
}

const std::vector<std::string>& wrap_paths() {
  static const std::vector<std::string> paths = {"pkl", "zip",  "zip>zip", "tar",  "bz2",
                                                 "gz",  "zlib", "lz4",     "lzma", "xz"};
  return paths;
}

std::pair<std::string, std::string> wrap(std::string_view path, std::string_view payload,
                                         std::string_view inner_name) {
  using codecs::Codec;
  auto zip_of = [](std::string_view name, std::string_view data) {
    archive::ZipWriter zip;
    zip.add(name, data);
    return zip.finish();
  };
  if (path == "pkl") return {std::string(payload), ".pkl"};
  if (path == "zip") return {zip_of(inner_name, payload), ".zip"};
  if (path == "zip>zip") return {zip_of("inner.zip", zip_of(inner_name, payload)), ".zip"};
  if (path == "tar") {
    archive::TarWriter tar;
    tar.add(inner_name, payload);
    return {tar.finish(), ".tar"};
  }
  static const std::array<std::tuple<std::string_view, Codec, std::string_view>, 6> kStreams = {{
      {"bz2", Codec::kBzip2, ".bz2"},
      {"gz", Codec::kGzip, ".gz"},
      {"zlib", Codec::kZlib, ".zlib"},
      {"lz4", Codec::kLz4Frame, ".lz4"},
      {"lzma", Codec::kLzmaAlone, ".lzma"},
      {"xz", Codec::kXz, ".xz"},
  }};
  for (const auto& [name, codec, ext] : kStreams) {
    if (name == path) return {codecs::compress(codec, payload), std::string(ext)};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown wrap path '" + std::string(path) + "'");
}

GenSpec GenSpec::defaults() {
  GenSpec s;
  s.n_benign = 500;
  s.n_malicious = 100;
  s.benign_mix = {{"state-dict", 0.3},   {"numpy-array", 0.15}, {"nested-containers", 0.25},
                  {"sklearn-like", 0.1}, {"large-bytes", 0.1},  {"vocab", 0.1}};
  s.malicious_mix = {{"reduce-exec", 0.4},
                     {"early-trigger", 0.2},
                     {"truncated-tail", 0.15},
                     {"getattr-chain", 0.15},
                     {"injected-model", 0.1}};
  s.wrap_paths = corpus::wrap_paths();
  return s;
}

void GenSpec::validate() const {
  if (n_benign + n_malicious < 2) {
    throw Error(ErrorCode::kInvalidArgument, "a corpus needs at least 2 samples");
  }
  auto check_mix = [](const auto& mix, std::size_t n, bool benign) {
    double total = 0.0;
    for (const auto& [name, w] : mix) {
      if (find_recipe(name) == nullptr || is_benign_recipe(name) != benign) {
        throw Error(ErrorCode::kInvalidArgument,
                    "'" + name + "' is not a " + (benign ? "benign" : "malicious") + " recipe");
      }
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw Error(ErrorCode::kInvalidArgument, "recipe weights must be finite and >= 0");
      }
      total += w;
    }
    if (n > 0 && !(total > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "recipe mix has no positive weight");
    }
  };
  check_mix(benign_mix, n_benign, true);
  check_mix(malicious_mix, n_malicious, false);
  for (const auto& p : wrap_paths) {
    const auto& all = corpus::wrap_paths();
    if (std::find(all.begin(), all.end(), p) == all.end()) {
      throw Error(ErrorCode::kInvalidArgument, "unknown wrap path '" + p + "'");
    }
  }
}

GenSpec GenSpec::from_json(std::string_view text) {
  using Json = nlohmann::ordered_json;
  GenSpec s = defaults();
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::kParse, "spec must be a JSON object");
    s.seed = j.value("seed", s.seed);
    s.n_benign = j.value("n_benign", s.n_benign);
    s.n_malicious = j.value("n_malicious", s.n_malicious);
    auto mix = [&](const char* key, auto& out) {
      if (!j.contains(key)) return;
      out.clear();
      for (const auto& [name, w] : j.at(key).items()) out.emplace_back(name, w.template get<double>());
    };
    mix("benign_mix", s.benign_mix);
    mix("malicious_mix", s.malicious_mix);
    if (j.contains("wrap_paths")) {
      const auto& w = j.at("wrap_paths");
      if (w.is_string() && w.get<std::string>() == "all") {
        s.wrap_paths = corpus::wrap_paths();
      } else {
        s.wrap_paths = w.get<std::vector<std::string>>();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<ManifestRow> generate(const GenSpec& spec, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  spec.validate();
  std::error_code ec;
  for (const char* sub : {"benign", "malicious", "wrapped"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  std::vector<ManifestRow> rows;
  auto benign = apportion(spec.benign_mix, spec.n_benign);
  for (std::size_t i = 0; i < benign.size(); ++i) {
    std::string data = make_sample(benign[i], stream_seed(spec.seed, 2 * i));
    std::string rel = "benign/" + numbered('b', i) + "_" + benign[i] +
                      std::string(sample_extension(benign[i]));
    write_file(out_dir / rel, data);
    rows.push_back({rel, Label::kBenign, benign[i], "none"});
  }
  auto malicious = apportion(spec.malicious_mix, spec.n_malicious);
  for (std::size_t i = 0; i < malicious.size(); ++i) {
    std::string data = make_sample(malicious[i], stream_seed(spec.seed, 2 * i + 1));
    std::string stem = numbered('m', i) + "_" + malicious[i];
    std::string inner = stem + std::string(sample_extension(malicious[i]));
    std::string rel = "malicious/" + inner;
    write_file(out_dir / rel, data);
    rows.push_back({rel, Label::kMalicious, malicious[i], "none"});
    for (const auto& path : spec.wrap_paths) {
      auto [wrapped, ext] = wrap(path, data, inner);
      std::string wrel = "wrapped/" + stem + "_" + file_tag(path) + ext;
      write_file(out_dir / wrel, wrapped);
      rows.push_back({wrel, Label::kMalicious, malicious[i], path});
    }
  }
  write_manifest(out_dir / "manifest.csv", rows);
  return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << "path,label,recipe,wrap_chain\n";
  for (const auto& r : rows) {
    out << csv::quote(r.path) << ',' << to_string(r.label) << ',' << csv::quote(r.recipe) << ','
        << csv::quote(r.wrap_chain) << '\n';
  }
  write_file(path, out.str());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> fields;
  if (!csv::read_record(in, fields) || fields != std::vector<std::string>{"path", "label", "recipe", "wrap_chain"}) {
    throw Error(ErrorCode::kParse, path.string() + ": expected header path,label,recipe,wrap_chain");
  }
  std::vector<ManifestRow> rows;
  std::size_t line = 1;
  while (csv::read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;
    auto label = fields.size() == 4 ? parse_label(fields[1]) : std::nullopt;
    if (!label) throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": bad row");
    rows.push_back({fields[0], *label, fields[2], fields[3]});
  }
  return rows;
}

FeatureVector file_features(std::string_view bytes, const UnwrapLimits& limits) {
  UnwrapResult u = unwrap(bytes, limits);
  OpcodeHistogram total;
  for (const auto& c : u.candidates) {
    if (c.bytes->empty()) continue;
    auto part = count_opcodes(*c.bytes);
    for (std::size_t i = 0; i < kVocabularySize; ++i) total.counts[i] += part.counts[i];
    total.segments += part.segments;
  }
  return extract(total);
}

LabeledCorpus load_corpus(const std::filesystem::path& manifest, const CorpusLoadOptions& options) {
  auto rows = read_manifest(manifest);
  std::erase_if(rows, [&](const ManifestRow& r) {
    return !options.include_wrapped && r.wrap_chain != "none";
  });
  if (rows.empty()) throw Error(ErrorCode::kEmptyCorpus, manifest.string() + " lists no samples");
  auto base = manifest.parent_path();
  LabeledCorpus corpus(rows.size());
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), options.jobs, [&](std::size_t i) {
    try {
      auto path = base / rows[i].path;
      corpus[i].vector = file_features(read_file(path), options.limits);
      corpus[i].label = rows[i].label;
      corpus[i].source_path = path.string();
    } catch (const std::exception& e) {
      errors[i] = rows[i].path + ": " + e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::kIo, e);
  }
  return corpus;
}

}  // namespace pickle_sentry::corpus
