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

// Synthetic labeled corpora: model-like benign pickles, exploit pickles
// and their wrapped variants. Generation only writes bytes; exploit
// commands are inert `echo` strings.

#ifndef PICKLE_SENTRY_CORPUS_HPP_
#define PICKLE_SENTRY_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/unwrap.hpp"

namespace pickle_sentry::corpus {

// --- object model for the pickler ---

struct Value;
using ValuePtr = std::shared_ptr<const Value>;

struct Str {
  std::string utf8;
};
struct Bytes {
  std::string data;
};
struct List {
  std::vector<ValuePtr> items;
};
struct Tuple {
  std::vector<ValuePtr> items;
};
struct Dict {
  std::vector<std::pair<ValuePtr, ValuePtr>> items;
};
struct Set {
  std::vector<ValuePtr> items;
  bool frozen = false;
};
struct Global {
  std::string module;
  std::string name;
};
// callable(*args), then optional list/dict items and BUILD state, in the
// order the standard pickler writes them.
struct Reduce {
  ValuePtr callable;
  std::vector<ValuePtr> args;
  std::vector<ValuePtr> list_items;
  std::vector<std::pair<ValuePtr, ValuePtr>> dict_items;
  ValuePtr state;
};
// cls.__new__(cls, *args) plus optional BUILD state.
struct NewObj {
  ValuePtr cls;
  std::vector<ValuePtr> args;
  ValuePtr state;
};
struct PersistentId {
  ValuePtr pid;
};

struct Value {
  std::variant<std::monostate, bool, std::int64_t, double, Str, Bytes, List, Tuple, Dict, Set,
               Global, Reduce, NewObj, PersistentId>
      v;
};

// Serializes like the standard pickler at `protocol` (0-5): same opcode
// choices, batching and memoization. Objects reached twice through the
// same ValuePtr are written once and fetched from the memo afterwards.
std::string dumps(const ValuePtr& value, int protocol);

// --- recipes ---

const std::vector<std::string>& benign_recipes();
const std::vector<std::string>& malicious_recipes();

// Base sample bytes for a recipe (a pickle, or a pytorch-style zip).
// Throws ErrorCode::kInvalidArgument for unknown recipes.
std::string make_sample(std::string_view recipe, std::uint64_t seed);
// File extension for a recipe's base sample (".pkl" or ".pt").
std::string_view sample_extension(std::string_view recipe);

// The ten loading paths: pkl, zip, zip>zip, tar, bz2, gz, zlib, lz4,
// lzma, xz.
const std::vector<std::string>& wrap_paths();
// Wraps `payload` (originally named `inner_name`) along `path`; returns
// the bytes and the file extension of the result.
std::pair<std::string, std::string> wrap(std::string_view path, std::string_view payload,
                                         std::string_view inner_name);

// --- corpus generation ---

struct GenSpec {
  std::uint64_t seed = 0;
  std::size_t n_benign = 0;
  std::size_t n_malicious = 0;
  // Recipe weights; defaults cover every recipe.
  std::vector<std::pair<std::string, double>> benign_mix;
  std::vector<std::pair<std::string, double>> malicious_mix;
  std::vector<std::string> wrap_paths;

  static GenSpec defaults();
  // Missing fields keep their defaults(). Throws kParse / kInvalidArgument.
  static GenSpec from_json(std::string_view text);
  void validate() const;
};

struct ManifestRow {
  // Relative to the manifest's directory.
  std::string path;
  Label label = Label::kBenign;
  std::string recipe;
  // "none" for base samples, otherwise the loading path.
  std::string wrap_chain = "none";
};

// Writes benign/, malicious/, wrapped/ and manifest.csv under `out_dir`.
// Throws ErrorCode::kIo.
std::vector<ManifestRow> generate(const GenSpec& spec, const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// Opcode frequencies of a file: all pickle candidates found by unwrap,
// all segments, counted together. Throws kEmptyInput / kEmptyDisassembly.
FeatureVector file_features(std::string_view bytes, const UnwrapLimits& limits = {});

struct CorpusLoadOptions {
  bool include_wrapped = false;
  UnwrapLimits limits;
  unsigned jobs = 0;
};

// Manifest rows as a labeled corpus. Throws kIo, kParse, kEmptyCorpus.
LabeledCorpus load_corpus(const std::filesystem::path& manifest,
                          const CorpusLoadOptions& options = {});

}  // namespace pickle_sentry::corpus

#endif  // PICKLE_SENTRY_CORPUS_HPP_
