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

// Opcode-frequency vectors: freqs[i] = count(opcode_i) / total opcodes.

#ifndef PICKLE_SENTRY_FEATURES_HPP_
#define PICKLE_SENTRY_FEATURES_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pickle_sentry/disasm.hpp"

namespace pickle_sentry {

struct FeatureVector {
  // One entry per vocabulary position, or per kept index once projected.
  std::vector<double> freqs;
  std::uint64_t total_opcodes = 0;
  // Mass dropped by a projection; 0 for full-dimensional vectors.
  double oov_mass = 0.0;
  bool projected = false;

  std::size_t dimension() const noexcept { return freqs.size(); }
};

// Vocabulary dimensions kept after dropping columns that are zero across
// a training corpus. Strictly increasing, each < kVocabularySize.
struct VocabularyProjection {
  std::vector<std::size_t> kept_indices;

  // Throws ErrorCode::kInvalidArgument when the invariants do not hold.
  void validate() const;
  bool operator==(const VocabularyProjection&) const = default;
};

// Throws ErrorCode::kEmptyDisassembly when there are no events.
FeatureVector extract(std::span<const OpcodeEvent> events);
FeatureVector extract(const Disassembly& disassembly);
// Counts over the concatenation of all segments.
FeatureVector extract(std::span<const Disassembly> segments);
// Same vector as extract(disassemble_all(input)) for the input counted.
FeatureVector extract(const OpcodeHistogram& histogram);

// Throws ErrorCode::kEmptyCorpus.
VocabularyProjection fit_projection(std::span<const FeatureVector> corpus);

// Keeps the projection's components without renormalizing; the dropped
// mass goes to oov_mass. Throws ErrorCode::kDimensionMismatch for a vector
// that is not full-dimensional.
FeatureVector project(const FeatureVector& v, const VocabularyProjection& projection);

struct LabeledVector {
  std::string label;
  FeatureVector vector;
};

// Header `label,f_0,...,f_67,total`; frequencies with 12 significant digits.
void export_csv(std::ostream& out, std::span<const LabeledVector> rows);
void export_csv(const std::filesystem::path& path, std::span<const LabeledVector> rows);
std::vector<LabeledVector> read_csv(std::istream& in);
std::vector<LabeledVector> read_csv(const std::filesystem::path& path);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_FEATURES_HPP_
