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

#include "pickle_sentry/features.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "csv.hpp"
#include "pickle_sentry/error.hpp"

namespace pickle_sentry {
namespace {

using Counts = std::array<std::uint64_t, kVocabularySize>;

void count(std::span<const OpcodeEvent> events, Counts& counts) {
  for (const auto& e : events) ++counts[vocabulary_index(e.opcode)];
}

FeatureVector from_counts(const Counts& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw Error(ErrorCode::kEmptyDisassembly, "no opcode events");
  FeatureVector v;
  v.total_opcodes = total;
  v.freqs.resize(kVocabularySize);
  const double denom = static_cast<double>(total);
  for (std::size_t i = 0; i < kVocabularySize; ++i) {
    v.freqs[i] = static_cast<double>(counts[i]) / denom;
  }
  return v;
}

std::string format_g12(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParse, "bad number '" + text + "'");
  }
  return value;
}

}  // namespace

void VocabularyProjection::validate() const {
  if (kept_indices.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "projection keeps no dimensions");
  }
  for (std::size_t i = 0; i < kept_indices.size(); ++i) {
    if (kept_indices[i] >= kVocabularySize ||
        (i > 0 && kept_indices[i] <= kept_indices[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "projection indices must be strictly increasing and < 68");
    }
  }
}

FeatureVector extract(const OpcodeHistogram& histogram) { return from_counts(histogram.counts); }

FeatureVector extract(std::span<const OpcodeEvent> events) {
  Counts counts{};
  count(events, counts);
  return from_counts(counts);
}

FeatureVector extract(const Disassembly& disassembly) {
  return extract(std::span<const OpcodeEvent>(disassembly.events));
}

FeatureVector extract(std::span<const Disassembly> segments) {
  Counts counts{};
  for (const auto& s : segments) count(s.events, counts);
  return from_counts(counts);
}

VocabularyProjection fit_projection(std::span<const FeatureVector> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot fit a projection");
  std::array<bool, kVocabularySize> used{};
  for (const auto& v : corpus) {
    if (v.projected || v.dimension() != kVocabularySize) {
      throw Error(ErrorCode::kDimensionMismatch, "corpus vectors must be full-dimensional");
    }
    for (std::size_t i = 0; i < kVocabularySize; ++i) {
      if (v.freqs[i] != 0.0) used[i] = true;
    }
  }
  VocabularyProjection projection;
  for (std::size_t i = 0; i < kVocabularySize; ++i) {
    if (used[i]) projection.kept_indices.push_back(i);
  }
  return projection;
}

FeatureVector project(const FeatureVector& v, const VocabularyProjection& projection) {
  if (v.projected || v.dimension() != kVocabularySize) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected a " + std::to_string(kVocabularySize) +
                    "-dimensional unprojected vector, got dimension " +
                    std::to_string(v.dimension()));
  }
  FeatureVector out;
  out.projected = true;
  out.total_opcodes = v.total_opcodes;
  out.freqs.reserve(projection.kept_indices.size());
  for (auto index : projection.kept_indices) out.freqs.push_back(v.freqs[index]);
  // Summing the dropped components directly keeps oov_mass exactly zero
  // when nothing is dropped.
  double dropped = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < kVocabularySize; ++i) {
    if (k < projection.kept_indices.size() && projection.kept_indices[k] == i) {
      ++k;
      continue;
    }
    dropped += v.freqs[i];
  }
  out.oov_mass = dropped;
  return out;
}

void export_csv(std::ostream& out, std::span<const LabeledVector> rows) {
  out << "label";
  for (std::size_t i = 0; i < kVocabularySize; ++i) out << ",f_" << i;
  out << ",total\n";
  for (const auto& row : rows) {
    if (row.vector.projected || row.vector.dimension() != kVocabularySize) {
      throw Error(ErrorCode::kDimensionMismatch, "CSV rows must be full-dimensional");
    }
    out << csv::quote(row.label);
    for (double f : row.vector.freqs) out << ',' << format_g12(f);
    out << ',' << row.vector.total_opcodes << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing feature CSV");
}

void export_csv(const std::filesystem::path& path, std::span<const LabeledVector> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  export_csv(out, rows);
}

std::vector<LabeledVector> read_csv(std::istream& in) {
  std::vector<std::string> fields;
  if (!csv::read_record(in, fields) || fields.size() != kVocabularySize + 2 ||
      fields.front() != "label" || fields.back() != "total") {
    throw Error(ErrorCode::kParse, "missing or malformed feature CSV header");
  }
  std::vector<LabeledVector> rows;
  std::size_t line = 1;
  while (csv::read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != kVocabularySize + 2) {
      throw Error(ErrorCode::kParse, "feature CSV line " + std::to_string(line) + " has " +
                                         std::to_string(fields.size()) + " columns");
    }
    LabeledVector row;
    row.label = fields[0];
    row.vector.freqs.reserve(kVocabularySize);
    for (std::size_t i = 0; i < kVocabularySize; ++i) {
      row.vector.freqs.push_back(parse_double(fields[i + 1]));
    }
    const auto& total = fields.back();
    const auto res = std::from_chars(total.data(), total.data() + total.size(),
                                     row.vector.total_opcodes);
    if (res.ec != std::errc() || res.ptr != total.data() + total.size()) {
      throw Error(ErrorCode::kParse, "bad total on feature CSV line " + std::to_string(line));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LabeledVector> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_csv(in);
}

}  // namespace pickle_sentry
