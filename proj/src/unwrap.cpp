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

#include "pickle_sentry/unwrap.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>

#include "pickle_sentry/archive.hpp"
#include "pickle_sentry/codecs.hpp"
#include "pickle_sentry/opcodes.hpp"

namespace pickle_sentry {
namespace {

constexpr std::uint64_t kBombRatio = 1000;

constexpr std::array<std::string_view, 6> kPickleExtensions = {
    ".pkl", ".pickle", ".bin", ".pt", ".pth", ".joblib"};

bool has_pickle_extension(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::any_of(kPickleExtensions.begin(), kPickleExtensions.end(),
                     [&](std::string_view ext) { return lower.ends_with(ext); });
}

bool starts_with(std::span<const std::uint8_t> data, std::string_view magic,
                 std::size_t offset = 0) {
  return data.size() >= offset + magic.size() &&
         std::memcmp(data.data() + offset, magic.data(), magic.size()) == 0;
}

// Legacy .lzma header: properties byte, 4-byte dictionary size, 8-byte
// uncompressed size. Mirrors the checks liblzma applies.
bool plausible_lzma_alone(std::span<const std::uint8_t> data) {
  if (data.size() < 13 || data[0] != 0x5d) return false;
  std::uint32_t dict = 0;
  for (int i = 0; i < 4; ++i) dict |= static_cast<std::uint32_t>(data[1 + i]) << (8 * i);
  if (dict != 0xffffffffu) {
    if (dict < (1u << 12)) return false;
    // 2^n or 2^n + 2^(n-1)
    std::uint32_t d = dict - 1;
    d |= d >> 2; d |= d >> 3; d |= d >> 4; d |= d >> 8; d |= d >> 16;
    if (d + 1 != dict) return false;
  }
  std::uint64_t size = 0;
  for (int i = 0; i < 8; ++i) size |= static_cast<std::uint64_t>(data[5 + i]) << (8 * i);
  return size == ~std::uint64_t{0} || size < (std::uint64_t{1} << 38);
}

bool names_pytorch_entry(const archive::ZipListing& listing) {
  return std::any_of(listing.entries.begin(), listing.entries.end(), [](const auto& e) {
    return e.name == "data.pkl" || e.name.ends_with("/data.pkl");
  });
}

ContainerKind sniff_bytes(std::span<const std::uint8_t> data) {
  if (starts_with(data, "PK\x03\x04") || starts_with(data, "PK\x05\x06")) {
    return names_pytorch_entry(archive::list_zip(data)) ? ContainerKind::kPytorchZip
                                                        : ContainerKind::kZip;
  }
  if (data[0] == 0x1f && data[1] == 0x8b) return ContainerKind::kGzip;
  if (starts_with(data, "BZh") && data[3] >= '1' && data[3] <= '9') return ContainerKind::kBz2;
  if (starts_with(data, std::string_view("\xfd" "7zXZ\0", 6))) return ContainerKind::kXz;
  if (starts_with(data, "\x04\x22\x4d\x18")) return ContainerKind::kLz4Frame;
  if (starts_with(data, "ustar", 257)) return ContainerKind::kTar;
  if (plausible_lzma_alone(data)) return ContainerKind::kLzmaAlone;
  if (data[0] == 0x78 && ((data[0] << 8) | data[1]) % 31 == 0) return ContainerKind::kZlib;
  return ContainerKind::kRaw;
}

// Zip archive preceded by other data (e.g. a pickle with a zip appended):
// only the end-of-central-directory record gives it away.
bool is_prefixed_zip(std::span<const std::uint8_t> data) {
  if (data.size() < 22) return false;
  const std::size_t window = std::min<std::size_t>(data.size(), 0xffff + 22);
  const auto* tail = data.data() + data.size() - window;
  bool found = false;
  for (std::size_t i = 0; i + 4 <= window; ++i) {
    if (std::memcmp(tail + i, "PK\x05\x06", 4) == 0) {
      found = true;
      break;
    }
  }
  if (!found) return false;
  const auto listing = archive::list_zip(data);
  return !listing.entries.empty() && listing.warnings.empty();
}

std::optional<codecs::Codec> codec_for(ContainerKind kind) {
  switch (kind) {
    case ContainerKind::kGzip: return codecs::Codec::kGzip;
    case ContainerKind::kBz2: return codecs::Codec::kBzip2;
    case ContainerKind::kZlib: return codecs::Codec::kZlib;
    case ContainerKind::kLz4Frame: return codecs::Codec::kLz4Frame;
    case ContainerKind::kLzmaAlone: return codecs::Codec::kLzmaAlone;
    case ContainerKind::kXz: return codecs::Codec::kXz;
    default: return std::nullopt;
  }
}

std::span<const std::uint8_t> bytes_of(const Payload& payload) {
  return {reinterpret_cast<const std::uint8_t*>(payload->data()), payload->size()};
}

class Expander {
 public:
  Expander(const UnwrapLimits& limits, std::uint64_t input_size,
           std::vector<PickleCandidate>& candidates)
      : limits_(limits), input_size_(input_size), candidates_(candidates) {}

  // `named_only`: the parent only loads members with pickle file names
  // (pytorch-zip), so other raw members are not candidates.
  void expand(UnwrapNode& node, bool is_root, bool named_only) {
    const auto data = bytes_of(node.payload);
    ContainerKind kind = data.size() >= 6 ? sniff_bytes(data) : ContainerKind::kRaw;
    bool prefixed_zip = false;
    if (kind == ContainerKind::kRaw && is_prefixed_zip(data)) {
      prefixed_zip = true;
      kind = names_pytorch_entry(archive::list_zip(data)) ? ContainerKind::kPytorchZip
                                                          : ContainerKind::kZip;
    }
    node.container_kind = kind;
    if (kind == ContainerKind::kRaw) {
      add_leaf(node, is_root, named_only);
      return;
    }
    if (node.depth + 1 > limits_.max_depth) {
      node.issue = UnwrapIssue{ErrorCode::kDepthExceeded,
                               "container at depth " + std::to_string(node.depth) +
                                   " exceeds max_depth " + std::to_string(limits_.max_depth)};
      return;
    }
    switch (kind) {
      case ContainerKind::kZip:
      case ContainerKind::kPytorchZip:
        if (prefixed_zip) add_leaf(node, is_root, named_only);
        expand_zip(node, kind == ContainerKind::kPytorchZip);
        break;
      case ContainerKind::kTar:
        expand_tar(node);
        break;
      default:
        expand_stream(node, is_root, named_only);
        break;
    }
  }

 private:
  std::uint64_t remaining() const {
    return limits_.max_inflated_bytes > inflated_ ? limits_.max_inflated_bytes - inflated_ : 0;
  }

  UnwrapIssue budget_issue() const {
    const std::uint64_t attempted = limits_.max_inflated_bytes + 1;
    if (input_size_ == 0 || attempted / input_size_ > kBombRatio) {
      return {ErrorCode::kInflationBombSuspected,
              "inflated output exceeds " + std::to_string(limits_.max_inflated_bytes) +
                  " bytes at a ratio above " + std::to_string(kBombRatio)};
    }
    return {ErrorCode::kLimitExceeded,
            "inflated output exceeds " + std::to_string(limits_.max_inflated_bytes) + " bytes"};
  }

  bool take_entry(UnwrapNode& node) {
    if (++entries_ > limits_.max_entries) {
      node.issue = UnwrapIssue{ErrorCode::kLimitExceeded,
                               "more than " + std::to_string(limits_.max_entries) + " entries"};
      return false;
    }
    return true;
  }

  void add_leaf(const UnwrapNode& node, bool is_root, bool named_only) {
    bool plausible = is_root;
    if (!plausible && !node.payload->empty()) {
      const bool named = has_pickle_extension(node.entry_path);
      const bool opcode_start =
          vocabulary_index(static_cast<std::uint8_t>((*node.payload)[0])).has_value();
      plausible = named_only ? named : (named || opcode_start);
    }
    if (plausible) candidates_.push_back({node.payload, chain_});
  }

  void add_child(UnwrapNode& parent, std::string entry_path, std::string data,
                 bool named_only) {
    UnwrapNode child;
    child.entry_path = std::move(entry_path);
    child.depth = parent.depth + 1;
    child.payload = std::make_shared<const std::string>(std::move(data));
    chain_.push_back({parent.container_kind, child.entry_path});
    expand(child, false, named_only);
    chain_.pop_back();
    parent.children.push_back(std::move(child));
  }

  void expand_stream(UnwrapNode& node, bool is_root, bool named_only) {
    const auto kind = node.container_kind;
    auto result = codecs::decompress(*codec_for(kind), bytes_of(node.payload), remaining());
    if (result.limit_hit) {
      inflated_ = limits_.max_inflated_bytes;
      node.issue = budget_issue();
      return;
    }
    const bool weak_magic = kind == ContainerKind::kZlib || kind == ContainerKind::kLzmaAlone;
    if (weak_magic && (!result.complete || !result.error.empty())) {
      // No reliable magic: a failed decode means this was never compressed.
      node.container_kind = ContainerKind::kRaw;
      add_leaf(node, is_root, named_only);
      return;
    }
    if (!result.error.empty()) {
      node.issue = UnwrapIssue{ErrorCode::kCorruptContainer,
                               std::string(to_string(kind)) + ": " + result.error};
      if (result.data.empty()) return;
    }
    inflated_ += result.data.size();
    add_child(node, "", std::move(result.data), false);
  }

  void expand_zip(UnwrapNode& node, bool pytorch) {
    const auto data = bytes_of(node.payload);
    const auto listing = archive::list_zip(data);
    if (!listing.warnings.empty()) {
      node.issue = UnwrapIssue{ErrorCode::kCorruptContainer, listing.warnings.front()};
    }
    for (const auto& entry : listing.entries) {
      if (entry.is_directory()) continue;
      if (!take_entry(node)) return;
      auto result = archive::read_zip_entry(data, entry, remaining());
      if (result.limit_hit) {
        inflated_ = limits_.max_inflated_bytes;
        node.issue = budget_issue();
        return;
      }
      inflated_ += result.data.size();
      if (!result.error.empty()) {
        node.issue = UnwrapIssue{ErrorCode::kCorruptContainer,
                                 "'" + entry.name + "': " + result.error};
        if (result.data.empty()) continue;
      }
      add_child(node, entry.name, std::move(result.data), pytorch);
    }
  }

  void expand_tar(UnwrapNode& node) {
    const auto data = bytes_of(node.payload);
    const auto listing = archive::list_tar(data);
    if (!listing.warnings.empty()) {
      node.issue = UnwrapIssue{ErrorCode::kCorruptContainer, listing.warnings.front()};
    }
    for (const auto& entry : listing.entries) {
      if (!take_entry(node)) return;
      if (entry.size > remaining()) {
        inflated_ = limits_.max_inflated_bytes;
        node.issue = budget_issue();
        return;
      }
      inflated_ += entry.size;
      std::string member(reinterpret_cast<const char*>(data.data()) + entry.data_offset,
                         static_cast<std::size_t>(entry.size));
      add_child(node, entry.name, std::move(member), false);
    }
  }

  const UnwrapLimits& limits_;
  std::uint64_t input_size_;
  std::vector<PickleCandidate>& candidates_;
  std::vector<OriginStep> chain_;
  std::uint64_t inflated_ = 0;
  std::uint64_t entries_ = 0;
};

void collect_issues(const UnwrapNode& node, std::vector<UnwrapIssue>& out) {
  if (node.issue) out.push_back(*node.issue);
  for (const auto& child : node.children) collect_issues(child, out);
}

}  // namespace

std::string_view to_string(ContainerKind kind) {
  switch (kind) {
    case ContainerKind::kRaw: return "raw";
    case ContainerKind::kZip: return "zip";
    case ContainerKind::kTar: return "tar";
    case ContainerKind::kGzip: return "gzip";
    case ContainerKind::kBz2: return "bz2";
    case ContainerKind::kZlib: return "zlib";
    case ContainerKind::kLz4Frame: return "lz4-frame";
    case ContainerKind::kLzmaAlone: return "lzma-alone";
    case ContainerKind::kXz: return "xz";
    case ContainerKind::kPytorchZip: return "pytorch-zip";
  }
  return "unknown";
}

std::optional<ContainerKind> parse_container_kind(std::string_view name) {
  for (auto kind : {ContainerKind::kRaw, ContainerKind::kZip, ContainerKind::kTar,
                    ContainerKind::kGzip, ContainerKind::kBz2, ContainerKind::kZlib,
                    ContainerKind::kLz4Frame, ContainerKind::kLzmaAlone, ContainerKind::kXz,
                    ContainerKind::kPytorchZip}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::vector<UnwrapIssue> UnwrapResult::issues() const {
  std::vector<UnwrapIssue> out;
  collect_issues(root, out);
  return out;
}

bool UnwrapResult::hit_limit() const {
  const auto all = issues();
  return std::any_of(all.begin(), all.end(), [](const UnwrapIssue& issue) {
    return issue.code == ErrorCode::kDepthExceeded ||
           issue.code == ErrorCode::kInflationBombSuspected ||
           issue.code == ErrorCode::kLimitExceeded;
  });
}

ContainerKind sniff(std::span<const std::uint8_t> input) {
  if (input.size() < 6) {
    throw Error(ErrorCode::kInputTooShort, "need at least 6 bytes to sniff, got " +
                                               std::to_string(input.size()));
  }
  return sniff_bytes(input);
}

ContainerKind sniff(std::string_view input) {
  return sniff(std::span(reinterpret_cast<const std::uint8_t*>(input.data()), input.size()));
}

UnwrapResult unwrap(std::span<const std::uint8_t> input, const UnwrapLimits& limits) {
  if (input.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to unwrap");
  UnwrapResult result;
  result.root.payload = std::make_shared<const std::string>(
      reinterpret_cast<const char*>(input.data()), input.size());
  Expander expander(limits, input.size(), result.candidates);
  expander.expand(result.root, true, false);
  return result;
}

UnwrapResult unwrap(std::string_view input, const UnwrapLimits& limits) {
  return unwrap(std::span(reinterpret_cast<const std::uint8_t*>(input.data()), input.size()),
                limits);
}

std::string format_origin_chain(const std::vector<OriginStep>& chain) {
  std::string out;
  for (const auto& step : chain) {
    if (!out.empty()) out += " > ";
    out += to_string(step.kind);
    if (!step.entry_path.empty()) {
      out += ':';
      out += step.entry_path;
    }
  }
  return out;
}

}  // namespace pickle_sentry
