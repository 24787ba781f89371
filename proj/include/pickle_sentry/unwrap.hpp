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

// Recursive container expansion: finds pickle payloads hidden inside
// archives and compression layers.

#ifndef PICKLE_SENTRY_UNWRAP_HPP_
#define PICKLE_SENTRY_UNWRAP_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pickle_sentry/error.hpp"

namespace pickle_sentry {

enum class ContainerKind : std::uint8_t {
  kRaw,
  kZip,
  kTar,
  kGzip,
  kBz2,
  kZlib,
  kLz4Frame,
  kLzmaAlone,
  kXz,
  kPytorchZip,
};

std::string_view to_string(ContainerKind kind);
std::optional<ContainerKind> parse_container_kind(std::string_view name);

struct UnwrapLimits {
  std::uint32_t max_depth = 8;
  // Budget for all decompressed/extracted bytes in one unwrap call.
  std::uint64_t max_inflated_bytes = 1ull << 30;
  std::uint64_t max_entries = 10'000;
};

struct UnwrapIssue {
  ErrorCode code;
  std::string message;
};

using Payload = std::shared_ptr<const std::string>;

struct UnwrapNode {
  ContainerKind container_kind = ContainerKind::kRaw;
  // Name inside the parent container; empty for the root and for
  // single-stream compressors.
  std::string entry_path;
  std::uint32_t depth = 0;
  Payload payload;
  std::vector<UnwrapNode> children;
  // Set when this node could not be (fully) expanded.
  std::optional<UnwrapIssue> issue;
};

struct OriginStep {
  ContainerKind kind;
  std::string entry_path;
  bool operator==(const OriginStep&) const = default;
};

struct PickleCandidate {
  Payload bytes;
  // Outermost container first; empty for a bare pickle.
  std::vector<OriginStep> origin_chain;
};

struct UnwrapResult {
  UnwrapNode root;
  std::vector<PickleCandidate> candidates;

  // All node issues in depth-first order.
  std::vector<UnwrapIssue> issues() const;
  // True when expansion stopped at a depth, size or entry limit.
  bool hit_limit() const;
};

// Kind by magic bytes. Throws ErrorCode::kInputTooShort below 6 bytes.
ContainerKind sniff(std::span<const std::uint8_t> input);
ContainerKind sniff(std::string_view input);

// Throws ErrorCode::kEmptyInput on empty input; all other problems are
// recorded on the nodes.
UnwrapResult unwrap(std::span<const std::uint8_t> input, const UnwrapLimits& limits = {});
UnwrapResult unwrap(std::string_view input, const UnwrapLimits& limits = {});

// Renders an origin chain as "zip:inner.zip > zip:payload.pkl".
std::string format_origin_chain(const std::vector<OriginStep>& chain);

}  // namespace pickle_sentry

#endif  // PICKLE_SENTRY_UNWRAP_HPP_
