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

#include <random>
#include <string>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/archive.hpp"
#include "pickle_sentry/codecs.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/unwrap.hpp"

namespace ps = pickle_sentry;
namespace codecs = pickle_sentry::codecs;
using namespace std::string_literals;

namespace {

const std::string kPickle = "\x80\x04\x95\x06\x00\x00\x00\x00\x00\x00\x00K\x07K\x08\x86."s;

std::string noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string s(n, '\0');
  for (auto& c : s) c = static_cast<char>(rng() & 0xff);
  return s;
}

}  // namespace

class CodecRoundTrip : public ::testing::TestWithParam<codecs::Codec> {};

TEST_P(CodecRoundTrip, CompressThenDecompress) {
  for (const auto& input : {std::string(), kPickle, noise(70000, 1), std::string(300000, 'a')}) {
    auto packed = codecs::compress(GetParam(), input);
    auto out = codecs::decompress(GetParam(), packed, 1u << 30);
    EXPECT_TRUE(out.complete) << out.error;
    EXPECT_TRUE(out.error.empty()) << out.error;
    EXPECT_EQ(out.data, input);
    EXPECT_EQ(packed, codecs::compress(GetParam(), input));
  }
}

TEST_P(CodecRoundTrip, OutputCapStopsEarly) {
  auto packed = codecs::compress(GetParam(), std::string(1u << 20, 'z'));
  auto out = codecs::decompress(GetParam(), packed, 1000);
  EXPECT_TRUE(out.limit_hit);
  EXPECT_LE(out.data.size(), 1000u);
}

TEST_P(CodecRoundTrip, TruncatedStreamIsIncomplete) {
  auto packed = codecs::compress(GetParam(), noise(5000, 2));
  auto out = codecs::decompress(GetParam(), std::string_view(packed).substr(0, packed.size() / 2),
                                1u << 20);
  EXPECT_FALSE(out.complete);
}

INSTANTIATE_TEST_SUITE_P(All, CodecRoundTrip,
                         ::testing::Values(codecs::Codec::kGzip, codecs::Codec::kZlib,
                                           codecs::Codec::kRawDeflate, codecs::Codec::kBzip2,
                                           codecs::Codec::kLz4Frame, codecs::Codec::kLzmaAlone,
                                           codecs::Codec::kXz));

TEST(Codecs, Crc32KnownValue) {
  EXPECT_EQ(codecs::crc32("123456789"), 0xCBF43926u);
  EXPECT_EQ(codecs::crc32(""), 0u);
}

TEST(Archive, ZipWriterListing) {
  ps::archive::ZipWriter w;
  w.add("a.pkl", kPickle, true);
  w.add("dir/b.bin", "hello", false);
  auto zip = w.finish();
  std::span bytes(reinterpret_cast<const std::uint8_t*>(zip.data()), zip.size());
  auto listing = ps::archive::list_zip(bytes);
  ASSERT_EQ(listing.entries.size(), 2u);
  EXPECT_TRUE(listing.warnings.empty());
  EXPECT_EQ(listing.entries[0].name, "a.pkl");
  EXPECT_EQ(listing.entries[0].method, 8);
  EXPECT_EQ(listing.entries[1].method, 0);
  EXPECT_EQ(ps::archive::read_zip_entry(bytes, listing.entries[0], 1 << 20).data, kPickle);
  EXPECT_EQ(ps::archive::read_zip_entry(bytes, listing.entries[1], 1 << 20).data, "hello");
}

TEST(Archive, ZipWithoutCentralDirectoryFallsBack) {
  ps::archive::ZipWriter w;
  w.add("a.pkl", kPickle, false);
  auto zip = w.finish();
  zip.resize(zip.find("PK\x01\x02"));
  std::span bytes(reinterpret_cast<const std::uint8_t*>(zip.data()), zip.size());
  auto listing = ps::archive::list_zip(bytes);
  ASSERT_EQ(listing.entries.size(), 1u);
  EXPECT_FALSE(listing.warnings.empty());
  EXPECT_EQ(ps::archive::read_zip_entry(bytes, listing.entries[0], 1 << 20).data, kPickle);
}

TEST(Archive, TarWriterListing) {
  ps::archive::TarWriter w;
  w.add("x.pkl", kPickle);
  w.add("y.txt", std::string(1000, 'y'));
  auto tar = w.finish();
  EXPECT_EQ(tar.size() % 512, 0u);
  std::span bytes(reinterpret_cast<const std::uint8_t*>(tar.data()), tar.size());
  auto listing = ps::archive::list_tar(bytes);
  ASSERT_EQ(listing.entries.size(), 2u);
  EXPECT_EQ(listing.entries[1].name, "y.txt");
  EXPECT_EQ(listing.entries[1].size, 1000u);
  EXPECT_EQ(tar.substr(listing.entries[0].data_offset, kPickle.size()), kPickle);
}

TEST(Unwrap, SniffMagic) {
  EXPECT_EQ(ps::sniff(kPickle), ps::ContainerKind::kRaw);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kGzip, kPickle)), ps::ContainerKind::kGzip);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kBzip2, kPickle)), ps::ContainerKind::kBz2);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kXz, kPickle)), ps::ContainerKind::kXz);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kLz4Frame, kPickle)),
            ps::ContainerKind::kLz4Frame);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kZlib, kPickle)), ps::ContainerKind::kZlib);
  EXPECT_EQ(ps::sniff(codecs::compress(codecs::Codec::kLzmaAlone, kPickle)),
            ps::ContainerKind::kLzmaAlone);
  try {
    ps::sniff("N."s);
    FAIL();
  } catch (const ps::Error& e) {
    EXPECT_EQ(e.code(), ps::ErrorCode::kInputTooShort);
  }
}

TEST(Unwrap, KindNamesRoundTrip) {
  for (auto k : {ps::ContainerKind::kRaw, ps::ContainerKind::kZip, ps::ContainerKind::kTar,
                 ps::ContainerKind::kGzip, ps::ContainerKind::kBz2, ps::ContainerKind::kZlib,
                 ps::ContainerKind::kLz4Frame, ps::ContainerKind::kLzmaAlone,
                 ps::ContainerKind::kXz, ps::ContainerKind::kPytorchZip}) {
    EXPECT_EQ(ps::parse_container_kind(ps::to_string(k)), k);
  }
}

TEST(Unwrap, EmptyInputThrows) {
  EXPECT_THROW(ps::unwrap(std::string_view{}), ps::Error);
}

// Every loading path yields exactly the original bytes, with the expected
// outermost container.
TEST(Unwrap, AllWrapPathsRecoverPayload) {
  const std::vector<std::pair<std::string, ps::ContainerKind>> expected = {
      {"pkl", ps::ContainerKind::kRaw},         {"zip", ps::ContainerKind::kZip},
      {"zip>zip", ps::ContainerKind::kZip},     {"tar", ps::ContainerKind::kTar},
      {"bz2", ps::ContainerKind::kBz2},         {"gz", ps::ContainerKind::kGzip},
      {"zlib", ps::ContainerKind::kZlib},       {"lz4", ps::ContainerKind::kLz4Frame},
      {"lzma", ps::ContainerKind::kLzmaAlone},  {"xz", ps::ContainerKind::kXz}};
  ASSERT_EQ(ps::corpus::wrap_paths().size(), expected.size());
  for (const auto& [path, kind] : expected) {
    auto [bytes, ext] = ps::corpus::wrap(path, kPickle, "payload.pkl");
    auto r = ps::unwrap(bytes);
    ASSERT_EQ(r.candidates.size(), 1u) << path;
    EXPECT_EQ(*r.candidates[0].bytes, kPickle) << path;
    EXPECT_EQ(r.root.container_kind, kind) << path;
    EXPECT_TRUE(r.issues().empty()) << path;
    if (path == "zip>zip") {
      ASSERT_EQ(r.candidates[0].origin_chain.size(), 2u);
      EXPECT_EQ(ps::format_origin_chain(r.candidates[0].origin_chain),
                "zip:inner.zip > zip:payload.pkl");
    }
  }
}

TEST(Unwrap, PytorchZipOnlyLoadsPickleMembers) {
  ps::archive::ZipWriter w;
  w.add("archive/data.pkl", kPickle, false);
  w.add("archive/data/0", "\x80garbage-tensor-bytes"s, false);
  w.add("archive/version", "3\n", false);
  auto r = ps::unwrap(w.finish());
  EXPECT_EQ(r.root.container_kind, ps::ContainerKind::kPytorchZip);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].origin_chain[0].entry_path, "archive/data.pkl");
}

TEST(Unwrap, PrefixedZipKeepsBothParts) {
  ps::archive::ZipWriter w;
  w.add("hidden.pkl", kPickle, true);
  auto polyglot = "N."s + w.finish();
  auto r = ps::unwrap(polyglot);
  EXPECT_EQ(r.candidates.size(), 2u);
}

TEST(Unwrap, DepthLimit) {
  std::string data = kPickle;
  for (int i = 0; i < 5; ++i) data = codecs::compress(codecs::Codec::kGzip, data);
  ps::UnwrapLimits limits;
  limits.max_depth = 3;
  auto r = ps::unwrap(data, limits);
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_TRUE(r.hit_limit());
  ASSERT_FALSE(r.issues().empty());
  EXPECT_EQ(r.issues()[0].code, ps::ErrorCode::kDepthExceeded);

  limits.max_depth = 5;
  EXPECT_EQ(ps::unwrap(data, limits).candidates.size(), 1u);
}

TEST(Unwrap, InflationBomb) {
  // Nested gzip reaches a ratio no single deflate stream can.
  auto bomb = codecs::compress(codecs::Codec::kGzip,
                               codecs::compress(codecs::Codec::kGzip, std::string(64u << 20, '\0')));
  ps::UnwrapLimits limits;
  limits.max_inflated_bytes = 8u << 20;
  auto r = ps::unwrap(bomb, limits);
  EXPECT_TRUE(r.candidates.empty());
  ASSERT_FALSE(r.issues().empty());
  EXPECT_EQ(r.issues()[0].code, ps::ErrorCode::kInflationBombSuspected);
}

TEST(Unwrap, EntryLimit) {
  ps::archive::TarWriter w;
  for (int i = 0; i < 20; ++i) w.add("f" + std::to_string(i) + ".pkl", kPickle);
  ps::UnwrapLimits limits;
  limits.max_entries = 5;
  auto r = ps::unwrap(w.finish(), limits);
  EXPECT_EQ(r.candidates.size(), 5u);
  EXPECT_TRUE(r.hit_limit());
}

TEST(Unwrap, CorruptGzipReportsIssue) {
  auto gz = codecs::compress(codecs::Codec::kGzip, noise(10000, 5));
  gz.resize(gz.size() / 2);
  auto r = ps::unwrap(gz);
  ASSERT_FALSE(r.issues().empty());
  EXPECT_EQ(r.issues()[0].code, ps::ErrorCode::kCorruptContainer);
  EXPECT_FALSE(r.hit_limit());
}

TEST(Unwrap, NonPickleMembersAreSkipped) {
  ps::archive::ZipWriter w;
  w.add("readme.txt", "# hello world", true);
  w.add("weights.pkl", kPickle, true);
  auto r = ps::unwrap(w.finish());
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].origin_chain[0].entry_path, "weights.pkl");
}

TEST(Unwrap, RandomBytesNeverThrow) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    auto data = noise(1 + rng() % 4000, rng());
    if (i % 3 == 0) data.replace(0, 2, "\x1f\x8b");
    if (i % 3 == 1) data = "PK\x03\x04" + data;
    EXPECT_NO_THROW(ps::unwrap(data));
  }
}
