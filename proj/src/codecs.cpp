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

#include "pickle_sentry/codecs.hpp"

#include <bzlib.h>
#include <lz4frame.h>
#include <lzma.h>
#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>

#include "pickle_sentry/error.hpp"

// Required by bzip2 when built without stdio support. Only reached on
// internal assertion failures, never on malformed input.
extern "C" void bz_internal_error(int) { std::abort(); }

namespace pickle_sentry::codecs {
namespace {

constexpr std::size_t kChunk = 64 * 1024;

// Grows `out` by up to one chunk, honoring the cap. Returns the writable
// region, empty when the cap is reached.
std::span<std::uint8_t> grow(std::string& out, std::size_t& used,
                             std::uint64_t max_output) {
  const std::uint64_t room = max_output > used ? max_output - used : 0;
  // One extra byte lets us detect output beyond the cap.
  const std::size_t want =
      static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, room + 1));
  out.resize(used + want);
  return {reinterpret_cast<std::uint8_t*>(out.data()) + used, want};
}

void finish(DecodeResult& result, std::size_t used, std::uint64_t max_output) {
  if (used > max_output) {
    result.limit_hit = true;
    result.complete = false;
    used = static_cast<std::size_t>(max_output);
  }
  result.data.resize(used);
}

DecodeResult inflate_stream(std::span<const std::uint8_t> input,
                            std::uint64_t max_output, int window_bits,
                            bool multi_member) {
  DecodeResult result;
  z_stream zs{};
  if (inflateInit2(&zs, window_bits) != Z_OK) {
    result.error = "inflateInit2 failed";
    return result;
  }
  std::unique_ptr<z_stream, int (*)(z_stream*)> guard(&zs, inflateEnd);
  std::size_t used = 0;
  std::size_t consumed = 0;
  const auto total = input.size();
  while (true) {
    const std::size_t avail =
        std::min<std::size_t>(total - consumed, std::numeric_limits<uInt>::max());
    zs.next_in = const_cast<Bytef*>(input.data() + consumed);
    zs.avail_in = static_cast<uInt>(avail);
    auto window = grow(result.data, used, max_output);
    zs.next_out = window.data();
    zs.avail_out = static_cast<uInt>(window.size());
    const int rc = inflate(&zs, Z_NO_FLUSH);
    consumed += avail - zs.avail_in;
    used += window.size() - zs.avail_out;
    if (used > max_output) break;
    if (rc == Z_STREAM_END) {
      result.complete = true;
      if (multi_member && total - consumed >= 2 && input[consumed] == 0x1f &&
          input[consumed + 1] == 0x8b) {
        inflateReset(&zs);
        result.complete = false;
        continue;
      }
      break;
    }
    if (rc == Z_BUF_ERROR && zs.avail_in == 0 && consumed == total) {
      result.error = "unexpected end of stream";
      break;
    }
    if (rc != Z_OK && rc != Z_BUF_ERROR) {
      result.error = zs.msg ? zs.msg : "inflate failed";
      break;
    }
  }
  finish(result, used, max_output);
  return result;
}

DecodeResult bunzip(std::span<const std::uint8_t> input, std::uint64_t max_output) {
  DecodeResult result;
  std::size_t used = 0;
  std::size_t consumed = 0;
  while (true) {
    bz_stream bs{};
    if (BZ2_bzDecompressInit(&bs, 0, 0) != BZ_OK) {
      result.error = "BZ2_bzDecompressInit failed";
      break;
    }
    std::unique_ptr<bz_stream, int (*)(bz_stream*)> guard(&bs, BZ2_bzDecompressEnd);
    bool stream_end = false;
    while (true) {
      const std::size_t avail = std::min<std::size_t>(
          input.size() - consumed, std::numeric_limits<unsigned>::max());
      bs.next_in = reinterpret_cast<char*>(const_cast<std::uint8_t*>(input.data() + consumed));
      bs.avail_in = static_cast<unsigned>(avail);
      auto window = grow(result.data, used, max_output);
      bs.next_out = reinterpret_cast<char*>(window.data());
      bs.avail_out = static_cast<unsigned>(window.size());
      const int rc = BZ2_bzDecompress(&bs);
      consumed += avail - bs.avail_in;
      used += window.size() - bs.avail_out;
      if (used > max_output) break;
      if (rc == BZ_STREAM_END) {
        stream_end = true;
        break;
      }
      if (rc != BZ_OK) {
        result.error = "bzip2 data error";
        break;
      }
      if (bs.avail_in == 0 && consumed == input.size() && bs.avail_out > 0) {
        result.error = "unexpected end of stream";
        break;
      }
    }
    if (!stream_end || used > max_output) break;
    result.complete = true;
    // Concatenated streams, as written by parallel compressors.
    if (input.size() - consumed >= 4 && std::memcmp(input.data() + consumed, "BZh", 3) == 0) {
      result.complete = false;
      continue;
    }
    break;
  }
  finish(result, used, max_output);
  return result;
}

DecodeResult run_lzma(lzma_stream& ls, std::span<const std::uint8_t> input,
                      std::uint64_t max_output) {
  DecodeResult result;
  std::unique_ptr<lzma_stream, void (*)(lzma_stream*)> guard(&ls, lzma_end);
  std::size_t used = 0;
  ls.next_in = input.data();
  ls.avail_in = input.size();
  while (true) {
    auto window = grow(result.data, used, max_output);
    ls.next_out = window.data();
    ls.avail_out = window.size();
    const lzma_ret rc = lzma_code(&ls, LZMA_FINISH);
    used += window.size() - ls.avail_out;
    if (used > max_output) break;
    if (rc == LZMA_STREAM_END) {
      result.complete = true;
      break;
    }
    if (rc != LZMA_OK) {
      result.error = rc == LZMA_BUF_ERROR ? "unexpected end of stream"
                                          : "lzma data error";
      break;
    }
  }
  finish(result, used, max_output);
  return result;
}

DecodeResult unxz(std::span<const std::uint8_t> input, std::uint64_t max_output,
                  bool alone) {
  lzma_stream ls = LZMA_STREAM_INIT;
  const lzma_ret rc =
      alone ? lzma_alone_decoder(&ls, std::numeric_limits<std::uint64_t>::max())
            : lzma_stream_decoder(&ls, std::numeric_limits<std::uint64_t>::max(),
                                  LZMA_CONCATENATED);
  if (rc != LZMA_OK) {
    DecodeResult result;
    result.error = "lzma decoder init failed";
    return result;
  }
  return run_lzma(ls, input, max_output);
}

DecodeResult unzip_lzma(std::span<const std::uint8_t> input, std::uint64_t max_output) {
  DecodeResult result;
  // 2 bytes version, 2 bytes properties length, then LZMA1 properties.
  if (input.size() < 4) {
    result.error = "truncated zip lzma header";
    return result;
  }
  const std::size_t props_len = input[2] | (input[3] << 8);
  if (input.size() < 4 + props_len) {
    result.error = "truncated zip lzma properties";
    return result;
  }
  lzma_filter filters[2];
  filters[0].id = LZMA_FILTER_LZMA1;
  filters[0].options = nullptr;
  filters[1].id = LZMA_VLI_UNKNOWN;
  if (lzma_properties_decode(&filters[0], nullptr, input.data() + 4, props_len) != LZMA_OK) {
    result.error = "bad zip lzma properties";
    return result;
  }
  lzma_stream ls = LZMA_STREAM_INIT;
  const lzma_ret rc = lzma_raw_decoder(&ls, filters);
  std::free(filters[0].options);
  if (rc != LZMA_OK) {
    result.error = "lzma raw decoder init failed";
    return result;
  }
  result = run_lzma(ls, input.subspan(4 + props_len), max_output);
  // Raw LZMA1 without an end marker ends with a buffer error once input is
  // exhausted; that is a normal end for this framing.
  if (!result.complete && !result.limit_hit && result.error == "unexpected end of stream") {
    result.error.clear();
    result.complete = true;
  }
  return result;
}

DecodeResult unlz4(std::span<const std::uint8_t> input, std::uint64_t max_output) {
  DecodeResult result;
  LZ4F_dctx* ctx = nullptr;
  if (LZ4F_isError(LZ4F_createDecompressionContext(&ctx, LZ4F_VERSION))) {
    result.error = "lz4 context init failed";
    return result;
  }
  std::unique_ptr<LZ4F_dctx, LZ4F_errorCode_t (*)(LZ4F_dctx*)> guard(
      ctx, LZ4F_freeDecompressionContext);
  std::size_t used = 0;
  std::size_t consumed = 0;
  while (consumed < input.size()) {
    auto window = grow(result.data, used, max_output);
    std::size_t out_size = window.size();
    std::size_t in_size = input.size() - consumed;
    const std::size_t hint = LZ4F_decompress(ctx, window.data(), &out_size,
                                             input.data() + consumed, &in_size,
                                             nullptr);
    consumed += in_size;
    used += out_size;
    if (used > max_output) break;
    if (LZ4F_isError(hint)) {
      result.error = LZ4F_getErrorName(hint);
      result.complete = false;
      break;
    }
    if (hint == 0) {
      result.complete = true;
      // Another frame may follow.
      if (input.size() - consumed < 4) break;
      static constexpr std::uint8_t kMagic[4] = {0x04, 0x22, 0x4d, 0x18};
      if (std::memcmp(input.data() + consumed, kMagic, 4) != 0) break;
      result.complete = false;
      continue;
    }
    result.complete = false;
    if (in_size == 0 && out_size == 0) {
      result.error = "unexpected end of stream";
      break;
    }
  }
  if (!result.complete && result.error.empty() && used <= max_output) {
    result.error = "unexpected end of stream";
  }
  finish(result, used, max_output);
  return result;
}

std::string deflate_stream(std::string_view input, int window_bits) {
  z_stream zs{};
  if (deflateInit2(&zs, 9, Z_DEFLATED, window_bits, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::kInvalidArgument, "deflateInit2 failed");
  }
  std::unique_ptr<z_stream, int (*)(z_stream*)> guard(&zs, deflateEnd);
  std::string out(deflateBound(&zs, input.size()) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(input.data()));
  zs.avail_in = static_cast<uInt>(input.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
    throw Error(ErrorCode::kInvalidArgument, "deflate did not finish");
  }
  out.resize(zs.total_out);
  return out;
}

std::string encode_lzma(lzma_stream& ls, std::string_view input) {
  std::unique_ptr<lzma_stream, void (*)(lzma_stream*)> guard(&ls, lzma_end);
  std::string out;
  std::size_t used = 0;
  ls.next_in = reinterpret_cast<const std::uint8_t*>(input.data());
  ls.avail_in = input.size();
  while (true) {
    out.resize(used + kChunk);
    ls.next_out = reinterpret_cast<std::uint8_t*>(out.data()) + used;
    ls.avail_out = kChunk;
    const lzma_ret rc = lzma_code(&ls, LZMA_FINISH);
    used += kChunk - ls.avail_out;
    if (rc == LZMA_STREAM_END) break;
    if (rc != LZMA_OK) throw Error(ErrorCode::kInvalidArgument, "lzma encode failed");
  }
  out.resize(used);
  return out;
}

}  // namespace

DecodeResult decompress(Codec codec, std::span<const std::uint8_t> input,
                        std::uint64_t max_output) {
  switch (codec) {
    case Codec::kGzip: return inflate_stream(input, max_output, 16 + MAX_WBITS, true);
    case Codec::kZlib: return inflate_stream(input, max_output, MAX_WBITS, false);
    case Codec::kRawDeflate: return inflate_stream(input, max_output, -MAX_WBITS, false);
    case Codec::kBzip2: return bunzip(input, max_output);
    case Codec::kLz4Frame: return unlz4(input, max_output);
    case Codec::kLzmaAlone: return unxz(input, max_output, true);
    case Codec::kXz: return unxz(input, max_output, false);
    case Codec::kZipLzma: return unzip_lzma(input, max_output);
  }
  return {};
}

std::string compress(Codec codec, std::string_view input) {
  switch (codec) {
    case Codec::kGzip: return deflate_stream(input, 16 + MAX_WBITS);
    case Codec::kZlib: return deflate_stream(input, MAX_WBITS);
    case Codec::kRawDeflate: return deflate_stream(input, -MAX_WBITS);
    case Codec::kBzip2: {
      auto bound = static_cast<unsigned>(input.size() + input.size() / 100 + 600);
      std::string out(bound, '\0');
      const int rc = BZ2_bzBuffToBuffCompress(
          out.data(), &bound, const_cast<char*>(input.data()),
          static_cast<unsigned>(input.size()), 9, 0, 0);
      if (rc != BZ_OK) throw Error(ErrorCode::kInvalidArgument, "bzip2 compress failed");
      out.resize(bound);
      return out;
    }
    case Codec::kLz4Frame: {
      LZ4F_preferences_t prefs{};
      prefs.frameInfo.contentChecksumFlag = LZ4F_contentChecksumEnabled;
      std::string out(LZ4F_compressFrameBound(input.size(), &prefs), '\0');
      const std::size_t n = LZ4F_compressFrame(out.data(), out.size(), input.data(),
                                               input.size(), &prefs);
      if (LZ4F_isError(n)) throw Error(ErrorCode::kInvalidArgument, LZ4F_getErrorName(n));
      out.resize(n);
      return out;
    }
    case Codec::kLzmaAlone: {
      lzma_options_lzma options;
      lzma_lzma_preset(&options, 6);
      lzma_stream ls = LZMA_STREAM_INIT;
      if (lzma_alone_encoder(&ls, &options) != LZMA_OK) {
        throw Error(ErrorCode::kInvalidArgument, "lzma_alone_encoder failed");
      }
      return encode_lzma(ls, input);
    }
    case Codec::kXz: {
      lzma_stream ls = LZMA_STREAM_INIT;
      if (lzma_easy_encoder(&ls, 6, LZMA_CHECK_CRC64) != LZMA_OK) {
        throw Error(ErrorCode::kInvalidArgument, "lzma_easy_encoder failed");
      }
      return encode_lzma(ls, input);
    }
    case Codec::kZipLzma:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "codec has no encoder");
}

std::uint32_t crc32(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = static_cast<uInt>(
        std::min<std::size_t>(data.size() - done, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data() + done), n);
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace pickle_sentry::codecs
