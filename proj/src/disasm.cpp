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

#include "pickle_sentry/disasm.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <limits>

#include "pickle_sentry/error.hpp"
#include "pickle_sentry/pyrepr.hpp"

namespace pickle_sentry {
namespace {

// Two's-complement payloads above this many bytes are rendered in hex.
constexpr std::size_t kMaxDecimalLongBytes = 2048;

class DecodeFailure {
 public:
  explicit DecodeFailure(MalformReason reason) : reason_(reason) {}
  MalformReason reason() const { return reason_; }

 private:
  MalformReason reason_;
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Python int() on base-10 text: whitespace, sign, digits with single
// underscores between digits.
OpcodeArg parse_python_int(std::string_view text) {
  std::string_view s = strip(text);
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) throw DecodeFailure(MalformReason::kBadArgument);
  std::string digits;
  digits.reserve(s.size());
  bool prev_digit = false;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      digits += c;
      prev_digit = true;
    } else if (c == '_' && prev_digit) {
      prev_digit = false;
    } else {
      throw DecodeFailure(MalformReason::kBadArgument);
    }
  }
  if (!prev_digit) throw DecodeFailure(MalformReason::kBadArgument);
  const auto first = digits.find_first_not_of('0');
  digits = first == std::string::npos ? "0" : digits.substr(first);
  if (digits == "0") negative = false;

  std::int64_t value = 0;
  std::uint64_t magnitude = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(),
                                   magnitude);
  if (res.ec == std::errc() && res.ptr == digits.data() + digits.size()) {
    constexpr auto kMax =
        static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (!negative && magnitude <= kMax) {
      value = static_cast<std::int64_t>(magnitude);
      return value;
    }
    if (negative && magnitude <= kMax + 1) {
      value = static_cast<std::int64_t>(0 - magnitude);
      return value;
    }
  }
  return BigInt{(negative ? "-" : "") + digits};
}

double parse_python_float(std::string_view text) {
  std::string_view s = strip(text);
  std::string cleaned;
  cleaned.reserve(s.size());
  bool prev_digit = false;
  for (char c : s) {
    if (c == '_') {
      if (!prev_digit) throw DecodeFailure(MalformReason::kBadArgument);
      prev_digit = false;
      continue;
    }
    prev_digit = c >= '0' && c <= '9';
    cleaned += c;
  }
  std::string_view body = cleaned;
  bool negative = false;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body.empty() || body.front() == '+' || body.front() == '-') {
    throw DecodeFailure(MalformReason::kBadArgument);
  }
  double value = 0.0;
  const auto res = std::from_chars(body.data(), body.data() + body.size(), value);
  if (res.ec == std::errc::result_out_of_range) {
    // from_chars reports overflow/underflow; Python rounds to inf / 0.
    bool has_neg_exp = false;
    if (auto e = body.find_first_of("eE"); e != std::string_view::npos) {
      has_neg_exp = e + 1 < body.size() && body[e + 1] == '-';
    }
    value = has_neg_exp ? 0.0 : std::numeric_limits<double>::infinity();
  } else if (res.ec != std::errc() || res.ptr != body.data() + body.size()) {
    throw DecodeFailure(MalformReason::kBadArgument);
  }
  return negative ? -value : value;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Python bytes escape decoding (codecs.escape_decode).
std::string escape_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw DecodeFailure(MalformReason::kBadArgument);
    const char c = s[i];
    switch (c) {
      case '\n': break;
      case '\\': out += '\\'; break;
      case '\'': out += '\''; break;
      case '"': out += '"'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 't': out += '\t'; break;
      case 'v': out += '\v'; break;
      case 'x': {
        const int hi = i + 1 < s.size() ? hex_value(s[i + 1]) : -1;
        const int lo = i + 2 < s.size() ? hex_value(s[i + 2]) : -1;
        if (hi < 0 || lo < 0) throw DecodeFailure(MalformReason::kBadArgument);
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        break;
      }
      default:
        if (c >= '0' && c <= '7') {
          int value = c - '0';
          for (int k = 0; k < 2 && i + 1 < s.size() && s[i + 1] >= '0' &&
                          s[i + 1] <= '7';
               ++k) {
            value = value * 8 + (s[++i] - '0');
          }
          out += static_cast<char>(value & 0xff);
        } else {
          out += '\\';
          out += c;
        }
    }
  }
  return out;
}

// Python "raw-unicode-escape" decoding into UTF-8.
std::string raw_unicode_escape_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '\\') {
      append_utf8(out, static_cast<unsigned char>(s[i]));
      ++i;
      continue;
    }
    std::size_t run = 0;
    while (i + run < s.size() && s[i + run] == '\\') ++run;
    const std::size_t after = i + run;
    const bool escape = (run & 1) == 1 && after < s.size() &&
                        (s[after] == 'u' || s[after] == 'U');
    const std::size_t literal = escape ? run - 1 : run;
    out.append(literal, '\\');
    i += literal;
    if (!escape) continue;
    const int width = s[after] == 'u' ? 4 : 8;
    if (after + static_cast<std::size_t>(width) >= s.size()) {
      throw DecodeFailure(MalformReason::kBadArgument);
    }
    std::uint32_t cp = 0;
    for (int k = 1; k <= width; ++k) {
      const int h = hex_value(s[after + k]);
      if (h < 0) throw DecodeFailure(MalformReason::kBadArgument);
      cp = cp * 16 + static_cast<std::uint32_t>(h);
    }
    if (cp > 0x10ffff) throw DecodeFailure(MalformReason::kBadArgument);
    append_utf8(out, cp);
    i = after + 1 + width;
  }
  return out;
}

// Little-endian two's complement to a Python int.
OpcodeArg decode_long(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return std::int64_t{0};
  if (bytes.size() <= 8) {
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      raw |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    if (bytes.size() < 8 && (bytes.back() & 0x80)) {
      raw |= ~std::uint64_t{0} << (8 * bytes.size());
    }
    return static_cast<std::int64_t>(raw);
  }
  const bool negative = (bytes.back() & 0x80) != 0;
  std::vector<std::uint8_t> mag(bytes.begin(), bytes.end());
  if (negative) {
    unsigned carry = 1;
    for (auto& b : mag) {
      const unsigned v = static_cast<std::uint8_t>(~b) + carry;
      b = static_cast<std::uint8_t>(v);
      carry = v >> 8;
    }
  }
  while (!mag.empty() && mag.back() == 0) mag.pop_back();
  if (mag.size() <= 8) {
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
      raw |= static_cast<std::uint64_t>(mag[i]) << (8 * i);
    }
    constexpr auto kMax =
        static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (!negative && raw <= kMax) return static_cast<std::int64_t>(raw);
    if (negative && raw <= kMax + 1) return static_cast<std::int64_t>(0 - raw);
    return BigInt{(negative ? "-" : "") + std::to_string(raw)};
  }
  std::string literal = negative ? "-" : "";
  if (mag.size() > kMaxDecimalLongBytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    literal += "0x";
    bool leading = true;
    for (auto it = mag.rbegin(); it != mag.rend(); ++it) {
      const char hi = kHex[*it >> 4], lo = kHex[*it & 0xf];
      if (!(leading && hi == '0')) literal += hi;
      literal += lo;
      leading = false;
    }
    return BigInt{std::move(literal)};
  }
  // Repeated division by 1e9 over 32-bit limbs (little-endian).
  std::vector<std::uint32_t> limbs((mag.size() + 3) / 4, 0);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    limbs[i / 4] |= static_cast<std::uint32_t>(mag[i]) << (8 * (i % 4));
  }
  std::vector<std::uint32_t> chunks;
  while (!limbs.empty()) {
    std::uint64_t rem = 0;
    for (auto it = limbs.rbegin(); it != limbs.rend(); ++it) {
      const std::uint64_t cur = (rem << 32) | *it;
      *it = static_cast<std::uint32_t>(cur / 1000000000u);
      rem = cur % 1000000000u;
    }
    chunks.push_back(static_cast<std::uint32_t>(rem));
    while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  }
  literal += std::to_string(chunks.back());
  for (auto it = chunks.rbegin() + 1; it != chunks.rend(); ++it) {
    const std::string part = std::to_string(*it);
    literal.append(9 - part.size(), '0');
    literal += part;
  }
  return BigInt{std::move(literal)};
}

class Decoder {
 public:
  Decoder(std::span<const std::uint8_t> input, std::size_t pos)
      : input_(input), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= input_.size(); }
  std::size_t remaining() const { return input_.size() - pos_; }

  std::uint8_t byte() { return input_[pos_++]; }

  std::span<const std::uint8_t> take(std::uint64_t n) {
    if (n > remaining()) throw DecodeFailure(MalformReason::kTruncated);
    auto out = input_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }

  std::uint64_t uint_le(int width) {
    const auto bytes = take(static_cast<std::uint64_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)])
           << (8 * i);
    }
    return v;
  }

  std::int32_t int4() {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(uint_le(4)));
  }

  // Line without its trailing newline.
  std::string_view line() {
    const auto* begin = input_.data() + pos_;
    const auto* nl = static_cast<const std::uint8_t*>(
        std::memchr(begin, '\n', remaining()));
    if (nl == nullptr) throw DecodeFailure(MalformReason::kTruncated);
    const auto len = static_cast<std::size_t>(nl - begin);
    pos_ += len + 1;
    return {reinterpret_cast<const char*>(begin), len};
  }

  // Length-prefixed payload; `make` builds the argument from the bytes.
  template <typename Make>
  OpcodeArg payload(std::uint64_t length, Make make) {
    if (length > remaining()) throw DecodeFailure(MalformReason::kTruncated);
    if (length > kMaxBufferedArgument) {
      pos_ += static_cast<std::size_t>(length);
      return SkippedPayload{length};
    }
    const auto bytes = take(length);
    return make(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                 bytes.size()));
  }

 private:
  std::span<const std::uint8_t> input_;
  std::size_t pos_;
};

OpcodeArg as_uint(std::uint64_t v) {
  if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    return BigInt{std::to_string(v)};
  }
  return static_cast<std::int64_t>(v);
}

OpcodeArg decode_arg(ArgCodec codec, Decoder& in) {
  const auto bytes_arg = [](std::string_view b) -> OpcodeArg {
    return ByteString{std::string(b)};
  };
  const auto text_arg = [](std::string_view b) -> OpcodeArg {
    return Text{std::string(b)};
  };
  const auto latin1_arg = [](std::string_view b) -> OpcodeArg {
    return Text{latin1_to_utf8(b)};
  };
  switch (codec) {
    case ArgCodec::kNone:
      return std::monostate{};
    case ArgCodec::kDecimalIntNewline: {
      const auto line = in.line();
      if (line == "00") return false;
      if (line == "01") return true;
      return parse_python_int(line);
    }
    case ArgCodec::kDecimalLongNewline: {
      auto line = in.line();
      if (!line.empty() && line.back() == 'L') line.remove_suffix(1);
      return parse_python_int(line);
    }
    case ArgCodec::kFloatNewline:
      return parse_python_float(in.line());
    case ArgCodec::kQuotedStringNewline: {
      auto line = in.line();
      if (line.size() < 2 || (line.front() != '\'' && line.front() != '"') ||
          line.back() != line.front()) {
        throw DecodeFailure(MalformReason::kBadArgument);
      }
      line = line.substr(1, line.size() - 2);
      return Text{latin1_to_utf8(escape_decode(line))};
    }
    case ArgCodec::kRawLine:
      return Text{std::string(in.line())};
    case ArgCodec::kRawLinePair: {
      std::string_view module = in.line();
      std::string_view name = in.line();
      return ImportPair{std::string(module), std::string(name)};
    }
    case ArgCodec::kUnicodeNewline:
      return Text{raw_unicode_escape_decode(in.line())};
    case ArgCodec::kUint1:
      return static_cast<std::int64_t>(in.uint_le(1));
    case ArgCodec::kUint2:
      return static_cast<std::int64_t>(in.uint_le(2));
    case ArgCodec::kUint4:
      return static_cast<std::int64_t>(in.uint_le(4));
    case ArgCodec::kUint8:
      return as_uint(in.uint_le(8));
    case ArgCodec::kInt4:
      return static_cast<std::int64_t>(in.int4());
    case ArgCodec::kFloat8BigEndian: {
      const auto raw = in.take(8);
      std::uint64_t bits = 0;
      for (auto b : raw) bits = (bits << 8) | b;
      return std::bit_cast<double>(bits);
    }
    case ArgCodec::kString1:
      return in.payload(in.uint_le(1), latin1_arg);
    case ArgCodec::kString4: {
      const auto n = in.int4();
      if (n < 0) throw DecodeFailure(MalformReason::kBadArgument);
      return in.payload(static_cast<std::uint64_t>(n), latin1_arg);
    }
    case ArgCodec::kBytes1:
      return in.payload(in.uint_le(1), bytes_arg);
    case ArgCodec::kBytes4:
      return in.payload(in.uint_le(4), bytes_arg);
    case ArgCodec::kBytes8:
    case ArgCodec::kBytearray8:
      return in.payload(in.uint_le(8), bytes_arg);
    case ArgCodec::kUnicode1:
      return in.payload(in.uint_le(1), text_arg);
    case ArgCodec::kUnicode4:
      return in.payload(in.uint_le(4), text_arg);
    case ArgCodec::kUnicode8:
      return in.payload(in.uint_le(8), text_arg);
    case ArgCodec::kLong1: {
      const auto n = in.uint_le(1);
      return decode_long(in.take(n));
    }
    case ArgCodec::kLong4: {
      const auto n = in.int4();
      if (n < 0) throw DecodeFailure(MalformReason::kBadArgument);
      if (static_cast<std::uint64_t>(n) > kMaxBufferedArgument) {
        return in.payload(static_cast<std::uint64_t>(n),
                          [](std::string_view) -> OpcodeArg { return {}; });
      }
      return decode_long(in.take(static_cast<std::uint64_t>(n)));
    }
  }
  throw DecodeFailure(MalformReason::kBadArgument);
}

// Advances past an argument without building it, with the same checks as
// decode_arg. Returns the value of one-byte unsigned arguments (PROTO needs
// it), 0 otherwise.
std::int64_t skip_arg(ArgCodec codec, Decoder& in) {
  const auto skip_signed = [&in] {
    const auto n = in.int4();
    if (n < 0) throw DecodeFailure(MalformReason::kBadArgument);
    in.take(static_cast<std::uint64_t>(n));
  };
  switch (codec) {
    case ArgCodec::kNone:
      return 0;
    case ArgCodec::kUint1:
      return static_cast<std::int64_t>(in.uint_le(1));
    case ArgCodec::kUint2:
      in.take(2);
      return 0;
    case ArgCodec::kUint4:
    case ArgCodec::kInt4:
      in.take(4);
      return 0;
    case ArgCodec::kUint8:
    case ArgCodec::kFloat8BigEndian:
      in.take(8);
      return 0;
    case ArgCodec::kString1:
    case ArgCodec::kBytes1:
    case ArgCodec::kUnicode1:
    case ArgCodec::kLong1:
      in.take(in.uint_le(1));
      return 0;
    case ArgCodec::kBytes4:
    case ArgCodec::kUnicode4:
      in.take(in.uint_le(4));
      return 0;
    case ArgCodec::kBytes8:
    case ArgCodec::kBytearray8:
    case ArgCodec::kUnicode8:
      in.take(in.uint_le(8));
      return 0;
    case ArgCodec::kString4:
    case ArgCodec::kLong4:
      skip_signed();
      return 0;
    default:
      // Newline-terminated forms need parsing to be validated.
      decode_arg(codec, in);
      return 0;
  }
}

using Counts = std::array<std::uint64_t, kVocabularySize>;

struct ByteInfo {
  const OpcodeDescriptor* desc = nullptr;
  std::size_t index = 0;
};

// Descriptor and vocabulary index for every byte value; null when the byte
// is not an opcode.
const std::array<ByteInfo, 256>& byte_table() {
  static const auto table = [] {
    std::array<ByteInfo, 256> t{};
    const auto vocab = opcode_vocabulary();
    for (std::size_t i = 0; i < vocab.size(); ++i) t[vocab[i].byte()] = {&vocab[i], i};
    return t;
  }();
  return table;
}

// Decodes one segment. Events are stored when `counts` is null, otherwise
// only counted there.
template <bool kKeep>
Disassembly decode_segment(std::span<const std::uint8_t> input, std::size_t start,
                           Counts* counts) {
  Disassembly result;
  result.start_offset = start;
  Decoder in(input, start);
  const auto& table = byte_table();
  for (;;) {
    const std::size_t op_offset = in.pos();
    if (in.at_end()) {
      result.malform_reason = MalformReason::kMissingStop;
      result.error_offset = op_offset;
      break;
    }
    const ByteInfo& info = table[in.byte()];
    if (info.desc == nullptr) {
      result.malform_reason = MalformReason::kUnknownOpcode;
      result.error_offset = op_offset;
      break;
    }
    const auto& desc = *info.desc;
    try {
      if constexpr (kKeep) {
        OpcodeArg arg = decode_arg(desc.arg_codec, in);
        if (desc.code == Opcode::kProto) {
          result.protocol =
              std::max(result.protocol, static_cast<int>(std::get<std::int64_t>(arg)));
        }
        result.events.push_back({op_offset, desc.code, std::move(arg)});
      } else {
        const std::int64_t value = skip_arg(desc.arg_codec, in);
        if (desc.code == Opcode::kProto) {
          result.protocol = std::max(result.protocol, static_cast<int>(value));
        }
        ++(*counts)[info.index];
      }
    } catch (const DecodeFailure& failure) {
      result.malform_reason = failure.reason();
      result.error_offset = op_offset;
      break;
    }
    result.byte_len = in.pos() - start;
    if (desc.code == Opcode::kStop) {
      result.well_formed = true;
      break;
    }
  }
  return result;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::string_view to_string(MalformReason reason) {
  switch (reason) {
    case MalformReason::kTruncated: return "truncated";
    case MalformReason::kUnknownOpcode: return "unknown-opcode";
    case MalformReason::kBadArgument: return "bad-argument";
    case MalformReason::kMissingStop: return "missing-stop";
  }
  return "unknown";
}

Disassembly disassemble(std::span<const std::uint8_t> input) {
  if (input.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to disassemble");
  return decode_segment<true>(input, 0, nullptr);
}

Disassembly disassemble(std::string_view input) {
  return disassemble(as_bytes(input));
}

std::vector<Disassembly> disassemble_all(std::span<const std::uint8_t> input) {
  std::vector<Disassembly> segments;
  segments.push_back(disassemble(input));
  while (segments.back().well_formed) {
    const auto next = segments.back().start_offset + segments.back().byte_len;
    if (next >= input.size()) break;
    Disassembly segment = decode_segment<true>(input, static_cast<std::size_t>(next), nullptr);
    if (!segment.well_formed) break;
    segments.push_back(std::move(segment));
  }
  return segments;
}

std::vector<Disassembly> disassemble_all(std::string_view input) {
  return disassemble_all(as_bytes(input));
}

OpcodeHistogram count_opcodes(std::span<const std::uint8_t> input) {
  if (input.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to disassemble");
  OpcodeHistogram h;
  Disassembly segment = decode_segment<false>(input, 0, &h.counts);
  h.segments = 1;
  h.well_formed = segment.well_formed;
  while (segment.well_formed) {
    const auto next = segment.start_offset + segment.byte_len;
    if (next >= input.size()) break;
    Counts extra{};
    segment = decode_segment<false>(input, static_cast<std::size_t>(next), &extra);
    if (!segment.well_formed) break;
    for (std::size_t i = 0; i < kVocabularySize; ++i) h.counts[i] += extra[i];
    ++h.segments;
  }
  return h;
}

OpcodeHistogram count_opcodes(std::string_view input) {
  return count_opcodes(as_bytes(input));
}

std::size_t total_events(std::span<const Disassembly> segments) noexcept {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.events.size();
  return n;
}

std::string format_arg(const OpcodeArg& arg) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(bool b) const { return b ? "True" : "False"; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(const BigInt& v) const { return v.literal; }
    std::string operator()(double v) const { return repr_float(v); }
    std::string operator()(const ByteString& v) const { return repr_bytes(v.data); }
    std::string operator()(const Text& v) const { return repr_text(v.utf8); }
    std::string operator()(const ImportPair& v) const {
      return repr_text(v.module + " " + v.name);
    }
    std::string operator()(const SkippedPayload& v) const {
      return "<" + std::to_string(v.length) + " bytes skipped>";
    }
  };
  return std::visit(Visitor{}, arg);
}

}  // namespace pickle_sentry
