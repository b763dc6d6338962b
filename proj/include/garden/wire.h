// Copyright 2026 The Garden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Byte-exact HTTP/1.1 request model.
//
// Three parsers live here and they deliberately share no code:
//   * ParseStrict accepts only what the RFC 9112 sender grammar allows and is
//     the reference every personality is measured against.
//   * ParseLenient never fails. Anything it cannot make sense of is kept
//     verbatim, so Serialize(ParseLenient(x)) == x. The mutator relies on this.
//   * ParseFramingInteger models the integer parsers found in real servers
//     (strtol radix inference, Python int, longest valid prefix, ...).

#ifndef GARDEN_WIRE_H_
#define GARDEN_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "garden/bytes.h"

namespace garden::wire {

// ---------------------------------------------------------------------------
// Framing integers
// ---------------------------------------------------------------------------

enum class IntModeKind {
  kRfcStrictDecimal,     // exactly 1*DIGIT
  kRfcStrictHex,         // exactly 1*HEXDIG
  kStrtolRadixInfer,     // strtoll(s, &end, 0); trailing bytes ignored
  kStrtolExplicitRadix,  // strtoll(s, &end, radix); trailing bytes ignored
  kUnderscoreTolerant,   // Python int(s, radix); whole string must match
  kLongestValidPrefix,   // digits of `radix` up to the first non-digit
};

struct IntMode {
  IntModeKind kind = IntModeKind::kRfcStrictDecimal;
  int radix = 10;

  static constexpr IntMode StrictDecimal() {
    return {IntModeKind::kRfcStrictDecimal, 10};
  }
  static constexpr IntMode StrictHex() { return {IntModeKind::kRfcStrictHex, 16}; }
  static constexpr IntMode StrtolRadixInfer() {
    return {IntModeKind::kStrtolRadixInfer, 0};
  }
  static constexpr IntMode StrtolExplicitRadix(int radix) {
    return {IntModeKind::kStrtolExplicitRadix, radix};
  }
  static constexpr IntMode UnderscoreTolerant(int radix) {
    return {IntModeKind::kUnderscoreTolerant, radix};
  }
  static constexpr IntMode LongestValidPrefix(int radix) {
    return {IntModeKind::kLongestValidPrefix, radix};
  }

  bool IsStrict() const {
    return kind == IntModeKind::kRfcStrictDecimal ||
           kind == IntModeKind::kRfcStrictHex;
  }
  // True for modes whose callers ignore bytes after the recognized prefix.
  bool IgnoresTrailingBytes() const {
    return kind == IntModeKind::kStrtolRadixInfer ||
           kind == IntModeKind::kStrtolExplicitRadix ||
           kind == IntModeKind::kLongestValidPrefix;
  }

  // "rfc-strict-decimal", "strtol-explicit-radix(16)", ...
  std::string ToString() const;
  static std::optional<IntMode> FromString(std::string_view text);

  friend bool operator==(const IntMode&, const IntMode&) = default;
};

// Largest value any mode reports; anything above is invalid.
inline constexpr int64_t kMaxFramingValue = (int64_t{1} << 53) - 1;

struct FramingInt {
  // Only the strtol and underscore modes can produce negative values.
  std::optional<int64_t> value;
  // Bytes the mode recognized, including whitespace, sign and prefixes.
  size_t consumed = 0;

  bool valid() const { return value.has_value(); }
};

FramingInt ParseFramingInteger(BytesView digits, IntMode mode);

// ---------------------------------------------------------------------------
// Message model
// ---------------------------------------------------------------------------

struct HeaderLine {
  Bytes name;
  Bytes separator;   // ':' plus surrounding whitespace; empty if no colon
  Bytes value;
  Bytes terminator;  // "\r\n", "\n", "\r", or empty at end of input

  friend bool operator==(const HeaderLine&, const HeaderLine&) = default;
};

struct ChunkModel {
  Bytes size_raw;
  std::optional<uint64_t> size_value;
  Bytes extension_raw;  // everything between the size and the terminator
  Bytes size_terminator;
  Bytes data;
  Bytes data_terminator;

  friend bool operator==(const ChunkModel&, const ChunkModel&) = default;
};

enum class Framing { kNone, kContentLength, kChunked, kBoth };

struct HttpRequestModel {
  // False when the bytes did not look like a request at all; everything then
  // lives in raw_tail.
  bool structured = true;

  Bytes preamble;  // empty lines ahead of the request line
  Bytes method;
  Bytes sp1;
  Bytes uri;
  Bytes sp2;
  Bytes version;
  Bytes start_terminator;
  std::vector<HeaderLine> headers;
  Bytes head_terminator;  // the empty line closing the field section

  Framing framing = Framing::kNone;
  // Serialized after the head when framing is kNone or kContentLength.
  // For chunked framing it holds the decoded body and is not serialized.
  Bytes body;
  std::vector<ChunkModel> chunks;
  std::vector<HeaderLine> trailers;
  Bytes trailer_terminator;

  Bytes raw_tail;  // unrecognized bytes, kept verbatim

  // The raw Content-Length value, or nullopt without such a header.
  std::optional<Bytes> ContentLengthRaw() const;
  const HeaderLine* FindHeader(BytesView name) const;
  bool IsChunked() const {
    return framing == Framing::kChunked || framing == Framing::kBoth;
  }

  friend bool operator==(const HttpRequestModel&,
                         const HttpRequestModel&) = default;
};

Bytes Serialize(const HttpRequestModel& model);
Bytes SerializeAll(std::span<const HttpRequestModel> models);

// ---------------------------------------------------------------------------
// Strict parser
// ---------------------------------------------------------------------------

struct StrictLimits {
  size_t max_bytes = kMaxStreamBytes;
  size_t max_headers = 64;
  size_t max_chunks = 256;
};

struct ParseComplete {
  std::vector<HttpRequestModel> requests;
  Bytes trailing_unconsumed;
};

struct ParseRejected {
  size_t position = 0;
  std::string reason;
};

// `requests` are the complete requests ahead of the unfinished one, which
// starts at `resume_offset`.
struct ParseIncomplete {
  std::vector<HttpRequestModel> requests;
  size_t resume_offset = 0;
};

using ParseOutcome = std::variant<ParseComplete, ParseRejected, ParseIncomplete>;

ParseOutcome ParseStrict(BytesView data, const StrictLimits& limits = {});

// ---------------------------------------------------------------------------
// Lenient parser
// ---------------------------------------------------------------------------

// Always returns at least one model; SerializeAll of the result is `data`.
std::vector<HttpRequestModel> ParseLenient(BytesView data);

// Character classes shared by the parsers in this library.
bool IsTchar(unsigned char c);
bool IsHexDigit(unsigned char c);
int DigitValue(unsigned char c);  // 0-35 for [0-9a-zA-Z], -1 otherwise

}  // namespace garden::wire

#endif  // GARDEN_WIRE_H_
