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

#include <charconv>
#include <string>

#include "garden/wire.h"

namespace garden::wire {

int DigitValue(unsigned char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return c - 'a' + 10;
  if (c >= 'A' && c <= 'Z') return c - 'A' + 10;
  return -1;
}

bool IsHexDigit(unsigned char c) {
  int d = DigitValue(c);
  return d >= 0 && d < 16;
}

namespace {

bool IsCSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' ||
         c == '\r';
}

bool IsDigitOf(unsigned char c, int radix) {
  int d = DigitValue(c);
  return d >= 0 && d < radix;
}

// Accumulates digits of `radix` starting at `pos`. Returns false on overflow.
bool AccumulateDigits(BytesView s, size_t& pos, int radix, int64_t& value) {
  value = 0;
  while (pos < s.size() && IsDigitOf(s[pos], radix)) {
    value = value * radix + DigitValue(s[pos]);
    if (value > kMaxFramingValue) return false;
    ++pos;
  }
  return true;
}

FramingInt Strict(BytesView s, int radix) {
  FramingInt out;
  int64_t value = 0;
  size_t pos = 0;
  if (!AccumulateDigits(s, pos, radix, value)) return out;
  out.consumed = pos;
  if (pos == 0 || pos != s.size()) return out;
  out.value = value;
  return out;
}

// Mirrors glibc strtoll: leading whitespace, optional sign, optional 0x when
// the radix is 16 (or inferred), then digits. The result's `consumed` is where
// strtoll would leave its end pointer.
FramingInt Strtol(BytesView s, int radix) {
  FramingInt out;
  size_t pos = 0;
  while (pos < s.size() && IsCSpace(s[pos])) ++pos;
  bool negative = false;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    negative = s[pos] == '-';
    ++pos;
  }
  bool hex_prefix = pos + 2 < s.size() && s[pos] == '0' &&
                    (s[pos + 1] == 'x' || s[pos + 1] == 'X') &&
                    IsHexDigit(s[pos + 2]);
  if (radix == 0) {
    if (hex_prefix) {
      radix = 16;
      pos += 2;
    } else if (pos < s.size() && s[pos] == '0') {
      radix = 8;
    } else {
      radix = 10;
    }
  } else if (radix == 16 && hex_prefix) {
    pos += 2;
  }
  size_t digits_begin = pos;
  int64_t value = 0;
  if (!AccumulateDigits(s, pos, radix, value)) return out;
  if (pos == digits_begin) return out;  // strtoll leaves end == start
  out.consumed = pos;
  out.value = negative ? -value : value;
  return out;
}

// Python's int(text, radix): surrounding whitespace, sign, base prefix and
// single underscores between digits are allowed; nothing else.
FramingInt PythonInt(BytesView s, int radix) {
  FramingInt out;
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end && IsCSpace(s[begin])) ++begin;
  while (end > begin && IsCSpace(s[end - 1])) --end;
  size_t pos = begin;
  bool negative = false;
  if (pos < end && (s[pos] == '+' || s[pos] == '-')) {
    negative = s[pos] == '-';
    ++pos;
  }
  bool prefixed = false;
  if (pos + 1 < end && s[pos] == '0') {
    char p = static_cast<char>(s[pos + 1] | 0x20);
    if ((radix == 16 && p == 'x') || (radix == 8 && p == 'o') ||
        (radix == 2 && p == 'b')) {
      pos += 2;
      prefixed = true;
    }
  }
  int64_t value = 0;
  bool any_digit = false;
  bool last_underscore = false;
  // After a base prefix a single underscore may precede the first digit.
  bool underscore_ok = prefixed;
  for (; pos < end; ++pos) {
    unsigned char c = s[pos];
    if (c == '_') {
      if (!underscore_ok || last_underscore) return out;
      last_underscore = true;
      continue;
    }
    if (!IsDigitOf(c, radix)) return out;
    value = value * radix + DigitValue(c);
    if (value > kMaxFramingValue) return out;
    any_digit = true;
    last_underscore = false;
    underscore_ok = true;
  }
  if (!any_digit || last_underscore) return out;
  out.consumed = s.size();
  out.value = negative ? -value : value;
  return out;
}

FramingInt LongestPrefix(BytesView s, int radix) {
  FramingInt out;
  size_t pos = 0;
  int64_t value = 0;
  if (!AccumulateDigits(s, pos, radix, value)) return out;
  if (pos == 0) return out;
  out.consumed = pos;
  out.value = value;
  return out;
}

}  // namespace

FramingInt ParseFramingInteger(BytesView digits, IntMode mode) {
  switch (mode.kind) {
    case IntModeKind::kRfcStrictDecimal:
      return Strict(digits, 10);
    case IntModeKind::kRfcStrictHex:
      return Strict(digits, 16);
    case IntModeKind::kStrtolRadixInfer:
      return Strtol(digits, 0);
    case IntModeKind::kStrtolExplicitRadix:
      return Strtol(digits, mode.radix);
    case IntModeKind::kUnderscoreTolerant:
      return PythonInt(digits, mode.radix);
    case IntModeKind::kLongestValidPrefix:
      return LongestPrefix(digits, mode.radix);
  }
  return {};
}

std::string IntMode::ToString() const {
  switch (kind) {
    case IntModeKind::kRfcStrictDecimal:
      return "rfc-strict-decimal";
    case IntModeKind::kRfcStrictHex:
      return "rfc-strict-hex";
    case IntModeKind::kStrtolRadixInfer:
      return "strtol-radix-infer";
    case IntModeKind::kStrtolExplicitRadix:
      return "strtol-explicit-radix(" + std::to_string(radix) + ")";
    case IntModeKind::kUnderscoreTolerant:
      return "underscore-tolerant(" + std::to_string(radix) + ")";
    case IntModeKind::kLongestValidPrefix:
      return "longest-valid-prefix(" + std::to_string(radix) + ")";
  }
  return "?";
}

std::optional<IntMode> IntMode::FromString(std::string_view text) {
  if (text == "rfc-strict-decimal") return StrictDecimal();
  if (text == "rfc-strict-hex") return StrictHex();
  if (text == "strtol-radix-infer") return StrtolRadixInfer();
  auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return std::nullopt;
  std::string_view name = text.substr(0, open);
  std::string_view arg = text.substr(open + 1, text.size() - open - 2);
  int radix = 0;
  auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), radix);
  if (ec != std::errc() || ptr != arg.data() + arg.size()) return std::nullopt;
  if (radix < 2 || radix > 36) return std::nullopt;
  if (name == "strtol-explicit-radix") return StrtolExplicitRadix(radix);
  if (name == "underscore-tolerant") return UnderscoreTolerant(radix);
  if (name == "longest-valid-prefix") return LongestValidPrefix(radix);
  return std::nullopt;
}

}  // namespace garden::wire
