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

#include "garden/wire.h"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "garden/bytes.h"
#include "garden/fuzzer.h"
#include "garden/mutation.h"
#include "gtest/gtest.h"

namespace garden::wire {
namespace {

// ---------------------------------------------------------------------------
// An independent, table-driven recognizer for the request grammar. It only
// answers "is this a complete sequence of valid requests".
// ---------------------------------------------------------------------------

enum CharClass : uint8_t { kTok, kVis, kSp, kTab, kCr, kLf, kColon, kCtl, kClasses };

constexpr std::array<uint8_t, 256> MakeClassTable() {
  std::array<uint8_t, 256> t{};
  for (int c = 0; c < 256; ++c) {
    if (c >= 0x80) {
      t[c] = kVis;  // obs-text
    } else if (c < 0x20 || c == 0x7f) {
      t[c] = kCtl;
    } else if (c == ' ') {
      t[c] = kSp;
    } else {
      t[c] = kVis;
    }
  }
  t['\t'] = kTab;
  t['\r'] = kCr;
  t['\n'] = kLf;
  t[':'] = kColon;
  for (char c : std::string_view("!#$%&'*+-.^_`|~")) t[static_cast<uint8_t>(c)] = kTok;
  for (int c = '0'; c <= '9'; ++c) t[c] = kTok;
  for (int c = 'a'; c <= 'z'; ++c) t[c] = kTok;
  for (int c = 'A'; c <= 'Z'; ++c) t[c] = kTok;
  return t;
}
constexpr std::array<uint8_t, 256> kClass = MakeClassTable();

// Request line: method SP target SP version CRLF.
enum RlState : uint8_t { kRlStart, kRlMethod, kRlSp1, kRlTarget, kRlSp2, kRlVersion, kRlCr, kRlDone, kRlBad };
constexpr RlState kRequestLine[kRlDone][kClasses] = {
    //          Tok        Vis        Sp       Tab      Cr       Lf      Colon      Ctl
    /*Start*/  {kRlMethod, kRlBad, kRlBad, kRlBad, kRlBad, kRlBad, kRlBad, kRlBad},
    /*Method*/ {kRlMethod, kRlBad, kRlSp1, kRlBad, kRlBad, kRlBad, kRlBad, kRlBad},
    /*Sp1*/    {kRlTarget, kRlTarget, kRlBad, kRlBad, kRlBad, kRlBad, kRlTarget, kRlBad},
    /*Target*/ {kRlTarget, kRlTarget, kRlSp2, kRlBad, kRlBad, kRlBad, kRlTarget, kRlBad},
    /*Sp2*/    {kRlVersion, kRlVersion, kRlBad, kRlBad, kRlBad, kRlBad, kRlVersion, kRlBad},
    /*Ver*/    {kRlVersion, kRlVersion, kRlBad, kRlBad, kRlCr, kRlBad, kRlVersion, kRlBad},
    /*Cr*/     {kRlBad, kRlBad, kRlBad, kRlBad, kRlBad, kRlDone, kRlBad, kRlBad},
};

// Field line: name ":" value CRLF, value over VCHAR / obs-text / SP / HTAB.
enum FlState : uint8_t { kFlStart, kFlName, kFlValue, kFlCr, kFlDone, kFlBad };
constexpr FlState kFieldLine[kFlDone][kClasses] = {
    //         Tok      Vis       Sp        Tab       Cr     Lf       Colon     Ctl
    /*Start*/ {kFlName, kFlBad, kFlBad, kFlBad, kFlBad, kFlBad, kFlBad, kFlBad},
    /*Name*/  {kFlName, kFlBad, kFlBad, kFlBad, kFlBad, kFlBad, kFlValue, kFlBad},
    /*Value*/ {kFlValue, kFlValue, kFlValue, kFlValue, kFlCr, kFlBad, kFlValue, kFlBad},
    /*Cr*/    {kFlBad, kFlBad, kFlBad, kFlBad, kFlBad, kFlDone, kFlBad, kFlBad},
};

class GrammarChecker {
 public:
  explicit GrammarChecker(BytesView d) : d_(d) {}

  bool AcceptsAll() {
    if (d_.empty()) return true;
    while (pos_ < d_.size()) {
      if (!Request()) return false;
    }
    return true;
  }

 private:
  static std::string Lower(BytesView s) {
    std::string out(s);
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  static std::string Trim(BytesView s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return std::string(s.substr(b, e - b));
  }
  static std::optional<uint64_t> Number(BytesView s, int base) {
    if (s.empty() || s.size() > 12) return std::nullopt;
    uint64_t v = 0;
    for (char c : s) {
      int d = -1;
      if (c >= '0' && c <= '9') d = c - '0';
      if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
      if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
      if (d < 0) return std::nullopt;
      v = v * base + d;
    }
    return v;
  }

  bool RequestLine() {
    RlState s = kRlStart;
    size_t version_begin = 0;
    while (s != kRlDone) {
      if (pos_ >= d_.size()) return false;
      RlState next = kRequestLine[s][kClass[static_cast<uint8_t>(d_[pos_])]];
      if (next == kRlBad) return false;
      if (s == kRlSp2) version_begin = pos_;
      s = next;
      ++pos_;
    }
    BytesView version = d_.substr(version_begin, pos_ - 2 - version_begin);
    return version.size() == 8 && version.substr(0, 7) == "HTTP/1." &&
           version[7] >= '0' && version[7] <= '9';
  }

  // Fields up to the empty line, collected as (lower name, trimmed value).
  bool Fields(std::vector<std::pair<std::string, std::string>>& out) {
    while (true) {
      if (pos_ + 1 < d_.size() && d_[pos_] == '\r' && d_[pos_ + 1] == '\n') {
        pos_ += 2;
        return true;
      }
      size_t begin = pos_;
      size_t colon = 0;
      FlState s = kFlStart;
      while (s != kFlDone) {
        if (pos_ >= d_.size()) return false;
        uint8_t cls = kClass[static_cast<uint8_t>(d_[pos_])];
        FlState next = kFieldLine[s][cls];
        if (next == kFlBad) return false;
        if (s == kFlName && next == kFlValue) colon = pos_;
        s = next;
        ++pos_;
      }
      out.emplace_back(Lower(d_.substr(begin, colon - begin)),
                       Trim(d_.substr(colon + 1, pos_ - 2 - colon - 1)));
    }
  }

  bool Line(BytesView& content) {
    size_t end = d_.find("\r\n", pos_);
    if (end == BytesView::npos) return false;
    content = d_.substr(pos_, end - pos_);
    for (char c : content) {
      if (c == '\r' || c == '\n') return false;
    }
    pos_ = end + 2;
    return true;
  }

  static bool ExtensionOk(BytesView ext) {
    // BWS ';' ... with only visible characters and blanks.
    size_t i = 0;
    while (i < ext.size() && (ext[i] == ' ' || ext[i] == '\t')) ++i;
    if (i == ext.size()) return true;
    if (ext[i] != ';') return false;
    for (char c : ext) {
      uint8_t cls = kClass[static_cast<uint8_t>(c)];
      if (cls == kCr || cls == kLf || cls == kCtl) return false;
    }
    return true;
  }

  bool Chunked() {
    while (true) {
      BytesView line;
      if (!Line(line)) return false;
      size_t n = 0;
      while (n < line.size() && Number(line.substr(n, 1), 16)) ++n;
      if (n == 0 || !ExtensionOk(line.substr(n))) return false;
      std::optional<uint64_t> size = Number(line.substr(0, n), 16);
      if (!size) return false;
      if (*size == 0) {
        std::vector<std::pair<std::string, std::string>> trailers;
        return Fields(trailers);
      }
      if (d_.size() - pos_ < *size + 2) return false;
      pos_ += *size;
      if (d_.substr(pos_, 2) != "\r\n") return false;
      pos_ += 2;
    }
  }

  bool Request() {
    if (!RequestLine()) return false;
    std::vector<std::pair<std::string, std::string>> fields;
    if (!Fields(fields)) return false;
    std::optional<uint64_t> cl;
    int te = 0;
    for (const auto& [name, value] : fields) {
      if (name == "content-length") {
        std::optional<uint64_t> v = Number(value, 10);
        if (!v || (cl && *cl != *v)) return false;
        cl = v;
      } else if (name == "transfer-encoding") {
        if (Lower(value) != "chunked") return false;
        ++te;
      }
    }
    if (te > 1 || (te == 1 && cl)) return false;
    if (te == 1) return Chunked();
    if (cl) {
      if (d_.size() - pos_ < *cl) return false;
      pos_ += *cl;
    }
    return true;
  }

  BytesView d_;
  size_t pos_ = 0;
};

// Streams from the fuzzer's own mutation operators, concatenated.
std::vector<Bytes> FuzzInputs(size_t n, uint64_t seed) {
  std::vector<RequestStream> seeds = fuzzer::DefaultSeedCorpus();
  mutation::Rng rng(seed);
  std::vector<Bytes> out;
  for (size_t i = 0; i < n; ++i) {
    RequestStream s = seeds[rng.Below(seeds.size())];
    uint64_t steps = rng.Below(4);
    for (uint64_t k = 0; k < steps; ++k) {
      s = mutation::Mutate(s, rng, mutation::ClassWeights{}).child;
    }
    out.push_back(s.Concatenated());
  }
  return out;
}

const ParseComplete* AsComplete(const ParseOutcome& o) {
  return std::get_if<ParseComplete>(&o);
}

// ---------------------------------------------------------------------------
// Strict parser
// ---------------------------------------------------------------------------

TEST(ParseStrictTest, MinimalGet) {
  ParseOutcome o = ParseStrict("GET / HTTP/1.1\r\nHost: a\r\n\r\n");
  const ParseComplete* c = AsComplete(o);
  ASSERT_NE(c, nullptr);
  ASSERT_EQ(c->requests.size(), 1u);
  const HttpRequestModel& m = c->requests[0];
  EXPECT_EQ(m.method, "GET");
  EXPECT_EQ(m.uri, "/");
  EXPECT_EQ(m.version, "HTTP/1.1");
  ASSERT_EQ(m.headers.size(), 1u);
  EXPECT_EQ(m.headers[0].name, "Host");
  EXPECT_EQ(m.headers[0].value, "a");
  EXPECT_EQ(m.body, "");
}

TEST(ParseStrictTest, ChunkedBody) {
  ParseOutcome o = ParseStrict(
      "POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n0\r\n\r\n");
  const ParseComplete* c = AsComplete(o);
  ASSERT_NE(c, nullptr);
  ASSERT_EQ(c->requests.size(), 1u);
  EXPECT_EQ(c->requests[0].body, "hello");
}

TEST(ParseStrictTest, LeadingZeroContentLengthIsDecimal) {
  ParseOutcome o = ParseStrict("GET / HTTP/1.1\r\nContent-Length: 0200\r\n\r\n" +
                               Bytes(200, 'x'));
  const ParseComplete* c = AsComplete(o);
  ASSERT_NE(c, nullptr);
  ASSERT_EQ(c->requests.size(), 1u);
  EXPECT_EQ(c->requests[0].body.size(), 200u);
}

TEST(ParseStrictTest, PipelinedRequestsSplitAtBodyBoundary) {
  ParseOutcome o = ParseStrict(
      "POST / HTTP/1.1\r\nContent-Length: 3\r\n\r\nabcGET /x HTTP/1.1\r\n\r\n");
  const ParseComplete* c = AsComplete(o);
  ASSERT_NE(c, nullptr);
  ASSERT_EQ(c->requests.size(), 2u);
  EXPECT_EQ(c->requests[0].body, "abc");
  EXPECT_EQ(c->requests[1].uri, "/x");
}

TEST(ParseStrictTest, ProperPrefixIsIncomplete) {
  ParseOutcome o = ParseStrict("GET / HTTP/1.1\r\nContent-Length: 5\r\n\r\nab");
  EXPECT_TRUE(std::holds_alternative<ParseIncomplete>(o));
}

TEST(ParseStrictTest, RejectionsCarryTheOffendingOffset) {
  ParseOutcome bare_cr = ParseStrict("GET / HTTP/1.1\rHost: a\r\n\r\n");
  ASSERT_TRUE(std::holds_alternative<ParseRejected>(bare_cr));
  EXPECT_EQ(std::get<ParseRejected>(bare_cr).position, 14u);

  ParseOutcome underscore =
      ParseStrict("GET / HTTP/1.1\r\nContent-Length: 1_0\r\n\r\n");
  EXPECT_TRUE(std::holds_alternative<ParseRejected>(underscore));
  ParseOutcome http09 = ParseStrict("GET /\r\n\r\n");
  EXPECT_TRUE(std::holds_alternative<ParseRejected>(http09));
  ParseOutcome nul = ParseStrict(Bytes("GET / HTTP/1.1\r\nA: b\0c\r\n\r\n", 25));
  EXPECT_TRUE(std::holds_alternative<ParseRejected>(nul));
}

TEST(ParseStrictTest, EnforcesSizeLimits) {
  StrictLimits limits;
  limits.max_bytes = 10;
  EXPECT_TRUE(std::holds_alternative<ParseRejected>(
      ParseStrict("GET / HTTP/1.1\r\n\r\n", limits)));
  limits = StrictLimits{};
  limits.max_headers = 1;
  EXPECT_TRUE(std::holds_alternative<ParseRejected>(
      ParseStrict("GET / HTTP/1.1\r\nA: 1\r\nB: 2\r\n\r\n", limits)));
}

TEST(ParseStrictTest, AcceptsOnlyWhatTheGrammarCheckerAccepts) {
  size_t accepted = 0;
  for (const Bytes& input : FuzzInputs(10000, 7)) {
    const ParseComplete* c = AsComplete(ParseStrict(input));
    if (c == nullptr) continue;
    ++accepted;
    EXPECT_TRUE(GrammarChecker(input).AcceptsAll()) << EscapeBytes(input);
  }
  // The cross-check is only meaningful if it saw plenty of valid inputs.
  EXPECT_GT(accepted, 1000u);
}

TEST(ParseStrictTest, StrictModelsRoundTrip) {
  for (const Bytes& input : FuzzInputs(3000, 11)) {
    const ParseOutcome o = ParseStrict(input);
    const ParseComplete* c = AsComplete(o);
    if (c == nullptr) continue;
    Bytes again = SerializeAll(c->requests);
    const ParseOutcome o2 = ParseStrict(again);
    const ParseComplete* c2 = AsComplete(o2);
    ASSERT_NE(c2, nullptr) << EscapeBytes(input);
    EXPECT_EQ(c2->requests, c->requests);
  }
}

// ---------------------------------------------------------------------------
// Lenient parser and serializer
// ---------------------------------------------------------------------------

TEST(ParseLenientTest, SimpleGet) {
  std::vector<HttpRequestModel> m = ParseLenient("GET / HTTP/1.1\r\n\r\n");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].method, "GET");
  EXPECT_EQ(SerializeAll(m), "GET / HTTP/1.1\r\n\r\n");
}

TEST(ParseLenientTest, GarbageIsPreserved) {
  std::vector<HttpRequestModel> m = ParseLenient("2\r\r;a\r\n02\r\n");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(SerializeAll(m), "2\r\r;a\r\n02\r\n");
}

TEST(ParseLenientTest, LfOnlyLines) {
  std::vector<HttpRequestModel> m = ParseLenient("GET / HTTP/1.1\nHost: a\n\n");
  ASSERT_EQ(m.size(), 1u);
  ASSERT_EQ(m[0].headers.size(), 1u);
  EXPECT_EQ(m[0].headers[0].name, "Host");
  EXPECT_EQ(m[0].headers[0].value, "a");
  EXPECT_EQ(SerializeAll(m), "GET / HTTP/1.1\nHost: a\n\n");
}

TEST(ParseLenientTest, EmptyInputYieldsOneModel) {
  std::vector<HttpRequestModel> m = ParseLenient("");
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(SerializeAll(m), "");
}

TEST(ParseLenientTest, RoundTripsMutatedInputs) {
  for (const Bytes& input : FuzzInputs(10000, 3)) {
    std::vector<HttpRequestModel> m = ParseLenient(input);
    ASSERT_FALSE(m.empty());
    ASSERT_EQ(SerializeAll(m), input) << EscapeBytes(input);
  }
}

TEST(ParseLenientTest, RoundTripsRandomBytes) {
  mutation::Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    Bytes input;
    size_t len = rng.Below(200);
    for (size_t k = 0; k < len; ++k) {
      input += static_cast<char>(i % 2 == 0 ? rng.Below(256)
                                            : mutation::DrawAlphabetByte(rng));
    }
    ASSERT_EQ(SerializeAll(ParseLenient(input)), input) << EscapeBytes(input);
  }
}

TEST(SerializeTest, KeepsRawContentLength) {
  HttpRequestModel m = ParseLenient("GET / HTTP/1.1\r\nContent-Length: 5\r\n\r\nhello")[0];
  m.headers[0].value = "0200";
  EXPECT_NE(Serialize(m).find("Content-Length: 0200\r\n"), Bytes::npos);
}

TEST(SerializeTest, KeepsRawChunkSize) {
  HttpRequestModel m = ParseLenient(
      "POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n1\r\nZ\r\n0\r\n\r\n")[0];
  ASSERT_TRUE(m.IsChunked());
  ASSERT_GE(m.chunks.size(), 1u);
  m.chunks[0].size_raw = "0_ff";
  EXPECT_NE(Serialize(m).find("\r\n0_ff\r\n"), Bytes::npos);
}

// ---------------------------------------------------------------------------
// Framing integers
// ---------------------------------------------------------------------------

TEST(FramingIntegerTest, ModeTable) {
  EXPECT_EQ(ParseFramingInteger("0200", IntMode::StrictDecimal()).value, 200);
  EXPECT_EQ(ParseFramingInteger("0200", IntMode::StrtolRadixInfer()).value, 128);
  EXPECT_EQ(ParseFramingInteger("0_ff", IntMode::UnderscoreTolerant(16)).value, 255);
  FramingInt prefix = ParseFramingInteger("0_ff", IntMode::LongestValidPrefix(16));
  EXPECT_EQ(prefix.value, 0);
  EXPECT_EQ(prefix.consumed, 1u);
  EXPECT_EQ(ParseFramingInteger("0xff", IntMode::StrtolExplicitRadix(16)).value, 255);
  EXPECT_FALSE(ParseFramingInteger("-5", IntMode::StrictDecimal()).valid());
  EXPECT_FALSE(ParseFramingInteger("+5", IntMode::StrictDecimal()).valid());
}

TEST(FramingIntegerTest, OverflowIsInvalid) {
  EXPECT_EQ(ParseFramingInteger("9007199254740991", IntMode::StrictDecimal()).value,
            kMaxFramingValue);
  EXPECT_FALSE(ParseFramingInteger("9007199254740992", IntMode::StrictDecimal()).valid());
  EXPECT_FALSE(
      ParseFramingInteger("ffffffffffffffffff", IntMode::StrictHex()).valid());
}

TEST(IntModeTest, NamesRoundTrip) {
  for (IntMode m : {IntMode::StrictDecimal(), IntMode::StrictHex(),
                    IntMode::StrtolRadixInfer(), IntMode::StrtolExplicitRadix(16),
                    IntMode::UnderscoreTolerant(10), IntMode::LongestValidPrefix(16)}) {
    EXPECT_EQ(IntMode::FromString(m.ToString()), m) << m.ToString();
  }
  EXPECT_FALSE(IntMode::FromString("octal").has_value());
}

constexpr std::string_view kIntAlphabet = "0123456789abcdefABCDEF_x-+";

// Every string over the alphabet of length 1 to `max_len`.
template <typename F>
void ForEachString(size_t max_len, F f) {
  std::string s;
  for (size_t len = 1; len <= max_len; ++len) {
    std::vector<size_t> idx(len, 0);
    while (true) {
      s.resize(len);
      for (size_t i = 0; i < len; ++i) s[i] = kIntAlphabet[idx[i]];
      f(s);
      size_t k = 0;
      while (k < len && ++idx[k] == kIntAlphabet.size()) idx[k++] = 0;
      if (k == len) break;
    }
  }
}

std::optional<int64_t> BruteForceHex(std::string_view s) {
  int64_t v = 0;
  for (char c : s) {
    std::string_view digits = "0123456789abcdef";
    char lower = (c >= 'A' && c <= 'F') ? static_cast<char>(c - 'A' + 'a') : c;
    size_t d = digits.find(lower);
    if (d == std::string_view::npos) return std::nullopt;
    v = v * 16 + static_cast<int64_t>(d);
  }
  return v;
}

TEST(FramingIntegerTest, StrictHexMatchesBruteForce) {
  size_t checked = 0;
  ForEachString(4, [&](const std::string& s) {
    ++checked;
    FramingInt got = ParseFramingInteger(s, IntMode::StrictHex());
    ASSERT_EQ(got.value, BruteForceHex(s)) << s;
  });
  EXPECT_EQ(checked, 26u + 26 * 26 + 26 * 26 * 26 + 26 * 26 * 26 * 26);
}

TEST(FramingIntegerTest, LenientModesAgreeWithStrictWhereStrictAccepts) {
  ForEachString(4, [&](const std::string& s) {
    for (int radix : {10, 16}) {
      IntMode strict = radix == 10 ? IntMode::StrictDecimal() : IntMode::StrictHex();
      FramingInt base = ParseFramingInteger(s, strict);
      if (!base.valid()) continue;
      ASSERT_EQ(ParseFramingInteger(s, IntMode::UnderscoreTolerant(radix)).value,
                base.value)
          << s;
      ASSERT_EQ(ParseFramingInteger(s, IntMode::LongestValidPrefix(radix)).value,
                base.value)
          << s;
    }
  });
}

}  // namespace
}  // namespace garden::wire
