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

#include "garden/personalities.h"

#include <cstddef>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "absl/strings/str_cat.h"
#include "garden/analysis.h"
#include "garden/bytes.h"
#include "garden/fuzzer.h"
#include "garden/mutation.h"
#include "garden/wire.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_payloads.h"

namespace garden::personalities {
namespace {

using ::garden::testing::BareCrChunkPayload;
using ::garden::testing::Builtin;
using ::garden::testing::Entry;
using ::garden::testing::NegativeClPayload;
using ::garden::testing::OctalClPayload;
using ::testing::Contains;
using ::testing::Pair;

// Random requests valid under the RFC grammar, one to three per input.
Bytes ValidInput(mutation::Rng& rng, bool leading_zeros = true) {
  static const char* kMethods[] = {"GET", "POST", "PUT", "DELETE", "HEAD", "PATCH"};
  static const char* kUris[] = {"/", "/a", "/x/y?z=1", "*", "/%41"};
  Bytes out;
  size_t n = 1 + rng.Below(3);
  for (size_t r = 0; r < n; ++r) {
    Bytes method = kMethods[rng.Below(6)];
    absl::StrAppend(&out, method, " ", kUris[rng.Below(5)], " HTTP/1.1\r\n");
    size_t headers = rng.Below(3);
    for (size_t h = 0; h < headers; ++h) {
      absl::StrAppend(&out, "X-", std::to_string(h), ":", rng.Below(2) ? " " : "",
                      "v", std::to_string(rng.Below(100)), "\r\n");
    }
    Bytes body;
    size_t len = rng.Below(20);
    for (size_t i = 0; i < len; ++i) body += static_cast<char>(rng.Below(256));
    switch (rng.Below(3)) {
      case 0:
        if (body.empty()) break;
        absl::StrAppend(&out, "Content-Length: ",
                        leading_zeros && rng.Below(2) ? "0" : "",
                        std::to_string(body.size()), "\r\n\r\n", body);
        continue;
      case 1: {
        absl::StrAppend(&out, "Transfer-Encoding: chunked\r\n\r\n");
        size_t at = 0;
        while (at < body.size()) {
          size_t take = 1 + rng.Below(body.size() - at);
          absl::StrAppend(&out, absl::Hex(take), rng.Below(4) == 0 ? ";k=v" : "",
                          "\r\n", body.substr(at, take), "\r\n");
          at += take;
        }
        absl::StrAppend(&out, "0\r\n\r\n");
        continue;
      }
      default:
        break;
    }
    // An unframed POST may be refused with 411; frame it explicitly.
    absl::StrAppend(&out, method == "POST" ? "Content-Length: 0\r\n" : "", "\r\n");
  }
  return out;
}

std::vector<RequestStream> FuzzStreams(size_t n, uint64_t seed) {
  std::vector<RequestStream> seeds = fuzzer::DefaultSeedCorpus();
  mutation::Rng rng(seed);
  std::vector<RequestStream> out;
  for (size_t i = 0; i < n; ++i) {
    RequestStream s = seeds[rng.Below(seeds.size())];
    for (uint64_t k = rng.Below(4); k > 0; --k) {
      s = mutation::Mutate(s, rng, mutation::ClassWeights{}).child;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpretation of known payloads
// ---------------------------------------------------------------------------

TEST(InterpretTest, OracleReadsLeadingZeroAsDecimal) {
  InterpretationReport r = Interpret(Builtin("rfc-oracle"), {OctalClPayload()});
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(Entry(r, 0)->uri, "/");
  EXPECT_EQ(Entry(r, 0)->body.size(), 200u);
  EXPECT_EQ(Entry(r, 1)->uri, "/");
  EXPECT_THAT(Entry(r, 1)->headers, Contains(Pair("Host", "whateva")));
  EXPECT_EQ(r.termination, Termination::kClean);
}

TEST(InterpretTest, RadixInferenceReadsLeadingZeroAsOctal) {
  InterpretationReport r = Interpret(Builtin("litespeed-like"), {OctalClPayload()});
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(Entry(r, 0)->uri, "/");
  EXPECT_EQ(Entry(r, 0)->body.size(), 128u);
  EXPECT_EQ(Entry(r, 1)->uri, "/.ssh/id_rsa");
  EXPECT_EQ(Entry(r, 1)->body.size(), 56u);
  EXPECT_THAT(Entry(r, 1)->headers, Contains(Pair("Content-Length", "56")));
}

TEST(InterpretTest, BareCrChunkLineHidesDelete) {
  InterpretationReport node = Interpret(Builtin("node-like"), {BareCrChunkPayload()});
  ASSERT_GE(node.entries.size(), 2u);
  EXPECT_EQ(Entry(node, 0)->method, "POST");
  EXPECT_EQ(Entry(node, 1)->method, "DELETE");
  EXPECT_EQ(Entry(node, 1)->body.size(), 23u);

  // A transducer that allows CR before ';' sees the GET instead.
  InterpretationReport ats =
      InterpretWithQuirks(Builtin("ats-like"), {BareCrChunkPayload()});
  ASSERT_GE(ats.entries.size(), 2u);
  EXPECT_EQ(Entry(ats, 1)->method, "GET");
}

TEST(InterpretTest, OracleRejectsTheBareCrInTheChunkLine) {
  InterpretationReport r = Interpret(Builtin("rfc-oracle"), {BareCrChunkPayload()});
  ASSERT_EQ(r.entries.size(), 1u);
  const Rejection* rej = r.rejection();
  ASSERT_NE(rej, nullptr);
  EXPECT_EQ(rej->offset, 48u);
}

TEST(InterpretTest, NegativeContentLengthLoops) {
  InterpretationReport m = Interpret(Builtin("mongoose-like"), {NegativeClPayload()});
  EXPECT_EQ(m.termination, Termination::kLoopDetected);
  InterpretationReport o = Interpret(Builtin("rfc-oracle"), {NegativeClPayload()});
  EXPECT_NE(o.rejection(), nullptr);
  EXPECT_EQ(o.termination, Termination::kClean);
}

TEST(InterpretTest, ElementBoundariesDoNotSplitRequests) {
  InterpretationReport r =
      Interpret(Builtin("rfc-oracle"), {"GET / HT", "TP/1.1\r\n\r\n"});
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(Entry(r, 0)->version, "HTTP/1.1");
}

TEST(InterpretTest, UnfinishedRequestTimesOut) {
  InterpretationReport r = Interpret(
      Builtin("rfc-oracle"), {"POST / HTTP/1.1\r\nContent-Length: 9\r\n\r\nab"});
  EXPECT_TRUE(r.entries.empty());
  EXPECT_EQ(r.termination, Termination::kTimeout);
}

TEST(InterpretTest, PoisonPredicateCrashes) {
  Personality p = Builtin("rfc-oracle");
  p.poison = [](BytesView request) { return request.find("/boom") != BytesView::npos; };
  InterpretationReport r =
      Interpret(p, {"GET /a HTTP/1.1\r\n\r\nGET /boom HTTP/1.1\r\n\r\nGET /c HTTP/1.1\r\n\r\n"});
  EXPECT_EQ(r.termination, Termination::kCrash);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(Entry(r, 0)->uri, "/a");
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST(InterpretTest, OracleAgreesWithStrictParser) {
  mutation::Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    Bytes input = ValidInput(rng);
    wire::ParseOutcome strict = wire::ParseStrict(input);
    const auto* complete = std::get_if<wire::ParseComplete>(&strict);
    ASSERT_NE(complete, nullptr) << EscapeBytes(input);
    InterpretationReport r = Interpret(Builtin("rfc-oracle"), {input});
    ASSERT_EQ(r.entries.size(), complete->requests.size()) << EscapeBytes(input);
    for (size_t k = 0; k < r.entries.size(); ++k) {
      const ParsedEntry* e = Entry(r, k);
      ASSERT_NE(e, nullptr);
      EXPECT_EQ(e->method, complete->requests[k].method);
      EXPECT_EQ(e->uri, complete->requests[k].uri);
      EXPECT_EQ(e->body, complete->requests[k].body);
    }
  }
}

// A leading zero in Content-Length is valid yet read as octal under radix
// inference, so it is the one valid construct left out here.
TEST(InterpretTest, LenientOriginsMatchTheOracleOnValidInput) {
  std::vector<Personality> registry = BuiltinRegistry();
  mutation::Rng rng(23);
  for (int i = 0; i < 2000; ++i) {
    RequestStream s{ValidInput(rng, /*leading_zeros=*/false)};
    InterpretationReport oracle = Interpret(Builtin("rfc-oracle"), s);
    for (const Personality& p : registry) {
      InterpretationReport r = InterpretWithQuirks(p, s);
      EXPECT_EQ(r, oracle) << p.name << " on " << EscapeBytes(s[0]) << "\n"
                           << analysis::CanonicalReport(r) << "vs\n"
                           << analysis::CanonicalReport(oracle);
    }
  }
}

TEST(InterpretTest, ReportShapeAndTermination) {
  std::vector<Personality> registry = BuiltinRegistry();
  for (const RequestStream& s : FuzzStreams(3000, 29)) {
    for (const Personality& p : registry) {
      InterpretationReport r = InterpretWithQuirks(p, s);
      for (size_t k = 0; k + 1 < r.entries.size(); ++k) {
        EXPECT_TRUE(std::holds_alternative<ParsedEntry>(r.entries[k])) << p.name;
      }
      if (r.termination == Termination::kLoopDetected) {
        EXPECT_EQ(p.quirks.negative_cl_guard, NegativeClGuard::kRewindUnguarded)
            << p.name;
      }
      EXPECT_NE(r.termination, Termination::kCrash);
      EXPECT_EQ(InterpretWithQuirks(p, s), r) << "nondeterministic: " << p.name;
    }
  }
}

// ---------------------------------------------------------------------------
// Transduction
// ---------------------------------------------------------------------------

TEST(TransduceTest, IdentityIsByteExact) {
  for (const RequestStream& s : FuzzStreams(2000, 31)) {
    TransduceResult t = Transduce(Builtin("identity"), s);
    ASSERT_TRUE(t.ok());
    EXPECT_EQ(*t.forwarded, s);
  }
}

TEST(TransduceTest, NormalizesLeadingZeroContentLength) {
  TransduceResult t = Transduce(
      Builtin("haproxy-like"),
      {"GET / HTTP/1.1\r\nContent-Length: 0200\r\n\r\n" + Bytes(200, 'A')});
  ASSERT_TRUE(t.ok());
  Bytes out = t.forwarded->Concatenated();
  EXPECT_NE(out.find("Content-Length: 200\r\n"), Bytes::npos);
  EXPECT_EQ(out.find("0200"), Bytes::npos);
}

TEST(TransduceTest, ForwardsInvalidChunkSizeVerbatim) {
  Bytes in =
      "POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n0_ff\r\n\r\n"
      "GET / HTTP/1.1\r\n\r\n";
  TransduceResult t = Transduce(Builtin("ats-like"), {in});
  ASSERT_TRUE(t.ok());
  EXPECT_NE(t.forwarded->Concatenated().find("\r\n0_ff\r\n"), Bytes::npos);
  // The invalid size ended the body, so the GET is a request of its own.
  ASSERT_EQ(t.requests.size(), 2u);
  EXPECT_EQ(t.requests[1].bytes, "GET / HTTP/1.1\r\n\r\n");
}

TEST(TransduceTest, StrippingExtensionsKeepsCrAfterSize) {
  TransduceResult t = Transduce(
      Builtin("akamai-mitigation-like"),
      {"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n2\r\r;a\r\nxx\r\n0\r\n\r\n"});
  ASSERT_TRUE(t.ok());
  EXPECT_NE(t.forwarded->Concatenated().find("\r\n\r\n2\r\r\nxx"), Bytes::npos);
}

TEST(TransduceTest, UnpipeliningSplitsRequests) {
  RequestStream pipelined{"GET / HTTP/1.1\r\n\r\nGET /b HTTP/1.1\r\n\r\n"};
  TransduceResult split = Transduce(Builtin("normalizing"), pipelined);
  ASSERT_TRUE(split.ok());
  EXPECT_EQ(split.forwarded->size(), 2u);
  TransduceResult kept = Transduce(Builtin("nghttpx-like"), pipelined);
  ASSERT_TRUE(kept.ok());
  EXPECT_EQ(kept.forwarded->size(), 1u);
}

TEST(TransduceTest, RejectionCarriesOffset) {
  TransduceResult t = Transduce(Builtin("haproxy-like"), {"GET / HTTP/1.1\rX: y\r\n\r\n"});
  EXPECT_FALSE(t.ok());
  EXPECT_EQ(t.rejected_offset, 14u);
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

TEST(RegistryTest, Contents) {
  std::vector<Personality> registry = BuiltinRegistry();
  EXPECT_GE(registry.size(), 12u);
  std::set<std::string> names;
  for (const Personality& p : registry) {
    EXPECT_TRUE(names.insert(p.name).second) << "duplicate " << p.name;
    EXPECT_FALSE(p.models.empty()) << p.name;
    if (p.kind == Kind::kOrigin) {
      EXPECT_TRUE(p.rewrites.empty()) << p.name;
    }
  }
  EXPECT_EQ(Builtin("rfc-oracle").quirks, QuirkSet::RfcOracle());
  EXPECT_EQ(Builtin("identity").kind, Kind::kTransducer);
  EXPECT_EQ(Builtin("puma-like").quirks.chunk_terminator_laxity,
            ChunkTerminatorLaxity::kCrlfPlusAnyTwoBytes);
  EXPECT_EQ(Builtin("relayd-like").kind, Kind::kTransducer);
  EXPECT_EQ(Builtin("relayd-like").quirks.nul_or_lf_in_value,
            NulOrLfInValue::kConcatenateToPrevious);
}

TEST(RegistryTest, RewriteNamesRoundTrip) {
  for (Rewrite r : {Rewrite::kNormalizeLeadingZeroCl, Rewrite::kStripChunkExtensions,
                    Rewrite::kStripCrBeforeSemicolon, Rewrite::kForwardInvalidChunkSize,
                    Rewrite::kForwardTrailerFields, Rewrite::kAddSpaceAfterTrailerColon,
                    Rewrite::kRejectBareCrInOws, Rewrite::kUnpipeline,
                    Rewrite::kPassthrough}) {
    EXPECT_EQ(RewriteFromName(RewriteName(r)), r);
  }
  EXPECT_FALSE(RewriteFromName("bogus").has_value());
}

}  // namespace
}  // namespace garden::personalities
