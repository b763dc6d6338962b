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

#include "garden/mutation.h"

#include <array>
#include <functional>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "garden/bytes.h"
#include "garden/fuzzer.h"
#include "garden/wire.h"
#include "gtest/gtest.h"

namespace garden::mutation {
namespace {

std::vector<RequestStream> Parents(size_t n, uint64_t seed) {
  std::vector<RequestStream> seeds = fuzzer::DefaultSeedCorpus();
  Rng rng(seed);
  std::vector<RequestStream> out;
  for (size_t i = 0; i < n; ++i) {
    RequestStream s = seeds[rng.Below(seeds.size())];
    for (uint64_t k = rng.Below(3); k > 0; --k) s = Mutate(s, rng, {}).child;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Bytes> Donors() {
  std::vector<Bytes> out;
  for (const RequestStream& s : fuzzer::DefaultSeedCorpus()) {
    out.insert(out.end(), s.elements().begin(), s.elements().end());
  }
  return out;
}

TEST(RngTest, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    uint64_t x = a.Next();
    EXPECT_EQ(x, b.Next());
    EXPECT_NE(x, c.Next());
  }
}

TEST(RngTest, BelowStaysInRange) {
  Rng r(1);
  for (uint64_t n : {1u, 2u, 3u, 7u, 1000u}) {
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.Below(n), n);
  }
}

TEST(AlphabetTest, DelimitersAreFourTimesAsLikely) {
  Rng r(3);
  std::array<size_t, 256> counts{};
  constexpr size_t kDraws = 2000000;
  for (size_t i = 0; i < kDraws; ++i) ++counts[DrawAlphabetByte(r)];
  std::string weighted = "\r\n";
  weighted += std::string(1, '\0');
  weighted += " \t;:,0123456789x_-";
  ASSERT_EQ(weighted.size(), 21u);
  size_t total_weight = 256 + 3 * weighted.size();
  for (int c = 0; c < 256; ++c) {
    bool heavy = weighted.find(static_cast<char>(c)) != std::string::npos;
    EXPECT_EQ(IsWeightedByte(c), heavy) << c;
    double expected = static_cast<double>(kDraws) * (heavy ? 4 : 1) / total_weight;
    EXPECT_NEAR(counts[c], expected, expected * 0.1) << c;
  }
}

// ---------------------------------------------------------------------------
// Determinism, replay, closure
// ---------------------------------------------------------------------------

TEST(MutateTest, Deterministic) {
  std::vector<Bytes> donors = Donors();
  std::vector<RequestStream> parents = Parents(1000, 1);
  for (size_t i = 0; i < parents.size(); ++i) {
    Rng a(i), b(i);
    Mutation x = Mutate(parents[i], a, {}, donors);
    Mutation y = Mutate(parents[i], b, {}, donors);
    ASSERT_EQ(x.child, y.child);
    ASSERT_EQ(x.record, y.record);
  }
}

TEST(MutateTest, FixedSeedOnOneElement) {
  RequestStream s{"GET / HTTP/1.1\r\n\r\n"};
  Rng a(42), b(42);
  EXPECT_EQ(MutateBytes(s, a).child, MutateBytes(s, b).child);
}

TEST(MutateTest, EveryKindReplays) {
  std::vector<Bytes> donors = Donors();
  std::set<MutationKind> kinds;
  std::set<GrammarRule> rules;
  Rng rng(8);
  for (const RequestStream& parent : Parents(5000, 2)) {
    Mutation m = Mutate(parent, rng, {}, donors);
    kinds.insert(m.record.kind);
    if (m.record.rule) rules.insert(*m.record.rule);
    absl::StatusOr<RequestStream> again = Apply(m.record, parent);
    ASSERT_TRUE(again.ok()) << again.status();
    ASSERT_EQ(*again, m.child) << m.record.Describe();

    absl::StatusOr<MutationRecord> back =
        MutationRecordFromJson(MutationRecordToJson(m.record));
    ASSERT_TRUE(back.ok()) << back.status();
    ASSERT_EQ(*back, m.record);
  }
  EXPECT_EQ(kinds.size(), 8u);
  EXPECT_EQ(rules.size(), AllGrammarRules().size());
}

TEST(MutateTest, OutputsStayNonEmptyAndCapped) {
  Rng rng(4);
  for (const RequestStream& parent : Parents(2000, 3)) {
    size_t cap = parent.TotalBytes() + 1;
    Mutation m = Mutate(parent, rng, {}, Donors(), cap);
    ASSERT_GE(m.child.size(), 1u);
    ASSERT_LE(m.child.TotalBytes(), cap);
  }
}

TEST(MutateTest, OversizeChildIsTruncatedAndFlagged) {
  RequestStream s{Bytes(100, 'a')};
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    Mutation m = MutateStream(s, rng, {}, 100);
    ASSERT_LE(m.child.TotalBytes(), 100u);
    if (m.record.insert_form == InsertForm::kDuplicate) {
      EXPECT_TRUE(m.record.truncated);
      EXPECT_EQ(*Apply(m.record, s), m.child);
      return;
    }
  }
  FAIL() << "no duplicate insert drawn";
}

TEST(ApplyTest, MissingLocusIsAnError) {
  MutationRecord r;
  r.kind = MutationKind::kByteDelete;
  r.element = 3;
  EXPECT_FALSE(Apply(r, RequestStream{"x"}).ok());
  r.element = 0;
  r.offset = 5;
  r.length = 1;
  EXPECT_FALSE(Apply(r, RequestStream{"x"}).ok());
}

// ---------------------------------------------------------------------------
// Byte mutations
// ---------------------------------------------------------------------------

TEST(MutateBytesTest, EditsOneElementByOneToFourBytes) {
  Rng rng(6);
  for (const RequestStream& parent : Parents(2000, 4)) {
    Mutation m = MutateBytes(parent, rng);
    ASSERT_EQ(m.child.size(), parent.size());
    size_t differing = 0;
    for (size_t i = 0; i < parent.size(); ++i) differing += parent[i] != m.child[i];
    EXPECT_LE(differing, 1u);
    size_t n = m.record.kind == MutationKind::kByteInsert ? m.record.bytes.size()
                                                          : m.record.length;
    EXPECT_GE(n, 1u);
    EXPECT_LE(n, 4u);
  }
}

TEST(MutateBytesTest, DeleteThenReinsertIsIdentity) {
  RequestStream parent{"POST / HTTP/1.1\r\nContent-Length: 5\r\n\r\nhello"};
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Mutation m = MutateBytes(parent, rng);
    if (m.record.kind != MutationKind::kByteDelete) continue;
    MutationRecord back;
    back.kind = MutationKind::kByteInsert;
    back.element = m.record.element;
    back.offset = m.record.offset;
    back.bytes = parent[m.record.element].substr(m.record.offset, m.record.length);
    EXPECT_EQ(*Apply(back, m.child), parent);
    return;
  }
  FAIL() << "no delete drawn";
}

TEST(MutateBytesTest, UnderscoreInChunkSize) {
  // Pinned by a seed search: seed 24400 replaces one 'f' of "ff" with '_'.
  RequestStream s{"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\nff\r\n"};
  Rng rng(24400);
  Mutation m = MutateBytes(s, rng);
  EXPECT_EQ(m.record.kind, MutationKind::kByteReplace);
  EXPECT_NE(m.child[0].find("\r\n_f\r\n"), Bytes::npos) << EscapeBytes(m.child[0]);
}

TEST(MutateBytesTest, EmptyElementGetsAnInsert) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(MutateBytes(RequestStream{""}, rng).record.kind,
              MutationKind::kByteInsert);
  }
}

// ---------------------------------------------------------------------------
// Stream mutations
// ---------------------------------------------------------------------------

TEST(MutateStreamTest, CombineConcatenates) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Mutation m = MutateStream(RequestStream{"A", "B"}, rng);
    if (m.record.kind != MutationKind::kStreamCombine) continue;
    EXPECT_EQ(m.child, (RequestStream{"AB"}));
    return;
  }
  FAIL() << "no combine drawn";
}

TEST(MutateStreamTest, SingleElementIsNeverDeleted) {
  for (uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed);
    Mutation m = MutateStream(RequestStream{"x"}, rng);
    EXPECT_EQ(m.record.kind, MutationKind::kStreamInsert);
    EXPECT_EQ(m.child.size(), 2u);
  }
}

TEST(MutateStreamTest, CountChangesByOneAndSplitsPreserveBytes) {
  std::vector<Bytes> donors = Donors();
  Rng rng(9);
  size_t splits = 0;
  for (const RequestStream& parent : Parents(3000, 5)) {
    Mutation m = MutateStream(parent, rng, donors);
    long delta = static_cast<long>(m.child.size()) - static_cast<long>(parent.size());
    switch (m.record.kind) {
      case MutationKind::kStreamInsert:
        EXPECT_EQ(delta, 1);
        if (m.record.insert_form == InsertForm::kSplit) {
          ++splits;
          EXPECT_EQ(m.child.Concatenated(), parent.Concatenated());
        }
        break;
      case MutationKind::kStreamReplace:
        EXPECT_EQ(delta, 0);
        break;
      case MutationKind::kStreamCombine:
        EXPECT_EQ(delta, -1);
        EXPECT_EQ(m.child.Concatenated(), parent.Concatenated());
        break;
      case MutationKind::kStreamDelete:
        EXPECT_EQ(delta, -1);
        break;
      default:
        ADD_FAILURE() << "unexpected kind " << m.record.Describe();
    }
  }
  EXPECT_GT(splits, 0u);
}

// ---------------------------------------------------------------------------
// Grammar mutations
// ---------------------------------------------------------------------------

std::optional<Bytes> FirstMatch(const RequestStream& s, GrammarRule rule,
                                const std::function<bool(const Bytes&)>& want) {
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    std::optional<Mutation> m = MutateGrammarWith(s, rng, rule);
    if (!m) return std::nullopt;
    if (want(m->child[0])) return m->child[0];
  }
  return std::nullopt;
}

TEST(MutateGrammarTest, SwapMethod) {
  std::optional<Bytes> got =
      FirstMatch({"GET / HTTP/1.1\r\n\r\n"}, GrammarRule::kSwapMethod,
                 [](const Bytes& b) { return b.rfind("DELETE ", 0) == 0; });
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(*got, "DELETE / HTTP/1.1\r\n\r\n");
}

TEST(MutateGrammarTest, SetContentLengthRaw) {
  RequestStream s{"POST / HTTP/1.1\r\nContent-Length: 200\r\n\r\n" + Bytes(200, 'A')};
  std::set<Bytes> forms;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::optional<Mutation> m = MutateGrammarWith(s, rng, GrammarRule::kSetClRaw);
    ASSERT_TRUE(m.has_value());
    std::optional<Bytes> raw = wire::ParseLenient(m->child[0])[0].ContentLengthRaw();
    ASSERT_TRUE(raw.has_value());
    forms.insert(*raw);
  }
  EXPECT_TRUE(forms.contains("0200"));
  EXPECT_TRUE(forms.contains("0xc8"));
  bool underscore = false;
  for (const Bytes& f : forms) underscore |= f.find('_') != Bytes::npos;
  EXPECT_TRUE(underscore);
}

TEST(MutateGrammarTest, PrependComma) {
  std::optional<Bytes> got = FirstMatch(
      {"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n0\r\n\r\n"},
      GrammarRule::kPrependComma,
      [](const Bytes& b) { return b.find("Transfer-Encoding: ,chunked\r\n") != Bytes::npos; });
  EXPECT_TRUE(got.has_value());
}

TEST(MutateGrammarTest, ToggleFramingRecomputesLengths) {
  RequestStream s{"POST / HTTP/1.1\r\nContent-Length: 5\r\n\r\nhello"};
  Rng rng(0);
  std::optional<Mutation> m = MutateGrammarWith(s, rng, GrammarRule::kToggleFraming);
  ASSERT_TRUE(m.has_value());
  wire::ParseOutcome o = wire::ParseStrict(m->child[0]);
  const auto* c = std::get_if<wire::ParseComplete>(&o);
  ASSERT_NE(c, nullptr) << EscapeBytes(m->child[0]);
  EXPECT_TRUE(c->requests[0].IsChunked());
  EXPECT_EQ(c->requests[0].body, "hello");
}

TEST(MutateGrammarTest, InapplicableRuleIsReported) {
  Rng rng(0);
  EXPECT_FALSE(MutateGrammarWith({"GET / HTTP/1.1\r\n\r\n"}, rng,
                                 GrammarRule::kPrependComma)
                   .has_value());
}

TEST(MutateGrammarTest, UnstructuredInputFallsBackToBytes) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Mutation m = MutateGrammar(RequestStream{"\x01\x02"}, rng);
    EXPECT_NE(m.record.kind, MutationKind::kGrammar);
  }
}

TEST(MutateGrammarTest, RuleNamesRoundTrip) {
  for (GrammarRule r : AllGrammarRules()) {
    EXPECT_EQ(GrammarRuleFromName(GrammarRuleName(r)), r);
  }
}

// From the seeds, a random walk reaches every discrepancy class the fixtures
// model.
TEST(MutateGrammarTest, WalkReachesDiscrepancyClasses) {
  std::vector<RequestStream> seeds = fuzzer::DefaultSeedCorpus();
  std::vector<Bytes> donors = Donors();
  std::map<std::string, bool> seen = {{"bare-cr", false},
                                      {"underscore", false},
                                      {"0x", false},
                                      {"leading-zero-cl", false},
                                      {",chunked", false}};
  const std::regex leading_zero("0[0-9]+");
  Rng rng(2024);
  for (int walk = 0; walk < 1000; ++walk) {
    RequestStream s = seeds[rng.Below(seeds.size())];
    for (int step = 0; step < 4; ++step) {
      s = Mutate(s, rng, {}, donors).child;
      for (const Bytes& e : s.elements()) {
        for (size_t i = 0; i < e.size(); ++i) {
          if (e[i] == '\r' && (i + 1 == e.size() || e[i + 1] != '\n')) {
            seen["bare-cr"] = true;
          }
        }
        for (const wire::HttpRequestModel& m : wire::ParseLenient(e)) {
          std::vector<Bytes> ints;
          if (std::optional<Bytes> cl = m.ContentLengthRaw()) {
            ints.push_back(*cl);
            if (std::regex_match(*cl, leading_zero)) seen["leading-zero-cl"] = true;
          }
          for (const wire::ChunkModel& c : m.chunks) ints.push_back(c.size_raw);
          for (const Bytes& raw : ints) {
            if (raw.find('_') != Bytes::npos) seen["underscore"] = true;
            if (raw.rfind("0x", 0) == 0) seen["0x"] = true;
          }
          const wire::HeaderLine* te = m.FindHeader("transfer-encoding");
          if (te != nullptr && te->value.rfind(",chunked", 0) == 0) {
            seen[",chunked"] = true;
          }
        }
      }
    }
  }
  for (const auto& [what, reached] : seen) EXPECT_TRUE(reached) << what;
}

}  // namespace
}  // namespace garden::mutation
