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

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "garden/wire.h"

namespace garden::mutation {

using wire::HeaderLine;
using wire::HttpRequestModel;

uint64_t Rng::Next() {
  uint64_t z = seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t Rng::Below(uint64_t n) {
  // Lemire's multiply-and-reject; unbiased for every n.
  unsigned __int128 m = static_cast<unsigned __int128>(Next()) * n;
  uint64_t low = static_cast<uint64_t>(m);
  if (low < n) {
    uint64_t threshold = -n % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(Next()) * n;
      low = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

namespace {

constexpr std::array<unsigned char, 21> kWeighted = {
    '\r', '\n', '\0', ' ', '\t', ';', ':', ',', '0', '1', '2',
    '3',  '4',  '5',  '6', '7',  '8', '9', 'x', '_', '-'};
constexpr uint64_t kWeight = 4;
constexpr uint64_t kAlphabetTotal = 256 + (kWeight - 1) * kWeighted.size();

}  // namespace

bool IsWeightedByte(unsigned char c) {
  return std::find(kWeighted.begin(), kWeighted.end(), c) != kWeighted.end();
}

unsigned char DrawAlphabetByte(Rng& rng) {
  uint64_t r = rng.Below(kAlphabetTotal);
  if (r < 256) return static_cast<unsigned char>(r);
  return kWeighted[(r - 256) / (kWeight - 1)];
}

// ---------------------------------------------------------------------------
// Names and records
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<MutationKind, const char*>, 8> kKindNames = {{
    {MutationKind::kByteInsert, "byte-insert"},
    {MutationKind::kByteReplace, "byte-replace"},
    {MutationKind::kByteDelete, "byte-delete"},
    {MutationKind::kStreamInsert, "stream-insert"},
    {MutationKind::kStreamReplace, "stream-replace"},
    {MutationKind::kStreamCombine, "stream-combine"},
    {MutationKind::kStreamDelete, "stream-delete"},
    {MutationKind::kGrammar, "grammar"},
}};

constexpr std::array<std::pair<GrammarRule, const char*>, 8> kRuleNames = {{
    {GrammarRule::kSwapMethod, "swap-method"},
    {GrammarRule::kToggleFraming, "toggle-framing"},
    {GrammarRule::kDuplicateHeader, "duplicate-header"},
    {GrammarRule::kSetClRaw, "set-cl-raw"},
    {GrammarRule::kAppendChunkExtension, "append-chunk-extension"},
    {GrammarRule::kChangeLineTerminator, "change-line-terminator"},
    {GrammarRule::kInjectTrailer, "inject-trailer"},
    {GrammarRule::kPrependComma, "prepend-comma"},
}};

constexpr std::array<GrammarRule, 8> kRules = {
    GrammarRule::kSwapMethod,           GrammarRule::kToggleFraming,
    GrammarRule::kDuplicateHeader,      GrammarRule::kSetClRaw,
    GrammarRule::kAppendChunkExtension, GrammarRule::kChangeLineTerminator,
    GrammarRule::kInjectTrailer,        GrammarRule::kPrependComma};

constexpr std::array<std::pair<InsertForm, const char*>, 3> kFormNames = {{
    {InsertForm::kDuplicate, "duplicate"},
    {InsertForm::kEmpty, "empty"},
    {InsertForm::kSplit, "split"},
}};

template <typename E, size_t N>
std::optional<E> Lookup(const std::array<std::pair<E, const char*>, N>& table,
                        std::string_view name) {
  for (const auto& [e, n] : table) {
    if (name == n) return e;
  }
  return std::nullopt;
}

template <typename E, size_t N>
std::string NameOf(const std::array<std::pair<E, const char*>, N>& table, E e) {
  for (const auto& [v, n] : table) {
    if (v == e) return n;
  }
  return "";
}

}  // namespace

std::string MutationKindName(MutationKind k) { return NameOf(kKindNames, k); }
std::string GrammarRuleName(GrammarRule r) { return NameOf(kRuleNames, r); }
std::optional<GrammarRule> GrammarRuleFromName(std::string_view name) {
  return Lookup(kRuleNames, name);
}
std::span<const GrammarRule> AllGrammarRules() { return kRules; }

std::string MutationRecord::Describe() const {
  std::string out = MutationKindName(kind);
  switch (kind) {
    case MutationKind::kByteInsert:
    case MutationKind::kByteReplace:
      absl::StrAppend(&out, " element ", element, " offset ", offset, " \"",
                      EscapeBytes(bytes), "\"");
      break;
    case MutationKind::kByteDelete:
      absl::StrAppend(&out, " element ", element, " offset ", offset,
                      " length ", length);
      break;
    case MutationKind::kStreamInsert:
      absl::StrAppend(&out, " ", NameOf(kFormNames, insert_form), " element ",
                      element);
      if (insert_form == InsertForm::kSplit) absl::StrAppend(&out, " at ", offset);
      break;
    case MutationKind::kStreamReplace:
    case MutationKind::kStreamCombine:
    case MutationKind::kStreamDelete:
      absl::StrAppend(&out, " element ", element);
      break;
    case MutationKind::kGrammar:
      absl::StrAppend(&out, " ", rule ? GrammarRuleName(*rule) : "?", " at ", path);
      break;
  }
  if (truncated) absl::StrAppend(&out, " (truncated)");
  return out;
}

nlohmann::json MutationRecordToJson(const MutationRecord& r) {
  nlohmann::json j = {
      {"kind", MutationKindName(r.kind)},
      {"element", r.element},
      {"offset", r.offset},
      {"length", r.length},
      {"bytes", Base64Encode(r.bytes)},
      {"insert_form", NameOf(kFormNames, r.insert_form)},
      {"path", r.path},
      {"max_bytes", r.max_bytes},
      {"truncated", r.truncated},
  };
  if (r.rule) j["rule"] = GrammarRuleName(*r.rule);
  return j;
}

absl::StatusOr<MutationRecord> MutationRecordFromJson(const nlohmann::json& j) {
  try {
    MutationRecord r;
    std::optional<MutationKind> kind =
        Lookup(kKindNames, j.at("kind").get<std::string>());
    if (!kind) return absl::InvalidArgumentError("unknown mutation kind");
    r.kind = *kind;
    r.element = j.at("element").get<size_t>();
    r.offset = j.at("offset").get<size_t>();
    r.length = j.at("length").get<size_t>();
    std::optional<Bytes> bytes = Base64Decode(j.at("bytes").get<std::string>());
    if (!bytes) return absl::InvalidArgumentError("bad base64 in mutation bytes");
    r.bytes = std::move(*bytes);
    std::optional<InsertForm> form =
        Lookup(kFormNames, j.at("insert_form").get<std::string>());
    if (!form) return absl::InvalidArgumentError("unknown insert form");
    r.insert_form = *form;
    r.path = j.at("path").get<std::string>();
    r.max_bytes = j.at("max_bytes").get<size_t>();
    r.truncated = j.at("truncated").get<bool>();
    if (j.contains("rule")) {
      r.rule = GrammarRuleFromName(j["rule"].get<std::string>());
      if (!r.rule) return absl::InvalidArgumentError("unknown grammar rule");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("mutation record: ", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

absl::StatusOr<RequestStream> Apply(const MutationRecord& r,
                                    const RequestStream& parent) {
  std::vector<Bytes> e = parent.elements();
  auto bad_locus = [&] {
    return absl::OutOfRangeError(
        absl::StrCat("mutation locus does not exist in parent: ", r.Describe()));
  };
  if (r.element >= e.size()) return bad_locus();
  Bytes& target = e[r.element];
  switch (r.kind) {
    case MutationKind::kByteInsert:
      if (r.offset > target.size()) return bad_locus();
      target.insert(r.offset, r.bytes);
      break;
    case MutationKind::kByteReplace:
      if (r.offset + r.length > target.size()) return bad_locus();
      target.replace(r.offset, r.length, r.bytes);
      break;
    case MutationKind::kByteDelete:
      if (r.offset + r.length > target.size()) return bad_locus();
      target.erase(r.offset, r.length);
      break;
    case MutationKind::kStreamInsert:
      switch (r.insert_form) {
        case InsertForm::kDuplicate:
          e.insert(e.begin() + r.element + 1, target);
          break;
        case InsertForm::kEmpty:
          e.insert(e.begin() + r.element, Bytes());
          break;
        case InsertForm::kSplit: {
          if (r.offset > target.size()) return bad_locus();
          Bytes tail = target.substr(r.offset);
          target.resize(r.offset);
          e.insert(e.begin() + r.element + 1, std::move(tail));
          break;
        }
      }
      break;
    case MutationKind::kStreamReplace:
    case MutationKind::kGrammar:
      target = r.bytes;
      break;
    case MutationKind::kStreamCombine:
      if (r.element + 1 >= e.size()) return bad_locus();
      target += e[r.element + 1];
      e.erase(e.begin() + r.element + 1);
      break;
    case MutationKind::kStreamDelete:
      if (e.size() < 2) return bad_locus();
      e.erase(e.begin() + r.element);
      break;
  }
  RequestStream child(std::move(e));
  child.TruncateTo(r.max_bytes);
  return child;
}

namespace {

Mutation Finish(const RequestStream& parent, MutationRecord record) {
  size_t cap = record.max_bytes;
  record.max_bytes = SIZE_MAX;
  // The record was built against this parent, so replay cannot fail.
  RequestStream child = *Apply(record, parent);
  record.max_bytes = cap;
  record.truncated = child.TruncateTo(cap);
  return Mutation{std::move(child), std::move(record)};
}

Bytes DrawBytes(Rng& rng, size_t n) {
  Bytes out;
  for (size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(DrawAlphabetByte(rng)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Byte and stream mutations
// ---------------------------------------------------------------------------

Mutation MutateBytes(const RequestStream& s, Rng& rng, size_t max_bytes) {
  MutationRecord r;
  r.max_bytes = max_bytes;
  r.element = rng.Below(s.size());
  const Bytes& target = s[r.element];
  size_t count = 1 + rng.Below(4);
  uint64_t op = target.empty() ? 0 : rng.Below(3);
  if (op == 0) {
    r.kind = MutationKind::kByteInsert;
    r.offset = rng.Below(target.size() + 1);
    r.bytes = DrawBytes(rng, count);
  } else {
    r.kind = op == 1 ? MutationKind::kByteReplace : MutationKind::kByteDelete;
    r.offset = rng.Below(target.size());
    r.length = std::min(count, target.size() - r.offset);
    if (op == 1) r.bytes = DrawBytes(rng, r.length);
  }
  return Finish(s, std::move(r));
}

Mutation MutateStream(const RequestStream& s, Rng& rng,
                      std::span<const Bytes> corpus, size_t max_bytes) {
  MutationRecord r;
  r.max_bytes = max_bytes;
  std::vector<MutationKind> kinds = {MutationKind::kStreamInsert};
  if (!corpus.empty()) kinds.push_back(MutationKind::kStreamReplace);
  if (s.size() >= 2) {
    kinds.push_back(MutationKind::kStreamCombine);
    kinds.push_back(MutationKind::kStreamDelete);
  }
  r.kind = kinds[rng.Below(kinds.size())];
  switch (r.kind) {
    case MutationKind::kStreamInsert: {
      r.element = rng.Below(s.size());
      r.insert_form = static_cast<InsertForm>(rng.Below(3));
      if (r.insert_form == InsertForm::kSplit) {
        r.offset = rng.Below(s[r.element].size() + 1);
      }
      break;
    }
    case MutationKind::kStreamReplace:
      r.element = rng.Below(s.size());
      r.bytes = corpus[rng.Below(corpus.size())];
      break;
    case MutationKind::kStreamCombine:
      r.element = rng.Below(s.size() - 1);
      break;
    default:
      r.element = rng.Below(s.size());
      break;
  }
  return Finish(s, std::move(r));
}

// ---------------------------------------------------------------------------
// Grammar mutations
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<const char*, 9> kMethods = {
    "GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH", "TRACE", "CONNECT"};
constexpr std::array<const char*, 3> kTerminators = {"\r\n", "\n", "\r"};
constexpr std::array<const char*, 7> kExtensions = {
    ";ext", ";a=b", ";a=\"x\"", " ;a", "\t;a", "\r;a", ";"};
constexpr std::array<std::pair<const char*, const char*>, 3> kTrailers = {{
    {"X-Trailer", "1"},
    {"Content-Length", "0"},
    {"Host", "evil"},
}};

std::optional<size_t> FindHeaderIndex(const std::vector<HeaderLine>& headers,
                                      BytesView name) {
  for (size_t i = 0; i < headers.size(); ++i) {
    if (EqualsIgnoreCase(headers[i].name, name)) return i;
  }
  return std::nullopt;
}

std::vector<size_t> HeaderIndices(const std::vector<HeaderLine>& headers,
                                  BytesView name) {
  std::vector<size_t> out;
  for (size_t i = 0; i < headers.size(); ++i) {
    if (EqualsIgnoreCase(headers[i].name, name)) out.push_back(i);
  }
  return out;
}

bool HasHead(const HttpRequestModel& m) {
  return m.structured && !m.head_terminator.empty();
}

bool HasTrailerSection(const HttpRequestModel& m) {
  return m.IsChunked() && !m.chunks.empty() && m.chunks.back().size_value == 0u;
}

struct TerminatorSite {
  Bytes* terminator;
  std::string path;
};

std::vector<TerminatorSite> TerminatorSites(HttpRequestModel& m) {
  std::vector<TerminatorSite> out;
  auto add = [&](Bytes& t, std::string path) {
    if (!t.empty()) out.push_back({&t, std::move(path)});
  };
  if (!m.structured) return out;
  add(m.start_terminator, "start_line");
  for (size_t i = 0; i < m.headers.size(); ++i) {
    add(m.headers[i].terminator, absl::StrCat("headers[", i, "]"));
  }
  add(m.head_terminator, "head_end");
  if (m.IsChunked()) {
    for (size_t i = 0; i < m.chunks.size(); ++i) {
      add(m.chunks[i].size_terminator, absl::StrCat("chunks[", i, "].size_line"));
      add(m.chunks[i].data_terminator, absl::StrCat("chunks[", i, "].data_end"));
    }
    for (size_t i = 0; i < m.trailers.size(); ++i) {
      add(m.trailers[i].terminator, absl::StrCat("trailers[", i, "]"));
    }
    add(m.trailer_terminator, "trailer_end");
  }
  return out;
}

bool Applicable(GrammarRule rule, HttpRequestModel& m) {
  switch (rule) {
    case GrammarRule::kSwapMethod:
      return m.structured && !m.method.empty();
    case GrammarRule::kToggleFraming:
      return HasHead(m);
    case GrammarRule::kDuplicateHeader:
      return m.structured && !m.headers.empty();
    case GrammarRule::kSetClRaw:
      return HasHead(m) && FindHeaderIndex(m.headers, "content-length").has_value();
    case GrammarRule::kAppendChunkExtension:
      return HasHead(m) && m.IsChunked() && !m.chunks.empty();
    case GrammarRule::kChangeLineTerminator:
      return !TerminatorSites(m).empty();
    case GrammarRule::kInjectTrailer:
      return HasTrailerSection(m);
    case GrammarRule::kPrependComma:
      return m.structured &&
             FindHeaderIndex(m.headers, "transfer-encoding").has_value();
  }
  return false;
}

HeaderLine MakeHeader(BytesView name, BytesView value) {
  return HeaderLine{Bytes(name), ": ", Bytes(value), "\r\n"};
}

std::string HexOf(uint64_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  do {
    out.insert(out.begin(), kHex[n & 15]);
    n >>= 4;
  } while (n != 0);
  return out;
}

// Removes every header named `name`; returns where the first one was.
std::optional<size_t> RemoveHeaders(std::vector<HeaderLine>& headers,
                                    BytesView name) {
  std::optional<size_t> first;
  for (size_t i = headers.size(); i-- > 0;) {
    if (EqualsIgnoreCase(headers[i].name, name)) {
      headers.erase(headers.begin() + i);
      first = i;
    }
  }
  return first;
}

void ToggleFraming(HttpRequestModel& m) {
  if (m.IsChunked()) {
    std::optional<size_t> te = RemoveHeaders(m.headers, "transfer-encoding");
    std::optional<size_t> cl = RemoveHeaders(m.headers, "content-length");
    size_t at = std::min(te.value_or(m.headers.size()), cl.value_or(m.headers.size()));
    m.headers.insert(m.headers.begin() + at,
                     MakeHeader("Content-Length", std::to_string(m.body.size())));
    m.framing = wire::Framing::kContentLength;
    m.chunks.clear();
    m.trailers.clear();
    m.trailer_terminator.clear();
    return;
  }
  std::optional<size_t> cl = RemoveHeaders(m.headers, "content-length");
  size_t at = cl.value_or(m.headers.size());
  m.headers.insert(m.headers.begin() + at,
                   MakeHeader("Transfer-Encoding", "chunked"));
  m.framing = wire::Framing::kChunked;
  m.chunks.clear();
  if (!m.body.empty()) {
    m.chunks.push_back(wire::ChunkModel{HexOf(m.body.size()), m.body.size(), "",
                                        "\r\n", m.body, "\r\n"});
  }
  m.chunks.push_back(wire::ChunkModel{"0", 0, "", "\r\n", "", ""});
  m.trailers.clear();
  m.trailer_terminator = "\r\n";
}

// One of "0"+n, n with an underscore inside, or "0x"+hex(n).
Bytes ClRawVariant(uint64_t n, Rng& rng) {
  std::string digits = std::to_string(n);
  switch (rng.Below(3)) {
    case 0:
      return "0" + digits;
    case 1:
      if (digits.size() >= 2) {
        size_t at = 1 + rng.Below(digits.size() - 1);
        return digits.substr(0, at) + "_" + digits.substr(at);
      }
      return "0_" + digits;
    default:
      return "0x" + HexOf(n);
  }
}

// Applies `rule` to `m`; returns the path of what changed.
std::string ApplyRule(GrammarRule rule, HttpRequestModel& m, Rng& rng) {
  switch (rule) {
    case GrammarRule::kSwapMethod: {
      std::vector<const char*> pool;
      for (const char* method : kMethods) {
        if (m.method != method) pool.push_back(method);
      }
      m.method = pool[rng.Below(pool.size())];
      return "method";
    }
    case GrammarRule::kToggleFraming:
      ToggleFraming(m);
      return "framing";
    case GrammarRule::kDuplicateHeader: {
      size_t i = rng.Below(m.headers.size());
      m.headers.insert(m.headers.begin() + i + 1, m.headers[i]);
      return absl::StrCat("headers[", i, "]");
    }
    case GrammarRule::kSetClRaw: {
      std::vector<size_t> idx = HeaderIndices(m.headers, "content-length");
      size_t i = idx[rng.Below(idx.size())];
      m.headers[i].value = ClRawVariant(m.body.size(), rng);
      return absl::StrCat("headers[", i, "].value");
    }
    case GrammarRule::kAppendChunkExtension: {
      size_t i = rng.Below(m.chunks.size());
      m.chunks[i].extension_raw += kExtensions[rng.Below(kExtensions.size())];
      return absl::StrCat("chunks[", i, "].extension");
    }
    case GrammarRule::kChangeLineTerminator: {
      std::vector<TerminatorSite> sites = TerminatorSites(m);
      TerminatorSite& site = sites[rng.Below(sites.size())];
      std::vector<const char*> pool;
      for (const char* t : kTerminators) {
        if (*site.terminator != t) pool.push_back(t);
      }
      *site.terminator = pool[rng.Below(pool.size())];
      return site.path;
    }
    case GrammarRule::kInjectTrailer: {
      const auto& [name, value] = kTrailers[rng.Below(kTrailers.size())];
      m.trailers.push_back(MakeHeader(name, value));
      if (m.trailer_terminator.empty()) m.trailer_terminator = "\r\n";
      return absl::StrCat("trailers[", m.trailers.size() - 1, "]");
    }
    case GrammarRule::kPrependComma: {
      std::vector<size_t> idx = HeaderIndices(m.headers, "transfer-encoding");
      size_t i = idx[rng.Below(idx.size())];
      m.headers[i].value.insert(0, ",");
      return absl::StrCat("headers[", i, "].value");
    }
  }
  return "";
}

}  // namespace

std::optional<Mutation> MutateGrammarWith(const RequestStream& s, Rng& rng,
                                          GrammarRule rule, size_t max_bytes) {
  std::vector<std::vector<HttpRequestModel>> parsed;
  std::vector<std::pair<size_t, size_t>> candidates;
  for (size_t e = 0; e < s.size(); ++e) {
    parsed.push_back(s[e].empty() ? std::vector<HttpRequestModel>{}
                                  : wire::ParseLenient(s[e]));
    for (size_t k = 0; k < parsed[e].size(); ++k) {
      if (Applicable(rule, parsed[e][k])) candidates.emplace_back(e, k);
    }
  }
  if (candidates.empty()) return std::nullopt;
  auto [e, k] = candidates[rng.Below(candidates.size())];
  std::string path = ApplyRule(rule, parsed[e][k], rng);
  MutationRecord r;
  r.kind = MutationKind::kGrammar;
  r.rule = rule;
  r.element = e;
  r.bytes = wire::SerializeAll(parsed[e]);
  r.path = absl::StrCat("element[", e, "].request[", k, "].", path);
  r.max_bytes = max_bytes;
  return Finish(s, std::move(r));
}

Mutation MutateGrammar(const RequestStream& s, Rng& rng, size_t max_bytes) {
  for (int attempt = 0; attempt < kGrammarRetries; ++attempt) {
    GrammarRule rule = kRules[rng.Below(kRules.size())];
    if (std::optional<Mutation> m = MutateGrammarWith(s, rng, rule, max_bytes)) {
      return std::move(*m);
    }
  }
  return MutateBytes(s, rng, max_bytes);
}

Mutation Mutate(const RequestStream& s, Rng& rng, const ClassWeights& w,
                std::span<const Bytes> corpus, size_t max_bytes) {
  uint64_t total = static_cast<uint64_t>(std::max(0, w.byte)) +
                   std::max(0, w.stream) + std::max(0, w.grammar);
  if (total == 0) return MutateBytes(s, rng, max_bytes);
  uint64_t r = rng.Below(total);
  if (r < static_cast<uint64_t>(std::max(0, w.byte))) {
    return MutateBytes(s, rng, max_bytes);
  }
  r -= std::max(0, w.byte);
  if (r < static_cast<uint64_t>(std::max(0, w.stream))) {
    return MutateStream(s, rng, corpus, max_bytes);
  }
  return MutateGrammar(s, rng, max_bytes);
}

}  // namespace garden::mutation
