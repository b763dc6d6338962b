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

#include "garden/analysis.h"

#include <algorithm>
#include <array>
#include <utility>

#include "absl/strings/str_cat.h"

namespace garden::analysis {

using personalities::ParsedEntry;
using personalities::Rejection;
using personalities::ReportEntry;
using personalities::Termination;

absl::StatusOr<Observation> PersonalityOrigin::Observe(
    const RequestStream& stream, bool traced) {
  Observation out;
  if (!traced) {
    out.report = personalities::Interpret(p_, stream);
    return out;
  }
  // clear, send, collect, dump: the same order used for external targets.
  recorder_.Clear();
  out.report = personalities::Interpret(p_, stream, &recorder_);
  out.signature = coverage::ComputePathSignature(recorder_.map());
  return out;
}

absl::StatusOr<std::optional<RequestStream>> PersonalityTransducer::Forward(
    const RequestStream& stream) {
  personalities::TransduceResult r = personalities::Transduce(p_, stream);
  return r.forwarded;
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<Allowance, const char*>, 10> kCatalog = {{
    {Allowance::kAcceptsHttp09, "accepts-http09"},
    {Allowance::kRejectsEmptyPost411, "rejects-empty-post-411"},
    {Allowance::kAcceptsLfChunkLines, "accepts-lf-chunk-lines"},
    {Allowance::kAcceptsBareCrHeaderLines, "accepts-bare-cr-header-lines"},
    {Allowance::kIgnoresUnderscoresInInts, "ignores-underscores-in-ints"},
    {Allowance::kRadixInfersLeadingZero, "radix-infers-leading-zero"},
    {Allowance::kAccepts0xPrefix, "accepts-0x-prefix"},
    {Allowance::kTreatsCommaChunkedDistinct, "treats-comma-chunked-distinct"},
    {Allowance::kLaxChunkTerminator, "lax-chunk-terminator"},
    {Allowance::kConcatenatesNulLfValues, "concatenates-nul-lf-values"},
}};

constexpr std::array<Allowance, 10> kCatalogOrder = {
    Allowance::kAcceptsHttp09,           Allowance::kRejectsEmptyPost411,
    Allowance::kAcceptsLfChunkLines,     Allowance::kAcceptsBareCrHeaderLines,
    Allowance::kIgnoresUnderscoresInInts, Allowance::kRadixInfersLeadingZero,
    Allowance::kAccepts0xPrefix,         Allowance::kTreatsCommaChunkedDistinct,
    Allowance::kLaxChunkTerminator,      Allowance::kConcatenatesNulLfValues,
};

}  // namespace

std::span<const Allowance> AllowanceCatalog() { return kCatalogOrder; }

std::string AllowanceName(Allowance a) {
  for (const auto& [allowance, name] : kCatalog) {
    if (allowance == a) return name;
  }
  return "";
}

std::optional<Allowance> AllowanceFromName(std::string_view name) {
  for (const auto& [allowance, n] : kCatalog) {
    if (name == n) return allowance;
  }
  return std::nullopt;
}

nlohmann::json QuirksRecordToJson(const QuirksRecord& record) {
  nlohmann::json codes = nlohmann::json::array();
  for (Allowance a : AllowanceCatalog()) {
    if (record.Has(a)) codes.push_back(AllowanceName(a));
  }
  return {{"target", record.target}, {"allowances", codes}};
}

absl::StatusOr<QuirksRecord> QuirksRecordFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("target") || !j["target"].is_string() ||
      !j.contains("allowances") || !j["allowances"].is_array()) {
    return absl::InvalidArgumentError(
        "quirks record needs a string \"target\" and an \"allowances\" array");
  }
  QuirksRecord record;
  record.target = j["target"].get<std::string>();
  for (const nlohmann::json& code : j["allowances"]) {
    if (!code.is_string()) {
      return absl::InvalidArgumentError("allowance codes must be strings");
    }
    std::optional<Allowance> a = AllowanceFromName(code.get<std::string>());
    if (!a) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown allowance code: ", code.get<std::string>()));
    }
    record.allowances.insert(*a);
  }
  return record;
}

// ---------------------------------------------------------------------------
// Probe battery
// ---------------------------------------------------------------------------

namespace {

const ParsedEntry* EntryAt(const InterpretationReport& r, size_t i) {
  if (i >= r.entries.size()) return nullptr;
  return std::get_if<ParsedEntry>(&r.entries[i]);
}

bool HasHeader(const ParsedEntry& e, BytesView name) {
  for (const auto& [n, v] : e.headers) {
    if (EqualsIgnoreCase(n, name)) return true;
  }
  return false;
}

// Entry bodies, with rejections as a sentinel no body can equal.
std::vector<Bytes> BodiesOf(const InterpretationReport& r) {
  std::vector<Bytes> out;
  for (const ReportEntry& e : r.entries) {
    const ParsedEntry* p = std::get_if<ParsedEntry>(&e);
    out.push_back(p != nullptr ? p->body : Bytes(1, '\0') + "rejected");
  }
  return out;
}

// Decides an allowance from the reports of its probe streams.
bool Judge(Allowance a, std::span<const InterpretationReport> reports) {
  const InterpretationReport& r = reports[0];
  const ParsedEntry* first = EntryAt(r, 0);
  switch (a) {
    case Allowance::kAcceptsHttp09:
      return first != nullptr && first->version.empty();
    case Allowance::kRejectsEmptyPost411: {
      if (r.entries.empty()) return false;
      const Rejection* rej = std::get_if<Rejection>(&r.entries[0]);
      return rej != nullptr && rej->status == 411;
    }
    case Allowance::kAcceptsLfChunkLines:
      return first != nullptr && first->body == "Z";
    case Allowance::kAcceptsBareCrHeaderLines:
      return first != nullptr && HasHeader(*first, "c");
    case Allowance::kIgnoresUnderscoresInInts:
    case Allowance::kAccepts0xPrefix:
      for (const InterpretationReport& each : reports) {
        const ParsedEntry* e = EntryAt(each, 0);
        if (e != nullptr && e->body == "Z") return true;
      }
      return false;
    case Allowance::kRadixInfersLeadingZero:
      for (const InterpretationReport& each : reports) {
        const ParsedEntry* e = EntryAt(each, 0);
        if (e != nullptr && e->body == "01234567") return true;
      }
      return false;
    case Allowance::kTreatsCommaChunkedDistinct:
      // The header values differ by construction; compare framing only.
      return BodiesOf(reports[0]) != BodiesOf(reports[1]);
    case Allowance::kLaxChunkTerminator: {
      const ParsedEntry* second = EntryAt(r, 1);
      return first != nullptr && second != nullptr && second->uri == "/evil";
    }
    case Allowance::kConcatenatesNulLfValues:
      return first != nullptr && first->headers.size() == 1 &&
             EqualsIgnoreCase(first->headers[0].first, "a");
  }
  return false;
}

constexpr char kHead[] = "POST / HTTP/1.1\r\nHost: a\r\n";
constexpr char kChunkedHead[] =
    "POST / HTTP/1.1\r\nHost: a\r\nTransfer-Encoding: chunked\r\n\r\n";

Bytes WithLength(BytesView cl, BytesView body) {
  return absl::StrCat(kHead, "Content-Length: ", std::string(cl), "\r\n\r\n",
                      std::string(body));
}

Bytes WithChunk(BytesView size, BytesView data) {
  return absl::StrCat(kChunkedHead, std::string(size), "\r\n", std::string(data),
                      "\r\n0\r\n\r\n");
}

}  // namespace

std::vector<Probe> ProbeBattery() {
  auto one = [](Bytes b) { return RequestStream{std::move(b)}; };
  std::vector<Probe> battery;
  battery.push_back({Allowance::kAcceptsHttp09, {one("GET /\r\n\r\n")}});
  battery.push_back({Allowance::kRejectsEmptyPost411,
                     {one("POST / HTTP/1.1\r\nHost: a\r\n\r\n")}});
  battery.push_back({Allowance::kAcceptsLfChunkLines,
                     {one(absl::StrCat(kChunkedHead, "1\nZ\n0\n\r\n"))}});
  battery.push_back({Allowance::kAcceptsBareCrHeaderLines,
                     {one("GET / HTTP/1.1\r\nA: b\rC: d\r\n\r\n")}});
  battery.push_back({Allowance::kIgnoresUnderscoresInInts,
                     {one(WithLength("0_1", "Z")), one(WithChunk("0_1", "Z"))}});
  battery.push_back({Allowance::kRadixInfersLeadingZero,
                     {one(WithLength("010", "01234567")),
                      one(WithChunk("010", "01234567"))}});
  battery.push_back({Allowance::kAccepts0xPrefix,
                     {one(WithLength("0x1", "Z")), one(WithChunk("0x1", "Z"))}});
  battery.push_back(
      {Allowance::kTreatsCommaChunkedDistinct,
       {one("POST / HTTP/1.1\r\nHost: a\r\nTransfer-Encoding: ,chunked\r\n\r\n"
            "1\r\nZ\r\n0\r\n\r\n"),
        one(WithChunk("1", "Z"))}});
  battery.push_back(
      {Allowance::kLaxChunkTerminator,
       {one(absl::StrCat(kChunkedHead, "0\r\na:GET /evil HTTP/1.1\r\n\r\n"))}});
  static constexpr char kNul[] = "GET / HTTP/1.1\r\nA: b\r\nC: d\0e\r\n\r\n";
  battery.push_back({Allowance::kConcatenatesNulLfValues,
                     {one(Bytes(kNul, sizeof(kNul) - 1))}});
  return battery;
}

absl::StatusOr<QuirksRecord> ProbeQuirks(OriginTarget& target) {
  QuirksRecord record;
  record.target = target.name();
  for (const Probe& probe : ProbeBattery()) {
    std::vector<InterpretationReport> reports;
    for (const RequestStream& s : probe.streams) {
      absl::StatusOr<Observation> obs = target.Observe(s, /*traced=*/false);
      if (!obs.ok()) {
        return absl::UnavailableError(absl::StrCat(
            "probing ", target.name(), " for ", AllowanceName(probe.allowance),
            ": ", obs.status().message()));
      }
      reports.push_back(std::move(obs->report));
    }
    if (Judge(probe.allowance, reports)) record.allowances.insert(probe.allowance);
  }
  return record;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

namespace {

bool SameEntry(const ReportEntry& a, const ReportEntry& b) {
  const ParsedEntry* pa = std::get_if<ParsedEntry>(&a);
  const ParsedEntry* pb = std::get_if<ParsedEntry>(&b);
  if (pa == nullptr || pb == nullptr) return pa == nullptr && pb == nullptr;
  if (pa->method != pb->method || pa->uri != pb->uri ||
      pa->version != pb->version || pa->body != pb->body ||
      pa->headers.size() != pb->headers.size()) {
    return false;
  }
  for (size_t i = 0; i < pa->headers.size(); ++i) {
    if (!EqualsIgnoreCase(pa->headers[i].first, pb->headers[i].first) ||
        pa->headers[i].second != pb->headers[i].second) {
      return false;
    }
  }
  return true;
}

bool HasFramingHeader(const ParsedEntry& e) {
  return HasHeader(e, "content-length") || HasHeader(e, "transfer-encoding");
}

bool MentionsChunked(const ParsedEntry& e) {
  for (const auto& [n, v] : e.headers) {
    if (EqualsIgnoreCase(n, "transfer-encoding") &&
        AsciiLower(v).find("chunked") != Bytes::npos) {
      return true;
    }
  }
  return false;
}

// A refusal on one side against a parse on the other, excused by a
// permitted behavior of whichever side holds it.
bool Excused(const ReportEntry& x, const QuirksRecord& qx, const ReportEntry& y,
             const QuirksRecord& qy) {
  const Rejection* rej = std::get_if<Rejection>(&x);
  const ParsedEntry* e = std::get_if<ParsedEntry>(&y);
  if (rej == nullptr || e == nullptr) return false;
  if (qx.Has(Allowance::kRejectsEmptyPost411) && rej->status == 411 &&
      e->method == "POST" && e->body.empty() && !HasFramingHeader(*e)) {
    return true;
  }
  if (qy.Has(Allowance::kAcceptsHttp09) && e->version.empty()) return true;
  if (qy.Has(Allowance::kAcceptsLfChunkLines) && MentionsChunked(*e)) return true;
  return false;
}

// What a peer can tell apart: stalls look like clean ends.
int ObservableEnd(Termination t) {
  switch (t) {
    case Termination::kClean:
    case Termination::kTimeout:
      return 0;
    case Termination::kLoopDetected:
      return 1;
    case Termination::kCrash:
      return 2;
  }
  return 0;
}

void AppendField(std::string& out, std::string_view key, BytesView value) {
  absl::StrAppend(&out, std::string(key), "=\"", EscapeBytes(value), "\"");
}

}  // namespace

bool ReportsAgree(const InterpretationReport& a, const InterpretationReport& b,
                  const QuirksRecord& qa, const QuirksRecord& qb) {
  size_t n = std::min(a.entries.size(), b.entries.size());
  for (size_t i = 0; i < n; ++i) {
    if (SameEntry(a.entries[i], b.entries[i])) continue;
    // After an excused refusal the refusing side has closed the
    // connection, so nothing later can be compared.
    return Excused(a.entries[i], qa, b.entries[i], qb) ||
           Excused(b.entries[i], qb, a.entries[i], qa);
  }
  if (a.entries.size() != b.entries.size()) return false;
  return ObservableEnd(a.termination) == ObservableEnd(b.termination);
}

std::string CanonicalReport(const InterpretationReport& report) {
  std::string out;
  for (const ReportEntry& e : report.entries) {
    if (const ParsedEntry* p = std::get_if<ParsedEntry>(&e)) {
      out += "entry ";
      AppendField(out, "method", p->method);
      out += ' ';
      AppendField(out, "uri", p->uri);
      out += ' ';
      AppendField(out, "version", p->version);
      for (const auto& [name, value] : p->headers) {
        out += " header ";
        AppendField(out, AsciiLower(name), value);
      }
      out += ' ';
      AppendField(out, "body", p->body);
      out += '\n';
    } else {
      out += "rejection\n";
    }
  }
  absl::StrAppend(&out, "end ", ObservableEnd(report.termination), "\n");
  return out;
}

std::string ReportDigest(const InterpretationReport& report) {
  return HexDigest(Fnv1a64(CanonicalReport(report)));
}

void DiscrepancyMatrix::Set(size_t i, size_t j, bool value) {
  bits_[i * n_ + j] = value;
  bits_[j * n_ + i] = value;
}

size_t DiscrepancyMatrix::SetPairCount() const {
  size_t count = 0;
  for (size_t i = 0; i < n_; ++i) {
    for (size_t j = i + 1; j < n_; ++j) count += Get(i, j) ? 1 : 0;
  }
  return count;
}

std::string DiscrepancyMatrix::ToBitString() const {
  std::string out;
  out.reserve(bits_.size());
  for (bool b : bits_) out += b ? '1' : '0';
  return out;
}

std::optional<DiscrepancyMatrix> DiscrepancyMatrix::FromBitString(
    std::string_view bits) {
  size_t n = 0;
  while (n * n < bits.size()) ++n;
  if (n * n != bits.size()) return std::nullopt;
  DiscrepancyMatrix m(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      char c = bits[i * n + j];
      if (c != '0' && c != '1') return std::nullopt;
      if ((c == '1') != (bits[j * n + i] == '1')) return std::nullopt;
      if (i == j && c == '1') return std::nullopt;
      m.bits_[i * n + j] = c == '1';
    }
  }
  return m;
}

DiscrepancyMatrix ComputeDiscrepancyMatrix(
    std::span<const InterpretationReport> reports,
    std::span<const QuirksRecord> quirks) {
  DiscrepancyMatrix m(reports.size());
  for (size_t i = 0; i < reports.size(); ++i) {
    for (size_t j = i + 1; j < reports.size(); ++j) {
      m.Set(i, j, !ReportsAgree(reports[i], reports[j], quirks[i], quirks[j]));
    }
  }
  return m;
}

bool IsMeaningful(std::span<const InterpretationReport> reports,
                  std::span<const QuirksRecord> quirks) {
  for (size_t i = 0; i < reports.size(); ++i) {
    for (size_t j = i + 1; j < reports.size(); ++j) {
      if (!ReportsAgree(reports[i], reports[j], quirks[i], quirks[j])) return true;
    }
  }
  return false;
}

Durability IsDurable(const RequestStream& input,
                     std::span<TransducerTarget* const> transducers,
                     std::span<OriginTarget* const> origins,
                     std::span<const QuirksRecord> quirks) {
  for (TransducerTarget* t : transducers) {
    absl::StatusOr<std::optional<RequestStream>> forwarded = t->Forward(input);
    if (!forwarded.ok() || !forwarded->has_value()) continue;
    std::vector<InterpretationReport> reports;
    bool complete = true;
    for (OriginTarget* o : origins) {
      absl::StatusOr<Observation> obs = o->Observe(**forwarded, false);
      if (!obs.ok()) {
        complete = false;
        break;
      }
      reports.push_back(std::move(obs->report));
    }
    if (complete && IsMeaningful(reports, quirks)) return {true, t->name()};
  }
  return {};
}

std::string GroupKey(const DiscrepancyMatrix& m) {
  return HexDigest(Fnv1a64(m.ToBitString()));
}

std::vector<ResultGroup> GroupResults(std::span<const FuzzResult> results) {
  std::vector<ResultGroup> groups;
  for (size_t i = 0; i < results.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ResultGroup& g) {
      return g.matrix == results[i].matrix;
    });
    if (it == groups.end()) {
      groups.push_back({results[i].matrix, {i}});
    } else {
      it->members.push_back(i);
    }
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const ResultGroup& a, const ResultGroup& b) {
                     return a.matrix.SetPairCount() > b.matrix.SetPairCount();
                   });
  return groups;
}

}  // namespace garden::analysis
