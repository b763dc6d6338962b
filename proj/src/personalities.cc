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

#include <array>
#include <utility>

#include "engine.h"

namespace garden::personalities {

const Rejection* InterpretationReport::rejection() const {
  if (entries.empty()) return nullptr;
  return std::get_if<Rejection>(&entries.back());
}

size_t InterpretationReport::accepted_count() const {
  size_t n = 0;
  for (const ReportEntry& e : entries) {
    if (std::holds_alternative<ParsedEntry>(e)) ++n;
  }
  return n;
}

std::string TerminationName(Termination t) {
  switch (t) {
    case Termination::kClean:
      return "clean";
    case Termination::kTimeout:
      return "timeout";
    case Termination::kLoopDetected:
      return "loop-detected";
    case Termination::kCrash:
      return "crash";
  }
  return "clean";
}

InterpretationReport InterpretWithQuirks(const Personality& p,
                                         const RequestStream& stream,
                                         coverage::Recorder* recorder) {
  Bytes data = stream.Concatenated();
  internal::EngineResult r =
      internal::RunEngine(p.quirks, data, recorder, p.poison);
  InterpretationReport report;
  for (internal::RequestSpans& req : r.requests) {
    report.entries.emplace_back(std::move(req.entry));
  }
  if (r.rejection) report.entries.emplace_back(*r.rejection);
  report.termination = r.termination;
  return report;
}

InterpretationReport Interpret(const Personality& origin,
                               const RequestStream& stream,
                               coverage::Recorder* recorder) {
  return InterpretWithQuirks(origin, stream, recorder);
}

namespace {

constexpr std::array<std::pair<Rewrite, const char*>, 9> kRewriteNames = {{
    {Rewrite::kNormalizeLeadingZeroCl, "normalize-leading-zero-cl"},
    {Rewrite::kStripChunkExtensions, "strip-chunk-extensions"},
    {Rewrite::kStripCrBeforeSemicolon, "strip-cr-before-semicolon"},
    {Rewrite::kForwardInvalidChunkSize, "forward-invalid-chunk-size"},
    {Rewrite::kForwardTrailerFields, "forward-trailer-fields"},
    {Rewrite::kAddSpaceAfterTrailerColon, "add-space-after-trailer-colon"},
    {Rewrite::kRejectBareCrInOws, "reject-bare-cr-in-ows"},
    {Rewrite::kUnpipeline, "unpipeline"},
    {Rewrite::kPassthrough, "passthrough"},
}};

Personality Origin(std::string name, QuirkSet q, std::string models) {
  Personality p;
  p.name = std::move(name);
  p.kind = Kind::kOrigin;
  p.quirks = q;
  p.models = std::move(models);
  return p;
}

Personality Transducer(std::string name, QuirkSet q, std::set<Rewrite> rewrites,
                       std::string models) {
  Personality p = Origin(std::move(name), q, std::move(models));
  p.kind = Kind::kTransducer;
  p.rewrites = std::move(rewrites);
  return p;
}

}  // namespace

std::string RewriteName(Rewrite r) {
  for (const auto& [rewrite, name] : kRewriteNames) {
    if (rewrite == r) return name;
  }
  return "";
}

std::optional<Rewrite> RewriteFromName(std::string_view name) {
  for (const auto& [rewrite, n] : kRewriteNames) {
    if (name == n) return rewrite;
  }
  return std::nullopt;
}

std::vector<Personality> BuiltinRegistry() {
  using wire::IntMode;
  std::vector<Personality> r;

  r.push_back(Origin("rfc-oracle", QuirkSet::RfcOracle(),
                     "The all-strict reference interpreter."));
  {
    QuirkSet q;
    q.content_length_mode = IntMode::StrtolRadixInfer();
    r.push_back(Origin("litespeed-like", q,
                       "Content-Length parsed with strtoll base 0, so a "
                       "leading 0 means octal."));
  }
  {
    QuirkSet q;
    q.content_length_mode = IntMode::UnderscoreTolerant(10);
    q.chunk_size_mode = IntMode::UnderscoreTolerant(16);
    r.push_back(Origin("python-int-like", q,
                       "Framing integers parsed with Python int(), which "
                       "skips digit-separating underscores and 0x."));
  }
  {
    QuirkSet q;
    q.chunk_line_terminator = ChunkLineTerminator::kAcceptsBareCr;
    r.push_back(Origin("node-like", q,
                       "Chunk lines may end in a bare CR; the byte after it "
                       "is discarded."));
  }
  {
    QuirkSet q;
    q.chunk_terminator_laxity = ChunkTerminatorLaxity::kCrlfPlusAnyTwoBytes;
    r.push_back(Origin("puma-like", q,
                       "The last chunk is followed by any two bytes instead "
                       "of a trailer section."));
  }
  {
    QuirkSet q;
    q.content_length_mode = IntMode::StrtolExplicitRadix(10);
    q.negative_cl_guard = NegativeClGuard::kRewindUnguarded;
    q.transfer_coding_list = TransferCodingList::kLiteralMatch;
    r.push_back(Origin("mongoose-like", q,
                       "Negative Content-Length moves the read head backwards "
                       "(busy loop); \",chunked\" is not chunked."));
  }
  {
    QuirkSet q;
    q.header_line_terminator = HeaderLineTerminator::kAcceptsBareCr;
    r.push_back(Origin("python-stdlib-like", q,
                       "Header lines may end in a bare CR."));
  }
  {
    QuirkSet q;
    q.transfer_coding_list = TransferCodingList::kLiteralMatch;
    r.push_back(Origin("gunicorn-like", q,
                       "Only the literal value \"chunked\" selects chunked "
                       "framing."));
  }
  {
    QuirkSet q;
    q.chunk_size_mode = IntMode::StrtolExplicitRadix(16);
    r.push_back(Origin("cherrypy-like", q,
                       "Chunk sizes parsed with strtol base 16, which accepts "
                       "a 0x prefix and ignores trailing bytes."));
  }
  {
    QuirkSet q;
    q.http09 = Http09::kAccept;
    q.empty_body_post = EmptyBodyPost::kReject411;
    r.push_back(Origin("legacy-like", q,
                       "Accepts HTTP/0.9 and answers unframed POST with 411; "
                       "both are permitted."));
  }

  r.push_back(Transducer("identity", QuirkSet::RfcOracle(),
                         {Rewrite::kPassthrough},
                         "Forwards every byte unchanged."));
  {
    QuirkSet q;
    q.chunk_size_mode = IntMode::LongestValidPrefix(16);
    q.chunk_line_terminator = ChunkLineTerminator::kLfAllowed;
    q.chunk_extension_whitespace = ChunkExtensionWhitespace::kAcceptsCr;
    r.push_back(Transducer("ats-like", q,
                           {Rewrite::kForwardInvalidChunkSize,
                            Rewrite::kForwardTrailerFields},
                           "Chunk sizes read to their longest valid prefix "
                           "and forwarded as-is; CR allowed before ';'; "
                           "trailers forwarded."));
  }
  r.push_back(Transducer("haproxy-like", QuirkSet::RfcOracle(),
                         {Rewrite::kNormalizeLeadingZeroCl},
                         "Strict, and rewrites Content-Length without leading "
                         "zeros."));
  {
    QuirkSet q;
    q.nul_or_lf_in_value = NulOrLfInValue::kConcatenateToPrevious;
    r.push_back(Transducer("relayd-like", q, {Rewrite::kForwardTrailerFields},
                           "A value containing NUL or LF is appended to the "
                           "previous field after framing was validated."));
  }
  {
    QuirkSet q;
    q.chunk_line_terminator = ChunkLineTerminator::kLfAllowed;
    q.chunk_extension_whitespace = ChunkExtensionWhitespace::kAcceptsCr;
    q.bare_cr_in_value = BareCrInValue::kAllow;
    r.push_back(Transducer("google-mitigation-like", q,
                           {Rewrite::kRejectBareCrInOws},
                           "Rejects CR before ';' in chunk lines but still "
                           "forwards bare CR inside field values."));
  }
  {
    QuirkSet q;
    q.chunk_line_terminator = ChunkLineTerminator::kLfAllowed;
    q.chunk_extension_whitespace = ChunkExtensionWhitespace::kAcceptsCr;
    r.push_back(Transducer("akamai-mitigation-like", q,
                           {Rewrite::kStripChunkExtensions},
                           "Strips chunk extensions and the whitespace before "
                           "them, but a CR right after the size survives."));
  }
  r.push_back(Transducer("nghttpx-like", QuirkSet::RfcOracle(), {},
                         "Re-frames requests but keeps leading zeros in "
                         "Content-Length and the ',' in \",chunked\"."));
  r.push_back(Transducer("normalizing", QuirkSet::RfcOracle(),
                         {Rewrite::kNormalizeLeadingZeroCl,
                          Rewrite::kStripChunkExtensions,
                          Rewrite::kUnpipeline},
                         "Strict parse, canonical framing, one forwarded "
                         "element per request."));
  return r;
}

const Personality* FindPersonality(std::span<const Personality> registry,
                                   std::string_view name) {
  for (const Personality& p : registry) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace garden::personalities
