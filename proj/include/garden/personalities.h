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

// In-process server personalities.
//
// A personality is an HTTP/1.1 request interpreter assembled from quirk
// flags. Origins turn a request stream into an InterpretationReport (the same
// thing a real origin reports over the wire as JSON); transducers parse the
// stream under their quirks and forward a possibly rewritten copy.

#ifndef GARDEN_PERSONALITIES_H_
#define GARDEN_PERSONALITIES_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "garden/bytes.h"
#include "garden/coverage.h"
#include "garden/wire.h"

namespace garden::personalities {

enum class HeaderLineTerminator { kCrlfOrLf, kCrlfOnly, kAcceptsBareCr };
enum class ChunkLineTerminator { kCrlfOnly, kLfAllowed, kAcceptsBareCr };
enum class ChunkTerminatorLaxity { kStrict, kCrlfPlusAnyTwoBytes };
enum class TransferCodingList { kRfcIgnoreEmptyElements, kLiteralMatch };
enum class EmptyBodyPost { kAccept, kReject411 };
enum class Http09 { kAccept, kReject };
enum class NegativeClGuard { kGuarded, kRewindUnguarded };
enum class NulOrLfInValue { kReject, kConcatenateToPrevious };
enum class BareCrInValue { kReject, kAllow };
enum class ChunkExtensionWhitespace { kSpHtab, kAcceptsCr };

// Defaults are the all-strict assignment.
struct QuirkSet {
  wire::IntMode content_length_mode = wire::IntMode::StrictDecimal();
  wire::IntMode chunk_size_mode = wire::IntMode::StrictHex();
  HeaderLineTerminator header_line_terminator = HeaderLineTerminator::kCrlfOnly;
  ChunkLineTerminator chunk_line_terminator = ChunkLineTerminator::kCrlfOnly;
  ChunkTerminatorLaxity chunk_terminator_laxity = ChunkTerminatorLaxity::kStrict;
  TransferCodingList transfer_coding_list =
      TransferCodingList::kRfcIgnoreEmptyElements;
  EmptyBodyPost empty_body_post = EmptyBodyPost::kAccept;
  Http09 http09 = Http09::kReject;
  NegativeClGuard negative_cl_guard = NegativeClGuard::kGuarded;
  NulOrLfInValue nul_or_lf_in_value = NulOrLfInValue::kReject;
  BareCrInValue bare_cr_in_value = BareCrInValue::kReject;
  ChunkExtensionWhitespace chunk_extension_whitespace =
      ChunkExtensionWhitespace::kSpHtab;

  static QuirkSet RfcOracle() { return {}; }
  friend bool operator==(const QuirkSet&, const QuirkSet&) = default;
};

enum class Rewrite {
  kNormalizeLeadingZeroCl,
  kStripChunkExtensions,
  kStripCrBeforeSemicolon,
  kForwardInvalidChunkSize,
  kForwardTrailerFields,
  kAddSpaceAfterTrailerColon,
  kRejectBareCrInOws,
  kUnpipeline,
  kPassthrough,
};

enum class Kind { kOrigin, kTransducer };

struct Personality {
  std::string name;
  Kind kind = Kind::kOrigin;
  QuirkSet quirks;
  std::set<Rewrite> rewrites;  // transducers only
  std::string models;          // which real-world behavior this reproduces
  // Requests matching this predicate crash the interpreter.
  std::function<bool(BytesView request)> poison;

  bool Has(Rewrite r) const { return rewrites.contains(r); }
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

using HeaderPair = std::pair<Bytes, Bytes>;

struct ParsedEntry {
  Bytes method;
  Bytes uri;
  Bytes version;  // empty for HTTP/0.9
  std::vector<HeaderPair> headers;
  Bytes body;

  friend bool operator==(const ParsedEntry&, const ParsedEntry&) = default;
};

struct Rejection {
  int status = 400;
  std::string reason;  // short code, e.g. "http09", "length-required"
  std::optional<size_t> offset;

  int StatusClass() const { return status / 100; }
  friend bool operator==(const Rejection&, const Rejection&) = default;
};

using ReportEntry = std::variant<ParsedEntry, Rejection>;

enum class Termination { kClean, kTimeout, kLoopDetected, kCrash };

struct InterpretationReport {
  std::vector<ReportEntry> entries;
  Termination termination = Termination::kClean;

  const Rejection* rejection() const;
  size_t accepted_count() const;

  friend bool operator==(const InterpretationReport&,
                         const InterpretationReport&) = default;
};

std::string TerminationName(Termination t);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

InterpretationReport Interpret(const Personality& origin,
                               const RequestStream& stream,
                               coverage::Recorder* recorder = nullptr);

// Interprets with an arbitrary personality's quirks regardless of its kind.
// Transducers use this to expose their own view of a stream.
InterpretationReport InterpretWithQuirks(const Personality& p,
                                         const RequestStream& stream,
                                         coverage::Recorder* recorder = nullptr);

struct ForwardedRequest {
  Bytes bytes;
  size_t source_element = 0;  // element in which the request completed
};

struct TransduceResult {
  std::optional<RequestStream> forwarded;  // set unless rejected
  std::optional<size_t> rejected_offset;
  std::vector<ForwardedRequest> requests;  // per request, in order

  bool ok() const { return forwarded.has_value(); }
};

TransduceResult Transduce(const Personality& transducer,
                          const RequestStream& stream,
                          coverage::Recorder* recorder = nullptr);

std::vector<Personality> BuiltinRegistry();

const Personality* FindPersonality(std::span<const Personality> registry,
                                   std::string_view name);

// String forms used by configuration documents.
std::string RewriteName(Rewrite r);
std::optional<Rewrite> RewriteFromName(std::string_view name);

}  // namespace garden::personalities

#endif  // GARDEN_PERSONALITIES_H_
