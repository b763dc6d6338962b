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

// Deciding when two origins disagree, and whether anybody should care.
//
// Two reports agree when they are equal after canonicalization, or when the
// difference is one a quirks record explicitly permits. Only three catalog
// entries excuse anything (411 for unframed POST, HTTP/0.9, LF chunk lines);
// the rest describe a target but never hide a difference.

#ifndef GARDEN_ANALYSIS_H_
#define GARDEN_ANALYSIS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "garden/bytes.h"
#include "garden/coverage.h"
#include "garden/personalities.h"
#include "json.hpp"

namespace garden::analysis {

using personalities::InterpretationReport;

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

struct Observation {
  InterpretationReport report;
  // Unset when the target was not traced for this input.
  std::optional<coverage::PathSignature> signature;
};

class OriginTarget {
 public:
  virtual ~OriginTarget() = default;
  virtual std::string name() const = 0;
  virtual absl::StatusOr<Observation> Observe(const RequestStream& stream,
                                              bool traced) = 0;
};

class TransducerTarget {
 public:
  virtual ~TransducerTarget() = default;
  virtual std::string name() const = 0;
  // nullopt when the transducer refused the stream.
  virtual absl::StatusOr<std::optional<RequestStream>> Forward(
      const RequestStream& stream) = 0;
};

class PersonalityOrigin : public OriginTarget {
 public:
  explicit PersonalityOrigin(personalities::Personality p) : p_(std::move(p)) {}
  std::string name() const override { return p_.name; }
  absl::StatusOr<Observation> Observe(const RequestStream& stream,
                                      bool traced) override;

 private:
  personalities::Personality p_;
  coverage::Recorder recorder_;
};

class PersonalityTransducer : public TransducerTarget {
 public:
  explicit PersonalityTransducer(personalities::Personality p)
      : p_(std::move(p)) {}
  std::string name() const override { return p_.name; }
  absl::StatusOr<std::optional<RequestStream>> Forward(
      const RequestStream& stream) override;

 private:
  personalities::Personality p_;
};

// ---------------------------------------------------------------------------
// Quirks records
// ---------------------------------------------------------------------------

enum class Allowance {
  kAcceptsHttp09,
  kRejectsEmptyPost411,
  kAcceptsLfChunkLines,
  kAcceptsBareCrHeaderLines,
  kIgnoresUnderscoresInInts,
  kRadixInfersLeadingZero,
  kAccepts0xPrefix,
  kTreatsCommaChunkedDistinct,
  kLaxChunkTerminator,
  kConcatenatesNulLfValues,
};

// In catalog order.
std::span<const Allowance> AllowanceCatalog();
std::string AllowanceName(Allowance a);
std::optional<Allowance> AllowanceFromName(std::string_view name);

struct QuirksRecord {
  std::string target;
  std::set<Allowance> allowances;

  bool Has(Allowance a) const { return allowances.contains(a); }
  friend bool operator==(const QuirksRecord&, const QuirksRecord&) = default;
};

nlohmann::json QuirksRecordToJson(const QuirksRecord& record);
absl::StatusOr<QuirksRecord> QuirksRecordFromJson(const nlohmann::json& j);

// The diagnostic battery: one crafted stream per allowance.
struct Probe {
  Allowance allowance;
  std::vector<RequestStream> streams;
};
std::vector<Probe> ProbeBattery();

absl::StatusOr<QuirksRecord> ProbeQuirks(OriginTarget& target);

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

bool ReportsAgree(const InterpretationReport& a, const InterpretationReport& b,
                  const QuirksRecord& qa, const QuirksRecord& qb);

// Stable text form used for digests and the REPL.
std::string CanonicalReport(const InterpretationReport& report);
std::string ReportDigest(const InterpretationReport& report);

class DiscrepancyMatrix {
 public:
  DiscrepancyMatrix() = default;
  explicit DiscrepancyMatrix(size_t n) : n_(n), bits_(n * n, false) {}

  size_t size() const { return n_; }
  bool Get(size_t i, size_t j) const { return bits_[i * n_ + j]; }
  // Sets both (i, j) and (j, i).
  void Set(size_t i, size_t j, bool value);
  size_t SetPairCount() const;  // unordered pairs
  bool Any() const { return SetPairCount() > 0; }

  // Row-major '0'/'1' string.
  std::string ToBitString() const;
  static std::optional<DiscrepancyMatrix> FromBitString(std::string_view bits);

  friend bool operator==(const DiscrepancyMatrix&, const DiscrepancyMatrix&) = default;

 private:
  size_t n_ = 0;
  std::vector<bool> bits_;
};

DiscrepancyMatrix ComputeDiscrepancyMatrix(
    std::span<const InterpretationReport> reports,
    std::span<const QuirksRecord> quirks);

bool IsMeaningful(std::span<const InterpretationReport> reports,
                  std::span<const QuirksRecord> quirks);

struct Durability {
  bool durable = false;
  std::optional<std::string> witness;
};

// Tries transducers in order; the first whose output still splits the
// origins is the witness.
Durability IsDurable(const RequestStream& input,
                     std::span<TransducerTarget* const> transducers,
                     std::span<OriginTarget* const> origins,
                     std::span<const QuirksRecord> quirks);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct FuzzResult {
  std::string id;
  RequestStream input;
  DiscrepancyMatrix matrix;
  std::vector<std::string> origins;  // matrix row order
  std::vector<std::string> digests;  // ReportDigest per origin
  std::string witness;
  std::string group_key;

  friend bool operator==(const FuzzResult&, const FuzzResult&) = default;
};

std::string GroupKey(const DiscrepancyMatrix& m);

struct ResultGroup {
  DiscrepancyMatrix matrix;
  std::vector<size_t> members;  // indices into the input list
};

// Exact matrix equality; larger groups of set bits first, then first seen.
std::vector<ResultGroup> GroupResults(std::span<const FuzzResult> results);

}  // namespace garden::analysis

#endif  // GARDEN_ANALYSIS_H_
