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

// The generation loop: mutate queued inputs, send each child to every
// origin, keep children that reach new δ-diversity tuples without causing a
// discrepancy, and report the discrepancies that are meaningful and durable.
//
// With only in-process targets a run is a pure function of its config.

#ifndef GARDEN_FUZZER_H_
#define GARDEN_FUZZER_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "garden/analysis.h"
#include "garden/bytes.h"
#include "garden/coverage.h"
#include "garden/mutation.h"
#include "json.hpp"

namespace garden::fuzzer {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// A builtin personality when only `personality` is set, otherwise a server
// reached over TCP.
struct TargetSpec {
  std::string name;
  std::string personality;
  std::string host = "127.0.0.1";
  int port = 0;
  // External coverage for TCP origins: the map file and the pid to signal.
  std::string map_path;
  int coverage_pid = 0;

  bool in_process() const { return port == 0; }
};

struct FuzzConfig {
  std::string seed_corpus;  // empty: the builtin corpus
  int generations = 10;
  int generation_size = 100;
  uint64_t rng_seed = 1;
  mutation::ClassWeights weights;
  std::vector<TargetSpec> origins;
  std::vector<TargetSpec> transducers;
  // Origins whose coverage feeds δ-diversity; empty means all of them.
  std::vector<std::string> traced;
  int read_timeout_ms = 100;
  int connect_timeout_ms = 1000;
  size_t max_bytes = kMaxStreamBytes;
  std::string quirks;  // quirks records file; empty: probe at start
  std::string output;  // results JSONL; empty: keep in memory only

  absl::Status Validate() const;
};

// Four in-process origins (rfc-oracle, litespeed-like, python-int-like,
// node-like), transducers identity and normalizing, 50 generations of 200.
FuzzConfig DefaultFuzzConfig();

// Unknown keys are errors at every level.
absl::StatusOr<FuzzConfig> FuzzConfigFromJson(const nlohmann::json& j);
nlohmann::json FuzzConfigToJson(const FuzzConfig& cfg);
absl::StatusOr<FuzzConfig> LoadFuzzConfig(const std::string& path);

// GET, POST with Content-Length, POST chunked, a pipelined pair, a
// keep-alive pair split over two elements, and HEAD.
std::vector<RequestStream> DefaultSeedCorpus();

// A JSON array of streams; each stream is an array of escaped strings.
absl::StatusOr<std::vector<RequestStream>> LoadSeedCorpus(const std::string& path);

// Quirks files are a JSON array of quirks records.
absl::StatusOr<std::vector<analysis::QuirksRecord>> LoadQuirksFile(
    const std::string& path);
absl::Status WriteQuirksFile(const std::string& path,
                             std::span<const analysis::QuirksRecord> records);

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

struct Targets {
  std::vector<std::unique_ptr<analysis::OriginTarget>> origins;
  std::vector<std::unique_ptr<analysis::TransducerTarget>> transducers;
  std::vector<analysis::QuirksRecord> quirks;  // one per origin
  std::vector<bool> traced;                    // one per origin

  std::vector<analysis::OriginTarget*> origin_ptrs() const;
  std::vector<analysis::TransducerTarget*> transducer_ptrs() const;
  std::vector<std::string> origin_names() const;
};

// Builds the targets and loads or probes their quirks records.
absl::StatusOr<Targets> ResolveTargets(const FuzzConfig& cfg);

// ---------------------------------------------------------------------------
// Corpus and parent selection
// ---------------------------------------------------------------------------

struct CorpusEntry {
  std::string id;
  RequestStream stream;
  // Unset for seeds.
  std::optional<std::string> parent;
  std::optional<mutation::MutationRecord> record;
};

class Corpus {
 public:
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  const CorpusEntry* Find(std::string_view id) const;
  void Add(CorpusEntry entry);
  // Every element of every entry; the stream-replace donor pool.
  const std::vector<Bytes>& elements() const { return elements_; }

  // Rebuilds an entry from the seeds by replaying its mutation chain.
  absl::StatusOr<RequestStream> Replay(std::string_view id) const;

 private:
  std::vector<CorpusEntry> entries_;
  std::vector<Bytes> elements_;
};

struct Evaluation {
  std::vector<coverage::PathSignature> tuple;
  bool discrepancy = false;
};

// Indices of evaluations with a novel tuple and no discrepancy, in order.
// Every tuple is recorded, including those of discrepancy-causing inputs.
std::vector<size_t> SelectParents(std::span<const Evaluation> evaluations,
                                  coverage::DeltaState& state);

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct FuzzStats {
  size_t evaluations = 0;
  size_t target_errors = 0;
  size_t discrepancies = 0;  // raw, before the quirks records
  size_t meaningful = 0;
  size_t durable = 0;
  size_t enqueued = 0;
};

struct FuzzRun {
  std::vector<analysis::FuzzResult> results;
  Corpus corpus;
  FuzzStats stats;
};

absl::StatusOr<FuzzRun> RunFuzz(const FuzzConfig& cfg);
absl::StatusOr<FuzzRun> RunFuzz(const FuzzConfig& cfg, Targets& targets);

// ---------------------------------------------------------------------------
// Persistence and validation
// ---------------------------------------------------------------------------

nlohmann::json ResultToJson(const analysis::FuzzResult& r);
absl::StatusOr<analysis::FuzzResult> ResultFromJson(const nlohmann::json& j);

absl::Status PersistResults(std::span<const analysis::FuzzResult> results,
                            const std::string& path);
// Errors name the offending line.
absl::StatusOr<std::vector<analysis::FuzzResult>> LoadResults(
    const std::string& path);

struct ValidationFailure {
  std::string id;
  std::string reason;
};

// Re-runs every result against the targets: it must still be meaningful,
// durable, and reproduce its matrix and digests.
std::vector<ValidationFailure> ValidateResults(
    std::span<const analysis::FuzzResult> results, Targets& targets);

// Reports for `input` from every origin, in order. Fails on target errors.
absl::StatusOr<std::vector<analysis::InterpretationReport>> ObserveAll(
    const RequestStream& input, Targets& targets);

// Builds a result as the fuzzer would, or nullopt if `input` is not a
// meaningful, durable discrepancy.
absl::StatusOr<std::optional<analysis::FuzzResult>> JudgeInput(
    const RequestStream& input, Targets& targets, std::string id);

}  // namespace garden::fuzzer

#endif  // GARDEN_FUZZER_H_
