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

// Byte, stream, and grammar mutations over request streams.
//
// Every mutation returns a record that replays it: Apply(record, parent)
// rebuilds the child without consulting the random source.

#ifndef GARDEN_MUTATION_H_
#define GARDEN_MUTATION_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "absl/status/statusor.h"
#include "garden/bytes.h"
#include "json.hpp"

namespace garden::mutation {

// SplitMix64 over (seed, counter). Copying an Rng forks the sequence.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed) {}

  uint64_t Next();
  // Uniform in [0, n); n must be positive.
  uint64_t Below(uint64_t n);

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

// Delimiter-heavy bytes are four times as likely as any other byte.
unsigned char DrawAlphabetByte(Rng& rng);
bool IsWeightedByte(unsigned char c);

enum class MutationKind {
  kByteInsert,
  kByteReplace,
  kByteDelete,
  kStreamInsert,
  kStreamReplace,
  kStreamCombine,
  kStreamDelete,
  kGrammar,
};

enum class InsertForm { kDuplicate, kEmpty, kSplit };

enum class GrammarRule {
  kSwapMethod,
  kToggleFraming,
  kDuplicateHeader,
  kSetClRaw,
  kAppendChunkExtension,
  kChangeLineTerminator,
  kInjectTrailer,
  kPrependComma,
};

std::string MutationKindName(MutationKind k);
std::string GrammarRuleName(GrammarRule r);
std::optional<GrammarRule> GrammarRuleFromName(std::string_view name);
std::span<const GrammarRule> AllGrammarRules();

struct MutationRecord {
  MutationKind kind = MutationKind::kByteInsert;
  size_t element = 0;
  // Byte kinds: where the edit starts. Split inserts: the split point.
  size_t offset = 0;
  // Byte replace/delete: how many bytes were removed.
  size_t length = 0;
  // Inserted or replacing bytes; the new element for stream-replace; the
  // whole rewritten element for grammar mutations.
  Bytes bytes;
  InsertForm insert_form = InsertForm::kDuplicate;
  std::optional<GrammarRule> rule;
  // Model path of the grammar edit, e.g. "request[0].headers[2]".
  std::string path;
  size_t max_bytes = kMaxStreamBytes;
  bool truncated = false;

  std::string Describe() const;
  friend bool operator==(const MutationRecord&, const MutationRecord&) = default;
};

nlohmann::json MutationRecordToJson(const MutationRecord& r);
absl::StatusOr<MutationRecord> MutationRecordFromJson(const nlohmann::json& j);

struct Mutation {
  RequestStream child;
  MutationRecord record;
};

Mutation MutateBytes(const RequestStream& s, Rng& rng,
                     size_t max_bytes = kMaxStreamBytes);
// `corpus` supplies replacement elements; without it replace is not drawn.
Mutation MutateStream(const RequestStream& s, Rng& rng,
                      std::span<const Bytes> corpus = {},
                      size_t max_bytes = kMaxStreamBytes);
// Retries up to kGrammarRetries rules before falling back to MutateBytes.
Mutation MutateGrammar(const RequestStream& s, Rng& rng,
                       size_t max_bytes = kMaxStreamBytes);
// Applies exactly `rule`, or returns nullopt when no element has the
// structure it needs.
std::optional<Mutation> MutateGrammarWith(const RequestStream& s, Rng& rng,
                                          GrammarRule rule,
                                          size_t max_bytes = kMaxStreamBytes);

inline constexpr int kGrammarRetries = 8;

struct ClassWeights {
  int byte = 40;
  int stream = 20;
  int grammar = 40;
};

// Draws a class by weight, then mutates within it.
Mutation Mutate(const RequestStream& s, Rng& rng, const ClassWeights& weights,
                std::span<const Bytes> corpus = {},
                size_t max_bytes = kMaxStreamBytes);

// Rebuilds the child from its parent. Fails if the locus does not exist.
absl::StatusOr<RequestStream> Apply(const MutationRecord& record,
                                    const RequestStream& parent);

}  // namespace garden::mutation

#endif  // GARDEN_MUTATION_H_
