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

// Edge coverage maps and the path-diversity novelty state.
//
// Maps come from two places: the in-process Recorder that personalities feed
// while interpreting, and instrumented external servers that dump their map
// to a file when asked over a control channel (clear/dump, bound to
// SIGUSR2/SIGUSR1 by SignalControlChannel).

#ifndef GARDEN_COVERAGE_H_
#define GARDEN_COVERAGE_H_

#include <sys/types.h>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <source_location>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace garden::coverage {

inline constexpr size_t kMapSize = 65536;

class CoverageMap {
 public:
  CoverageMap() : cells_(kMapSize, 0) {}

  // Saturates at 255.
  void Increment(size_t index) {
    uint8_t& c = cells_[index % kMapSize];
    if (c != 0xff) ++c;
  }
  void Set(size_t index, uint8_t value) { cells_[index % kMapSize] = value; }
  uint8_t operator[](size_t index) const { return cells_[index]; }
  void Clear();
  size_t NonZeroCount() const;

  std::span<const uint8_t> cells() const { return cells_; }
  std::span<uint8_t> mutable_cells() { return cells_; }

  friend bool operator==(const CoverageMap&, const CoverageMap&) = default;

 private:
  std::vector<uint8_t> cells_;
};

// In-process analogue of compiler edge instrumentation.
class Recorder {
 public:
  void RecordEdge(uint32_t from_site, uint32_t to_site);

  // Records the edge from the previously visited site to `site`.
  void Visit(uint32_t site) {
    RecordEdge(prev_site_, site);
    prev_site_ = site;
  }

  void Clear() {
    map_.Clear();
    prev_site_ = 0;
  }
  const CoverageMap& map() const { return map_; }

 private:
  CoverageMap map_;
  uint32_t prev_site_ = 0;
};

// Convenience for instrumenting code: every call site is a distinct site id.
// A null recorder makes this a no-op.
class Trace {
 public:
  explicit Trace(Recorder* recorder, uint32_t salt = 0)
      : recorder_(recorder), salt_(salt) {}

  void Hit(std::source_location loc = std::source_location::current()) {
    if (recorder_ != nullptr) recorder_->Visit(salt_ ^ (loc.line() * 2654435761u));
  }
  // Distinguishes data-dependent outcomes at one call site.
  void HitValue(uint32_t value,
                std::source_location loc = std::source_location::current()) {
    if (recorder_ != nullptr) {
      recorder_->Visit(salt_ ^ (loc.line() * 2654435761u) ^ (value * 40503u));
    }
  }

 private:
  Recorder* recorder_;
  uint32_t salt_;
};

// Log2 bucket of a hit count: floor(log2(c)) + 1, and 0 for 0.
uint8_t CountBucket(uint8_t count);

struct PathSignature {
  uint64_t digest = 0;
  friend auto operator<=>(const PathSignature&, const PathSignature&) = default;
};

// Stable hash over (index, bucket) for every nonzero cell.
PathSignature ComputePathSignature(const CoverageMap& map);

// Contributed by targets whose coverage is not collected.
inline constexpr PathSignature kUntracedSignature{0};

class DeltaState {
 public:
  explicit DeltaState(std::vector<std::string> targets_order)
      : targets_order_(std::move(targets_order)) {}

  // Returns whether the tuple had not been seen before, and records it.
  absl::StatusOr<bool> Observe(std::span<const PathSignature> tuple);

  const std::vector<std::string>& targets_order() const { return targets_order_; }
  size_t seen_count() const { return seen_.size(); }

 private:
  std::vector<std::string> targets_order_;
  std::set<std::vector<PathSignature>> seen_;
};

// ---------------------------------------------------------------------------
// External map-file protocol
// ---------------------------------------------------------------------------

enum class ControlCommand { kClear, kDump };

class ControlChannel {
 public:
  virtual ~ControlChannel() = default;
  virtual absl::Status Send(ControlCommand command) = 0;
};

// dump = SIGUSR1 (10), clear = SIGUSR2 (12) delivered to `pid`.
class SignalControlChannel : public ControlChannel {
 public:
  explicit SignalControlChannel(pid_t pid) : pid_(pid) {}
  absl::Status Send(ControlCommand command) override;

 private:
  pid_t pid_;
};

struct ExternalTarget {
  std::string map_path;
  std::shared_ptr<ControlChannel> channel;
  std::chrono::milliseconds timeout{1000};
};

// Map files are exactly kMapSize raw bytes, cell i at offset i.
absl::StatusOr<CoverageMap> ReadMapFile(const std::string& path);
absl::Status WriteMapFile(const std::string& path, const CoverageMap& map);

absl::Status ExternalClear(const ExternalTarget& target);

// Sends dump, waits for the map file to change, then parses it.
absl::StatusOr<CoverageMap> ExternalSnapshot(const ExternalTarget& target);

}  // namespace garden::coverage

#endif  // GARDEN_COVERAGE_H_
