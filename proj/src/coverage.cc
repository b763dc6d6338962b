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

#include "garden/coverage.h"

#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

#include "absl/strings/str_cat.h"
#include "garden/bytes.h"

namespace garden::coverage {

void CoverageMap::Clear() { std::fill(cells_.begin(), cells_.end(), 0); }

size_t CoverageMap::NonZeroCount() const {
  return static_cast<size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](uint8_t c) { return c != 0; }));
}

void Recorder::RecordEdge(uint32_t from_site, uint32_t to_site) {
  uint32_t h = (from_site * 0x9e3779b1u) ^ (to_site + 0x7f4a7c15u);
  h ^= h >> 15;
  h *= 0x2c1b3c6du;
  h ^= h >> 12;
  map_.Increment(h & (kMapSize - 1));
}

uint8_t CountBucket(uint8_t count) {
  uint8_t bucket = 0;
  while (count != 0) {
    ++bucket;
    count >>= 1;
  }
  return bucket;
}

PathSignature ComputePathSignature(const CoverageMap& map) {
  uint64_t h = 0xcbf29ce484222325ULL;
  std::span<const uint8_t> cells = map.cells();
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] == 0) continue;
    const char record[3] = {static_cast<char>(i & 0xff),
                            static_cast<char>((i >> 8) & 0xff),
                            static_cast<char>(CountBucket(cells[i]))};
    h = Fnv1a64(BytesView(record, 3), h);
  }
  return PathSignature{h};
}

absl::StatusOr<bool> DeltaState::Observe(std::span<const PathSignature> tuple) {
  if (tuple.size() != targets_order_.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "tuple arity ", tuple.size(), " does not match ",
        targets_order_.size(), " traced targets"));
  }
  return seen_.emplace(tuple.begin(), tuple.end()).second;
}

absl::Status SignalControlChannel::Send(ControlCommand command) {
  int sig = command == ControlCommand::kDump ? SIGUSR1 : SIGUSR2;
  if (::kill(pid_, sig) != 0) {
    return absl::UnavailableError(
        absl::StrCat("kill(", pid_, "): ", std::strerror(errno)));
  }
  return absl::OkStatus();
}

absl::StatusOr<CoverageMap> ReadMapFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  CoverageMap map;
  std::span<uint8_t> cells = map.mutable_cells();
  in.read(reinterpret_cast<char*>(cells.data()), cells.size());
  if (static_cast<size_t>(in.gcount()) != cells.size()) {
    return absl::DataLossError(
        absl::StrCat(path, ": map file shorter than ", kMapSize, " bytes"));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    return absl::DataLossError(
        absl::StrCat(path, ": map file longer than ", kMapSize, " bytes"));
  }
  return map;
}

absl::Status WriteMapFile(const std::string& path, const CoverageMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  std::span<const uint8_t> cells = map.cells();
  out.write(reinterpret_cast<const char*>(cells.data()), cells.size());
  return out ? absl::OkStatus()
             : absl::DataLossError(absl::StrCat("short write to ", path));
}

absl::Status ExternalClear(const ExternalTarget& target) {
  if (target.channel == nullptr) return absl::FailedPreconditionError("no channel");
  return target.channel->Send(ControlCommand::kClear);
}

absl::StatusOr<CoverageMap> ExternalSnapshot(const ExternalTarget& target) {
  if (target.channel == nullptr) return absl::FailedPreconditionError("no channel");
  // The stale file is removed first so that "rewritten" just means "exists".
  // mtime is too coarse to tell two dumps a few milliseconds apart.
  ::unlink(target.map_path.c_str());
  if (absl::Status s = target.channel->Send(ControlCommand::kDump); !s.ok()) {
    return absl::DeadlineExceededError(
        absl::StrCat("control channel failed: ", s.message()));
  }
  auto deadline = std::chrono::steady_clock::now() + target.timeout;
  bool seen_file = false;
  while (true) {
    struct stat st;
    if (::stat(target.map_path.c_str(), &st) == 0) {
      seen_file = true;
      if (static_cast<size_t>(st.st_size) == kMapSize) {
        return ReadMapFile(target.map_path);
      }
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  if (seen_file) {
    return absl::DataLossError(
        absl::StrCat(target.map_path, ": malformed map file"));
  }
  return absl::DeadlineExceededError(
      absl::StrCat("timed out waiting for ", target.map_path));
}

}  // namespace garden::coverage
