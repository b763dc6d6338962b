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

// The quirk-parameterized request interpreter shared by origins and
// transducers. Besides the parsed entries it keeps byte spans for every
// construct a transducer may want to rewrite.

#ifndef GARDEN_SRC_ENGINE_H_
#define GARDEN_SRC_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "garden/bytes.h"
#include "garden/coverage.h"
#include "garden/personalities.h"

namespace garden::personalities::internal {

struct Span {
  size_t begin = 0;
  size_t end = 0;
};

struct FieldSpan {
  Span line;   // including the terminator
  Span name;
  Span value;  // OWS trimmed
  // Contains NUL or LF and was merged into the previous field.
  bool concatenated = false;
};

struct ChunkSpan {
  Span line;     // size line including terminator
  Span content;  // size line without terminator
  Span size;     // size digits, BWS before ';' trimmed
  std::optional<size_t> semicolon;
  Span data;
  Span data_terminator;
  uint64_t value = 0;
  bool strictly_valid_size = false;
};

struct RequestSpans {
  Span whole;
  Span start_line;
  std::vector<FieldSpan> fields;
  std::optional<size_t> content_length_field;
  uint64_t content_length = 0;
  bool chunked = false;
  std::vector<ChunkSpan> chunks;
  std::vector<FieldSpan> trailers;
  Span trailer_section;  // everything after the last-chunk line
  ParsedEntry entry;
};

struct EngineResult {
  std::vector<RequestSpans> requests;
  std::optional<Rejection> rejection;
  Termination termination = Termination::kClean;
  // Offset where unconsumed input starts.
  size_t resume = 0;
};

EngineResult RunEngine(const QuirkSet& quirks, BytesView data,
                       coverage::Recorder* recorder,
                       const std::function<bool(BytesView)>& poison);

// True if the size line content has CR inside the whitespace ahead of ';'.
bool HasCrBeforeSemicolon(BytesView data, const ChunkSpan& chunk);

}  // namespace garden::personalities::internal

#endif  // GARDEN_SRC_ENGINE_H_
