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

// Transducers forward what they parsed, byte for byte, except where one of
// their rewrites says otherwise. Rewrites are edits on the received bytes so
// anything the transducer did not look at is carried through untouched.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "engine.h"
#include "garden/personalities.h"

namespace garden::personalities {
namespace {

using internal::ChunkSpan;
using internal::FieldSpan;
using internal::RequestSpans;

struct Edit {
  size_t begin;
  size_t end;
  Bytes replacement;
};

Bytes ApplyEdits(BytesView data, size_t begin, size_t end,
                 std::vector<Edit> edits) {
  std::stable_sort(edits.begin(), edits.end(),
                   [](const Edit& a, const Edit& b) { return a.begin < b.begin; });
  Bytes out;
  size_t cursor = begin;
  for (const Edit& e : edits) {
    out.append(data.substr(cursor, e.begin - cursor));
    out += e.replacement;
    cursor = e.end;
  }
  out.append(data.substr(cursor, end - cursor));
  return out;
}

bool IsOws(unsigned char c) { return c == ' ' || c == '\t'; }

void ChunkEdits(const Personality& p, BytesView data, const ChunkSpan& c,
                std::vector<Edit>& edits) {
  if (!c.strictly_valid_size && !p.Has(Rewrite::kForwardInvalidChunkSize)) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%llx",
                  static_cast<unsigned long long>(c.value));
    edits.push_back({c.size.begin, c.size.end, hex});
  }
  if (!c.semicolon) return;
  size_t keep_until = c.content.end;
  if (p.Has(Rewrite::kStripChunkExtensions)) {
    // Walks back over the whitespace ahead of ';'. A CR directly after the
    // size is never treated as whitespace, so it survives.
    size_t b = *c.semicolon;
    while (b > c.size.end) {
      unsigned char prev = data[b - 1];
      if (IsOws(prev) || (prev == '\r' && b - 1 > c.size.end)) {
        --b;
      } else {
        break;
      }
    }
    edits.push_back({b, c.content.end, ""});
    keep_until = b;
  }
  if (p.Has(Rewrite::kStripCrBeforeSemicolon)) {
    size_t limit = std::min(keep_until, *c.semicolon);
    for (size_t i = c.size.end; i < limit; ++i) {
      if (data[i] == '\r') edits.push_back({i, i + 1, ""});
    }
  }
}

Bytes ForwardRequest(const Personality& p, BytesView data,
                     const RequestSpans& req) {
  std::vector<Edit> edits;
  const std::vector<FieldSpan>& fields = req.fields;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (!fields[i].concatenated) continue;
    size_t prev = i;
    while (prev > 0 && fields[prev - 1].concatenated) --prev;
    if (prev == 0) continue;
    const FieldSpan& target = fields[prev - 1];
    Bytes cleaned;
    for (size_t k = fields[i].value.begin; k < fields[i].value.end; ++k) {
      if (data[k] != '\0' && data[k] != '\n') cleaned += data[k];
    }
    edits.push_back({target.value.end, target.value.end, cleaned});
    edits.push_back({fields[i].line.begin, fields[i].line.end, ""});
  }
  if (req.content_length_field && p.Has(Rewrite::kNormalizeLeadingZeroCl)) {
    Bytes canonical = std::to_string(req.content_length);
    for (const FieldSpan& f : fields) {
      BytesView name = data.substr(f.name.begin, f.name.end - f.name.begin);
      BytesView value = data.substr(f.value.begin, f.value.end - f.value.begin);
      if (EqualsIgnoreCase(name, "content-length") && value != canonical) {
        edits.push_back({f.value.begin, f.value.end, canonical});
      }
    }
  }
  for (const ChunkSpan& c : req.chunks) ChunkEdits(p, data, c, edits);
  for (const FieldSpan& t : req.trailers) {
    if (!p.Has(Rewrite::kForwardTrailerFields)) {
      edits.push_back({t.line.begin, t.line.end, ""});
    } else if (p.Has(Rewrite::kAddSpaceAfterTrailerColon) &&
               !IsOws(data[t.name.end + 1])) {
      edits.push_back({t.name.end + 1, t.name.end + 1, " "});
    }
  }
  return ApplyEdits(data, req.whole.begin, req.whole.end, std::move(edits));
}

size_t ElementOf(const std::vector<size_t>& ends, size_t offset) {
  return static_cast<size_t>(
      std::upper_bound(ends.begin(), ends.end(), offset) - ends.begin());
}

}  // namespace

TransduceResult Transduce(const Personality& transducer,
                          const RequestStream& stream,
                          coverage::Recorder* recorder) {
  TransduceResult out;
  Bytes data = stream.Concatenated();
  internal::EngineResult r =
      internal::RunEngine(transducer.quirks, data, recorder, transducer.poison);
  if (transducer.Has(Rewrite::kPassthrough)) {
    for (size_t i = 0; i < stream.size(); ++i) {
      out.requests.push_back({stream[i], i});
    }
    out.forwarded = stream;
    return out;
  }
  if (r.rejection) {
    out.rejected_offset = r.rejection->offset.value_or(r.resume);
    return out;
  }
  if (r.termination == Termination::kLoopDetected ||
      r.termination == Termination::kCrash) {
    out.rejected_offset = r.resume;
    return out;
  }
  if (transducer.Has(Rewrite::kRejectBareCrInOws)) {
    for (const RequestSpans& req : r.requests) {
      for (const ChunkSpan& c : req.chunks) {
        if (internal::HasCrBeforeSemicolon(data, c)) {
          out.rejected_offset = c.size.end;
          return out;
        }
      }
    }
  }
  std::vector<size_t> ends;
  size_t total = 0;
  for (const Bytes& e : stream.elements()) {
    total += e.size();
    ends.push_back(total);
  }
  std::vector<Bytes> elements;
  size_t last_source = SIZE_MAX;
  for (const RequestSpans& req : r.requests) {
    ForwardedRequest fwd{ForwardRequest(transducer, data, req),
                         ElementOf(ends, req.whole.end - 1)};
    if (transducer.Has(Rewrite::kUnpipeline) || fwd.source_element != last_source) {
      elements.push_back(fwd.bytes);
    } else {
      elements.back() += fwd.bytes;
    }
    last_source = fwd.source_element;
    out.requests.push_back(std::move(fwd));
  }
  out.forwarded = RequestStream(std::move(elements));
  return out;
}

}  // namespace garden::personalities
