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

#include <algorithm>
#include <string>

#include "garden/wire.h"

namespace garden::wire {

std::optional<Bytes> HttpRequestModel::ContentLengthRaw() const {
  const HeaderLine* h = FindHeader("content-length");
  if (h == nullptr) return std::nullopt;
  return h->value;
}

const HeaderLine* HttpRequestModel::FindHeader(BytesView name) const {
  for (const HeaderLine& h : headers) {
    if (EqualsIgnoreCase(h.name, name)) return &h;
  }
  return nullptr;
}

namespace {

void AppendLine(Bytes& out, const HeaderLine& h) {
  out += h.name;
  out += h.separator;
  out += h.value;
  out += h.terminator;
}

}  // namespace

Bytes Serialize(const HttpRequestModel& m) {
  Bytes out;
  if (m.structured) {
    out += m.preamble;
    out += m.method;
    out += m.sp1;
    out += m.uri;
    out += m.sp2;
    out += m.version;
    out += m.start_terminator;
    for (const HeaderLine& h : m.headers) AppendLine(out, h);
    out += m.head_terminator;
    if (m.IsChunked()) {
      for (const ChunkModel& c : m.chunks) {
        out += c.size_raw;
        out += c.extension_raw;
        out += c.size_terminator;
        out += c.data;
        out += c.data_terminator;
      }
      for (const HeaderLine& t : m.trailers) AppendLine(out, t);
      out += m.trailer_terminator;
    } else {
      out += m.body;
    }
  }
  out += m.raw_tail;
  return out;
}

Bytes SerializeAll(std::span<const HttpRequestModel> models) {
  Bytes out;
  for (const HttpRequestModel& m : models) out += Serialize(m);
  return out;
}

namespace {

constexpr size_t kLenientMaxChunks = 256;

struct Line {
  BytesView content;
  BytesView terminator;
};

// Splits at the first CRLF, LF, or bare CR. At end of input the terminator
// is empty.
Line NextLine(BytesView data, size_t& pos) {
  size_t i = pos;
  while (i < data.size() && data[i] != '\r' && data[i] != '\n') ++i;
  Line line{data.substr(pos, i - pos), {}};
  size_t term = 0;
  if (i < data.size()) {
    term = (data[i] == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ? 2 : 1;
  }
  line.terminator = data.substr(i, term);
  pos = i + term;
  return line;
}

HeaderLine SplitFieldLine(const Line& line) {
  HeaderLine h;
  size_t colon = line.content.find(':');
  if (colon == BytesView::npos) {
    h.name = Bytes(line.content);
  } else {
    size_t v = colon + 1;
    while (v < line.content.size() &&
           (line.content[v] == ' ' || line.content[v] == '\t')) {
      ++v;
    }
    h.name = Bytes(line.content.substr(0, colon));
    h.separator = Bytes(line.content.substr(colon, v - colon));
    h.value = Bytes(line.content.substr(v));
  }
  h.terminator = Bytes(line.terminator);
  return h;
}

// Reads field lines until an empty line or end of input.
void ReadFields(BytesView data, size_t& pos, std::vector<HeaderLine>& fields,
                Bytes& terminator) {
  while (pos < data.size()) {
    size_t save = pos;
    Line line = NextLine(data, pos);
    if (line.content.empty()) {
      terminator = Bytes(line.terminator);
      return;
    }
    fields.push_back(SplitFieldLine(line));
    if (line.terminator.empty()) {
      pos = save + line.content.size();
      return;
    }
  }
}

std::optional<uint64_t> LeadingDecimal(BytesView value) {
  size_t i = 0;
  while (i < value.size() && (value[i] == ' ' || value[i] == '\t')) ++i;
  FramingInt v = ParseFramingInteger(value.substr(i), IntMode::LongestValidPrefix(10));
  if (!v.valid()) return std::nullopt;
  return static_cast<uint64_t>(*v.value);
}

void ReadChunks(BytesView data, size_t& pos, HttpRequestModel& m) {
  while (pos < data.size() && m.chunks.size() < kLenientMaxChunks) {
    size_t line_start = pos;
    Line line = NextLine(data, pos);
    size_t split = 0;
    while (split < line.content.size() && line.content[split] != ';' &&
           line.content[split] != ' ' && line.content[split] != '\t') {
      ++split;
    }
    ChunkModel chunk;
    chunk.size_raw = Bytes(line.content.substr(0, split));
    FramingInt size = ParseFramingInteger(chunk.size_raw,
                                          IntMode::LongestValidPrefix(16));
    if (!size.valid()) {
      // Not a chunk line; leave the bytes for raw_tail.
      pos = line_start;
      return;
    }
    chunk.size_value = static_cast<uint64_t>(*size.value);
    chunk.extension_raw = Bytes(line.content.substr(split));
    chunk.size_terminator = Bytes(line.terminator);
    if (*chunk.size_value == 0) {
      m.chunks.push_back(std::move(chunk));
      ReadFields(data, pos, m.trailers, m.trailer_terminator);
      return;
    }
    size_t n = static_cast<size_t>(
        std::min<uint64_t>(*chunk.size_value, data.size() - pos));
    chunk.data = Bytes(data.substr(pos, n));
    m.body += chunk.data;
    pos += n;
    if (pos < data.size() && (data[pos] == '\r' || data[pos] == '\n')) {
      size_t len = (data[pos] == '\r' && pos + 1 < data.size() &&
                    data[pos + 1] == '\n')
                       ? 2
                       : 1;
      chunk.data_terminator = Bytes(data.substr(pos, len));
      pos += len;
    }
    m.chunks.push_back(std::move(chunk));
  }
}

HttpRequestModel ParseOne(BytesView data, size_t& pos) {
  HttpRequestModel m;
  size_t begin = pos;
  while (pos < data.size() && (data[pos] == '\r' || data[pos] == '\n')) ++pos;
  m.preamble = Bytes(data.substr(begin, pos - begin));

  Line start = NextLine(data, pos);
  size_t sp = start.content.find(' ');
  if (start.content.empty() || sp == BytesView::npos || sp == 0) {
    // Unrecognizable: keep everything from `begin` verbatim.
    HttpRequestModel raw;
    raw.structured = false;
    raw.raw_tail = Bytes(data.substr(begin));
    pos = data.size();
    return raw;
  }
  BytesView content = start.content;
  m.method = Bytes(content.substr(0, sp));
  size_t i = sp;
  while (i < content.size() && content[i] == ' ') ++i;
  m.sp1 = Bytes(content.substr(sp, i - sp));
  size_t uri_end = content.find(' ', i);
  if (uri_end == BytesView::npos) uri_end = content.size();
  m.uri = Bytes(content.substr(i, uri_end - i));
  size_t v = uri_end;
  while (v < content.size() && content[v] == ' ') ++v;
  m.sp2 = Bytes(content.substr(uri_end, v - uri_end));
  m.version = Bytes(content.substr(v));
  m.start_terminator = Bytes(start.terminator);
  if (start.terminator.empty()) return m;

  ReadFields(data, pos, m.headers, m.head_terminator);
  if (m.head_terminator.empty()) return m;

  bool chunked = false;
  bool has_cl = false;
  uint64_t length = 0;
  for (const HeaderLine& h : m.headers) {
    if (EqualsIgnoreCase(h.name, "transfer-encoding") &&
        AsciiLower(h.value).find("chunked") != Bytes::npos) {
      chunked = true;
    } else if (EqualsIgnoreCase(h.name, "content-length") && !has_cl) {
      if (auto n = LeadingDecimal(h.value)) {
        has_cl = true;
        length = *n;
      }
    }
  }
  if (chunked) {
    m.framing = has_cl ? Framing::kBoth : Framing::kChunked;
    ReadChunks(data, pos, m);
  } else if (has_cl) {
    m.framing = Framing::kContentLength;
    size_t n = static_cast<size_t>(std::min<uint64_t>(length, data.size() - pos));
    m.body = Bytes(data.substr(pos, n));
    pos += n;
  }
  return m;
}

}  // namespace

std::vector<HttpRequestModel> ParseLenient(BytesView data) {
  std::vector<HttpRequestModel> models;
  size_t pos = 0;
  while (pos < data.size()) {
    size_t before = pos;
    models.push_back(ParseOne(data, pos));
    if (pos == before) {
      // No progress is impossible by construction, but guard anyway by
      // moving the remainder into a raw model.
      models.back() = HttpRequestModel{};
      models.back().structured = false;
      models.back().raw_tail = Bytes(data.substr(pos));
      break;
    }
  }
  if (models.empty()) {
    HttpRequestModel empty;
    empty.structured = false;
    models.push_back(std::move(empty));
  }
  return models;
}

}  // namespace garden::wire
