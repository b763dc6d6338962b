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

#include <string>
#include <utility>

#include "garden/wire.h"

namespace garden::wire {

bool IsTchar(unsigned char c) {
  if (c >= '0' && c <= '9') return true;
  if (c >= 'a' && c <= 'z') return true;
  if (c >= 'A' && c <= 'Z') return true;
  switch (c) {
    case '!': case '#': case '$': case '%': case '&': case '\'': case '*':
    case '+': case '-': case '.': case '^': case '_': case '`': case '|':
    case '~':
      return true;
    default:
      return false;
  }
}

namespace {

bool IsVchar(unsigned char c) { return c >= 0x21 && c <= 0x7e; }
bool IsObsText(unsigned char c) { return c >= 0x80; }
bool IsOws(unsigned char c) { return c == ' ' || c == '\t'; }

// Internal control flow for the recursive-descent parser. A parse either
// succeeds, runs out of input, or fails at a position.
enum class Step { kOk, kNeedMore, kFail };

class StrictParser {
 public:
  StrictParser(BytesView data, const StrictLimits& limits)
      : data_(data), limits_(limits) {}

  ParseOutcome Run() {
    if (data_.size() > limits_.max_bytes) {
      return ParseRejected{limits_.max_bytes, "too-large"};
    }
    std::vector<HttpRequestModel> done;
    size_t pos = 0;
    while (pos < data_.size()) {
      HttpRequestModel model;
      size_t start = pos;
      Step step = ParseRequest(pos, model);
      if (step == Step::kFail) return ParseRejected{fail_pos_, fail_reason_};
      if (step == Step::kNeedMore) {
        return ParseIncomplete{std::move(done), start};
      }
      done.push_back(std::move(model));
    }
    return ParseComplete{std::move(done), {}};
  }

 private:
  Step Fail(size_t pos, std::string reason) {
    fail_pos_ = pos;
    fail_reason_ = std::move(reason);
    return Step::kFail;
  }

  // Reads a CRLF-terminated line starting at `pos`. Bare CR or LF inside the
  // line is a failure. On success `content` excludes the CRLF.
  Step ReadLine(size_t& pos, BytesView& content) {
    for (size_t i = pos; i < data_.size(); ++i) {
      unsigned char c = data_[i];
      if (c == '\n') return Fail(i, "bare-lf");
      if (c != '\r') continue;
      if (i + 1 == data_.size()) return Step::kNeedMore;
      if (data_[i + 1] != '\n') return Fail(i, "bare-cr");
      content = data_.substr(pos, i - pos);
      pos = i + 2;
      return Step::kOk;
    }
    return Step::kNeedMore;
  }

  Step ParseStartLine(size_t& pos, HttpRequestModel& m) {
    size_t line_start = pos;
    BytesView line;
    if (Step s = ReadLine(pos, line); s != Step::kOk) {
      // A partial line can still be rejected if it is already malformed.
      if (s == Step::kNeedMore) {
        Step early = CheckStartLinePrefix(line_start);
        if (early == Step::kFail) return early;
      }
      return s;
    }
    size_t i = 0;
    while (i < line.size() && IsTchar(line[i])) ++i;
    if (i == 0 || i == line.size() || line[i] != ' ') {
      return Fail(line_start + i, "bad-method");
    }
    m.method = Bytes(line.substr(0, i));
    m.sp1 = " ";
    size_t uri_begin = ++i;
    while (i < line.size() && (IsVchar(line[i]) || IsObsText(line[i]))) ++i;
    if (i == uri_begin) return Fail(line_start + i, "bad-target");
    m.uri = Bytes(line.substr(uri_begin, i - uri_begin));
    if (i == line.size()) return Fail(line_start + i, "http09");
    if (line[i] != ' ') return Fail(line_start + i, "bad-target");
    m.sp2 = " ";
    BytesView version = line.substr(i + 1);
    if (version.size() != 8 || version.substr(0, 5) != "HTTP/" ||
        version[5] < '0' || version[5] > '9' || version[6] != '.' ||
        version[7] < '0' || version[7] > '9') {
      return Fail(line_start + i + 1, "bad-version");
    }
    if (version[5] != '1') return Fail(line_start + i + 6, "unsupported-version");
    m.version = Bytes(version);
    m.start_terminator = "\r\n";
    return Step::kOk;
  }

  // Rejects obviously broken request lines before the terminator arrives,
  // so that e.g. a leading empty line fails instead of waiting forever.
  Step CheckStartLinePrefix(size_t pos) {
    if (pos < data_.size() && !IsTchar(data_[pos])) {
      return Fail(pos, data_[pos] == '\r' || data_[pos] == '\n'
                           ? "leading-empty-line"
                           : "bad-method");
    }
    return Step::kNeedMore;
  }

  Step ParseFieldLine(size_t line_start, BytesView line, HeaderLine& out) {
    size_t i = 0;
    while (i < line.size() && IsTchar(line[i])) ++i;
    if (i == 0) {
      return Fail(line_start, IsOws(line.empty() ? 0 : line[0]) ? "obs-fold"
                                                                 : "bad-field-name");
    }
    if (i == line.size() || line[i] != ':') return Fail(line_start + i, "bad-field-name");
    out.name = Bytes(line.substr(0, i));
    size_t sep_begin = i++;
    while (i < line.size() && IsOws(line[i])) ++i;
    out.separator = Bytes(line.substr(sep_begin, i - sep_begin));
    size_t end = line.size();
    while (end > i && IsOws(line[end - 1])) --end;
    for (size_t k = i; k < end; ++k) {
      unsigned char c = line[k];
      if (!(IsVchar(c) || IsObsText(c) || IsOws(c))) {
        return Fail(line_start + k, "bad-field-value");
      }
    }
    out.value = Bytes(line.substr(i, end - i));
    out.terminator = "\r\n";
    return Step::kOk;
  }

  // Parses field lines up to and including the empty line.
  Step ParseFieldSection(size_t& pos, std::vector<HeaderLine>& fields,
                         Bytes& terminator) {
    while (true) {
      size_t line_start = pos;
      BytesView line;
      if (Step s = ReadLine(pos, line); s != Step::kOk) return s;
      if (line.empty()) {
        terminator = "\r\n";
        return Step::kOk;
      }
      if (fields.size() >= limits_.max_headers) {
        return Fail(line_start, "too-many-fields");
      }
      HeaderLine field;
      if (Step s = ParseFieldLine(line_start, line, field); s != Step::kOk) {
        return s;
      }
      fields.push_back(std::move(field));
    }
  }

  // chunk-ext = *( BWS ";" BWS ext-name [ BWS "=" BWS ext-val ] )
  bool ValidChunkExtension(BytesView ext) {
    size_t i = 0;
    auto skip_bws = [&] {
      while (i < ext.size() && IsOws(ext[i])) ++i;
    };
    while (true) {
      skip_bws();
      if (i == ext.size()) return true;
      if (ext[i] != ';') return false;
      ++i;
      skip_bws();
      size_t name_begin = i;
      while (i < ext.size() && IsTchar(ext[i])) ++i;
      if (i == name_begin) return false;
      size_t save = i;
      skip_bws();
      if (i < ext.size() && ext[i] == '=') {
        ++i;
        skip_bws();
        if (i < ext.size() && ext[i] == '"') {
          ++i;
          bool closed = false;
          while (i < ext.size()) {
            unsigned char c = ext[i];
            if (c == '"') {
              closed = true;
              ++i;
              break;
            }
            if (c == '\\') {
              if (++i == ext.size()) return false;
              unsigned char q = ext[i];
              if (!(IsVchar(q) || IsOws(q) || IsObsText(q))) return false;
              ++i;
              continue;
            }
            if (!(IsOws(c) || c == 0x21 || (c >= 0x23 && c <= 0x5b) ||
                  (c >= 0x5d && c <= 0x7e) || IsObsText(c))) {
              return false;
            }
            ++i;
          }
          if (!closed) return false;
        } else {
          size_t val_begin = i;
          while (i < ext.size() && IsTchar(ext[i])) ++i;
          if (i == val_begin) return false;
        }
      } else {
        i = save;
      }
    }
  }

  Step ParseChunkedBody(size_t& pos, HttpRequestModel& m) {
    while (true) {
      if (m.chunks.size() >= limits_.max_chunks) return Fail(pos, "too-many-chunks");
      size_t line_start = pos;
      BytesView line;
      if (Step s = ReadLine(pos, line); s != Step::kOk) return s;
      size_t digits = 0;
      while (digits < line.size() && IsHexDigit(line[digits])) ++digits;
      if (digits == 0) return Fail(line_start, "bad-chunk-size");
      ChunkModel chunk;
      chunk.size_raw = Bytes(line.substr(0, digits));
      FramingInt size = ParseFramingInteger(chunk.size_raw, IntMode::StrictHex());
      if (!size.valid()) return Fail(line_start, "chunk-size-overflow");
      chunk.size_value = static_cast<uint64_t>(*size.value);
      chunk.extension_raw = Bytes(line.substr(digits));
      if (!ValidChunkExtension(chunk.extension_raw)) {
        return Fail(line_start + digits, "bad-chunk-extension");
      }
      chunk.size_terminator = "\r\n";
      if (*chunk.size_value == 0) {
        m.chunks.push_back(std::move(chunk));
        return ParseFieldSection(pos, m.trailers, m.trailer_terminator);
      }
      uint64_t n = *chunk.size_value;
      if (data_.size() - pos < n) return Step::kNeedMore;
      chunk.data = Bytes(data_.substr(pos, n));
      m.body += chunk.data;
      pos += n;
      if (pos + 2 > data_.size()) {
        if (pos < data_.size() && data_[pos] != '\r') {
          return Fail(pos, "bad-chunk-terminator");
        }
        return Step::kNeedMore;
      }
      if (data_[pos] != '\r' || data_[pos + 1] != '\n') {
        return Fail(pos, "bad-chunk-terminator");
      }
      chunk.data_terminator = "\r\n";
      pos += 2;
      m.chunks.push_back(std::move(chunk));
    }
  }

  Step ParseRequest(size_t& pos, HttpRequestModel& m) {
    if (Step s = ParseStartLine(pos, m); s != Step::kOk) return s;
    size_t head_start = pos;
    if (Step s = ParseFieldSection(pos, m.headers, m.head_terminator);
        s != Step::kOk) {
      return s;
    }

    bool chunked = false;
    bool has_te = false;
    std::optional<int64_t> content_length;
    for (const HeaderLine& h : m.headers) {
      if (EqualsIgnoreCase(h.name, "transfer-encoding")) {
        // Senders may not emit empty list elements, and only chunked is
        // understood here.
        if (has_te || !EqualsIgnoreCase(h.value, "chunked")) {
          return Fail(head_start, "unsupported-transfer-coding");
        }
        has_te = true;
        chunked = true;
      } else if (EqualsIgnoreCase(h.name, "content-length")) {
        FramingInt v = ParseFramingInteger(h.value, IntMode::StrictDecimal());
        if (!v.valid()) return Fail(head_start, "bad-content-length");
        if (content_length && *content_length != *v.value) {
          return Fail(head_start, "conflicting-content-length");
        }
        content_length = v.value;
      }
    }
    if (chunked && content_length) return Fail(head_start, "te-and-cl");

    if (chunked) {
      m.framing = Framing::kChunked;
      return ParseChunkedBody(pos, m);
    }
    if (content_length) {
      m.framing = Framing::kContentLength;
      uint64_t n = static_cast<uint64_t>(*content_length);
      if (data_.size() - pos < n) return Step::kNeedMore;
      m.body = Bytes(data_.substr(pos, n));
      pos += n;
    }
    return Step::kOk;
  }

  BytesView data_;
  StrictLimits limits_;
  size_t fail_pos_ = 0;
  std::string fail_reason_;
};

}  // namespace

ParseOutcome ParseStrict(BytesView data, const StrictLimits& limits) {
  return StrictParser(data, limits).Run();
}

}  // namespace garden::wire
