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

#include "engine.h"

#include <string>
#include <utility>

#include "garden/wire.h"

namespace garden::personalities::internal {
namespace {

using wire::FramingInt;
using wire::IntMode;
using wire::IsHexDigit;
using wire::IsTchar;

bool IsOws(unsigned char c) { return c == ' ' || c == '\t'; }

bool IsCtl(unsigned char c) { return c < 0x20 || c == 0x7f; }

// Every parsing step either succeeds, needs bytes that have not arrived, or
// fails for good. kRewind is the unguarded negative Content-Length path.
enum class Step { kOk, kNeedMore, kFail, kRewind };

struct LineEnd {
  size_t content_end = 0;
  size_t next = 0;
};

class Engine {
 public:
  Engine(const QuirkSet& q, BytesView data, coverage::Recorder* recorder,
         const std::function<bool(BytesView)>& poison)
      : q_(q),
        data_(data),
        trace_(recorder),
        poison_(poison),
        budget_(4 * data.size() + 64) {}

  EngineResult Run() {
    EngineResult out;
    size_t pos = 0;
    while (true) {
      if (Step s = SkipEmptyLines(pos); s == Step::kNeedMore) {
        trace_.Hit();
        out.termination = Termination::kTimeout;
        break;
      }
      if (pos == data_.size()) {
        trace_.Hit();
        break;
      }
      RequestSpans req;
      size_t begin = pos;
      Step s = ParseRequest(pos, req);
      steps_ += (s == Step::kOk ? pos : scanned_) - begin + 1;
      if (steps_ > budget_) {
        trace_.Hit();
        out.termination = Termination::kLoopDetected;
        pos = begin;
        break;
      }
      if (s == Step::kNeedMore) {
        trace_.Hit();
        out.termination = Termination::kTimeout;
        pos = begin;
        break;
      }
      if (s == Step::kFail) {
        trace_.Hit();
        out.rejection = rejection_;
        pos = begin;
        break;
      }
      if (s == Step::kRewind) {
        // The read head goes back to where this request started.
        trace_.Hit();
        pos = begin;
        continue;
      }
      req.whole = {begin, pos};
      if (poison_ && poison_(data_.substr(begin, pos - begin))) {
        trace_.Hit();
        out.termination = Termination::kCrash;
        pos = begin;
        break;
      }
      trace_.HitValue(static_cast<uint32_t>(out.requests.size() < 4
                                                ? out.requests.size()
                                                : 4));
      out.requests.push_back(std::move(req));
    }
    out.resume = pos;
    return out;
  }

 private:
  Step Fail(size_t offset, int status, std::string reason) {
    rejection_ = Rejection{status, std::move(reason), offset};
    scanned_ = offset;
    return Step::kFail;
  }

  Step NeedMore() {
    scanned_ = data_.size();
    return Step::kNeedMore;
  }

  Step SkipEmptyLines(size_t& pos) {
    while (pos < data_.size()) {
      if (data_[pos] == '\r') {
        if (pos + 1 >= data_.size()) return Step::kNeedMore;
        if (data_[pos + 1] != '\n') return Step::kOk;
        trace_.Hit();
        pos += 2;
      } else if (data_[pos] == '\n' &&
                 q_.header_line_terminator != HeaderLineTerminator::kCrlfOnly) {
        trace_.Hit();
        ++pos;
      } else {
        return Step::kOk;
      }
    }
    return Step::kOk;
  }

  // Reads a start or field line under header_line_terminator.
  Step ReadHeadLine(size_t pos, bool allow_lf_inline, bool allow_cr_inline,
                    LineEnd& end) {
    HeaderLineTerminator mode = q_.header_line_terminator;
    for (size_t i = pos; i < data_.size(); ++i) {
      unsigned char c = data_[i];
      if (c == '\r') {
        if (i + 1 >= data_.size()) return NeedMore();
        if (data_[i + 1] == '\n') {
          trace_.Hit();
          end = {i, i + 2};
          return Step::kOk;
        }
        if (mode == HeaderLineTerminator::kAcceptsBareCr) {
          trace_.Hit();
          end = {i, i + 1};
          return Step::kOk;
        }
        if (allow_cr_inline) {
          trace_.Hit();
          continue;
        }
        trace_.Hit();
        return Fail(i, 400, "bare-cr");
      }
      if (c == '\n') {
        if (mode != HeaderLineTerminator::kCrlfOnly) {
          trace_.Hit();
          end = {i, i + 1};
          return Step::kOk;
        }
        if (allow_lf_inline) {
          trace_.Hit();
          continue;
        }
        trace_.Hit();
        return Fail(i, 400, "bare-lf");
      }
    }
    return NeedMore();
  }

  Step ReadChunkLine(size_t pos, LineEnd& end) {
    for (size_t i = pos; i < data_.size(); ++i) {
      unsigned char c = data_[i];
      if (c == '\r') {
        if (i + 1 >= data_.size()) return NeedMore();
        if (q_.chunk_line_terminator == ChunkLineTerminator::kAcceptsBareCr) {
          // CR ends the line and whatever byte follows it is eaten.
          trace_.HitValue(data_[i + 1] == '\n');
          end = {i, i + 2};
          return Step::kOk;
        }
        if (data_[i + 1] == '\n') {
          trace_.Hit();
          end = {i, i + 2};
          return Step::kOk;
        }
        trace_.Hit();
        continue;  // judged later as part of the line content
      }
      if (c == '\n') {
        if (q_.chunk_line_terminator == ChunkLineTerminator::kLfAllowed) {
          trace_.Hit();
          end = {i, i + 1};
          return Step::kOk;
        }
        trace_.Hit();
        return Fail(i, 400, "chunk-line-lf");
      }
    }
    return NeedMore();
  }

  // The CRLF (or lenient equivalent) after chunk data.
  Step ReadDataTerminator(size_t pos, size_t& next) {
    if (pos >= data_.size()) return NeedMore();
    unsigned char c = data_[pos];
    switch (q_.chunk_line_terminator) {
      case ChunkLineTerminator::kCrlfOnly:
        if (c != '\r') return Fail(pos, 400, "bad-chunk-terminator");
        if (pos + 1 >= data_.size()) return NeedMore();
        if (data_[pos + 1] != '\n') {
          return Fail(pos + 1, 400, "bad-chunk-terminator");
        }
        trace_.Hit();
        next = pos + 2;
        return Step::kOk;
      case ChunkLineTerminator::kLfAllowed:
        if (c == '\n') {
          trace_.Hit();
          next = pos + 1;
          return Step::kOk;
        }
        if (c != '\r') return Fail(pos, 400, "bad-chunk-terminator");
        if (pos + 1 >= data_.size()) return NeedMore();
        if (data_[pos + 1] != '\n') {
          return Fail(pos + 1, 400, "bad-chunk-terminator");
        }
        trace_.Hit();
        next = pos + 2;
        return Step::kOk;
      case ChunkLineTerminator::kAcceptsBareCr:
        if (c != '\r') {
          trace_.Hit();
          return Fail(pos, 400, c == '\n' ? "chunk-line-lf" : "bad-chunk-terminator");
        }
        if (pos + 1 >= data_.size()) return NeedMore();
        trace_.HitValue(data_[pos + 1] == '\n');
        next = pos + 2;
        return Step::kOk;
    }
    return Fail(pos, 400, "bad-chunk-terminator");
  }

  Step ParseStartLine(size_t& pos, RequestSpans& req, bool& http09) {
    LineEnd end;
    if (Step s = ReadHeadLine(pos, false, false, end); s != Step::kOk) return s;
    BytesView line = data_.substr(pos, end.content_end - pos);
    req.start_line = {pos, end.next};
    size_t sp1 = line.find(' ');
    if (sp1 == BytesView::npos || sp1 == 0) {
      trace_.Hit();
      return Fail(pos, 400, "bad-request-line");
    }
    for (size_t i = 0; i < sp1; ++i) {
      if (!IsTchar(line[i])) {
        trace_.Hit();
        return Fail(pos + i, 400, "bad-method");
      }
    }
    BytesView method = line.substr(0, sp1);
    trace_.HitValue(static_cast<uint32_t>(Fnv1a64(method) & 7));
    size_t sp2 = line.find(' ', sp1 + 1);
    size_t uri_end = sp2 == BytesView::npos ? line.size() : sp2;
    if (uri_end == sp1 + 1) {
      trace_.Hit();
      return Fail(pos + sp1 + 1, 400, "bad-request-line");
    }
    for (size_t i = sp1 + 1; i < uri_end; ++i) {
      unsigned char c = line[i];
      if (c <= 0x20 || c == 0x7f) {
        trace_.Hit();
        return Fail(pos + i, 400, "bad-request-target");
      }
    }
    req.entry.method = Bytes(method);
    req.entry.uri = Bytes(line.substr(sp1 + 1, uri_end - sp1 - 1));
    if (sp2 == BytesView::npos) {
      trace_.HitValue(static_cast<uint32_t>(q_.http09));
      if (q_.http09 == Http09::kAccept && method == "GET") {
        http09 = true;
        pos = end.next;
        return Step::kOk;
      }
      return Fail(pos, 400, "http09");
    }
    BytesView version = line.substr(sp2 + 1);
    bool shaped = version.size() == 8 && version.substr(0, 5) == "HTTP/" &&
                  version[5] >= '0' && version[5] <= '9' && version[6] == '.' &&
                  version[7] >= '0' && version[7] <= '9';
    if (!shaped) {
      trace_.Hit();
      return Fail(pos + sp2 + 1, 400, "bad-version");
    }
    if (version[5] != '1') {
      trace_.Hit();
      return Fail(pos + sp2 + 1, 505, "unsupported-version");
    }
    req.entry.version = Bytes(version);
    pos = end.next;
    return Step::kOk;
  }

  // Reads field lines up to and including the empty line.
  Step ParseFieldSection(size_t& pos, std::vector<FieldSpan>& fields) {
    bool concat = q_.nul_or_lf_in_value == NulOrLfInValue::kConcatenateToPrevious;
    bool cr_inline = q_.bare_cr_in_value == BareCrInValue::kAllow;
    while (true) {
      LineEnd end;
      if (Step s = ReadHeadLine(pos, concat, cr_inline, end); s != Step::kOk) {
        return s;
      }
      if (end.content_end == pos) {
        trace_.Hit();
        pos = end.next;
        return Step::kOk;
      }
      if (fields.size() >= 64) {
        trace_.Hit();
        return Fail(pos, 431, "too-many-fields");
      }
      FieldSpan f;
      f.line = {pos, end.next};
      size_t b = pos;
      size_t e = end.content_end;
      if (IsOws(data_[b])) {
        trace_.Hit();
        return Fail(b, 400, "obs-fold");
      }
      size_t colon = data_.find(':', b);
      if (colon == BytesView::npos || colon >= e) {
        trace_.Hit();
        return Fail(b, 400, "bad-field-line");
      }
      if (colon == b) return Fail(b, 400, "bad-field-name");
      for (size_t i = b; i < colon; ++i) {
        if (!IsTchar(data_[i])) {
          trace_.Hit();
          return Fail(i, 400, "bad-field-name");
        }
      }
      size_t vb = colon + 1;
      size_t ve = e;
      while (vb < ve && IsOws(data_[vb])) ++vb;
      while (ve > vb && IsOws(data_[ve - 1])) --ve;
      for (size_t i = vb; i < ve; ++i) {
        unsigned char c = data_[i];
        if (c == '\0' || c == '\n') {
          if (!concat) {
            trace_.Hit();
            return Fail(i, 400, "bad-field-value");
          }
          trace_.Hit();
          f.concatenated = true;
        } else if (c == '\r') {
          trace_.Hit();  // only reachable when bare CR is allowed inline
        } else if (IsCtl(c) && c != '\t') {
          trace_.Hit();
          return Fail(i, 400, "bad-field-value");
        }
      }
      f.name = {b, colon};
      f.value = {vb, ve};
      fields.push_back(f);
      pos = end.next;
    }
  }

  Bytes Slice(Span s) const {
    return Bytes(data_.substr(s.begin, s.end - s.begin));
  }

  // Whether the value of a framing integer is acceptable under `mode`.
  static bool Accepts(const FramingInt& v, BytesView text, IntMode mode) {
    if (!v.valid()) return false;
    if (mode.IgnoresTrailingBytes()) return v.consumed > 0;
    return v.consumed == text.size();
  }

  // Decides between chunked, Content-Length and no body.
  Step ResolveFraming(RequestSpans& req) {
    std::vector<size_t> te;
    std::vector<size_t> cl;
    for (size_t i = 0; i < req.fields.size(); ++i) {
      BytesView name = data_.substr(req.fields[i].name.begin,
                                    req.fields[i].name.end - req.fields[i].name.begin);
      if (EqualsIgnoreCase(name, "transfer-encoding")) te.push_back(i);
      if (EqualsIgnoreCase(name, "content-length")) cl.push_back(i);
    }
    bool chunked = false;
    if (!te.empty()) {
      trace_.HitValue(static_cast<uint32_t>(q_.transfer_coding_list));
      if (q_.transfer_coding_list == TransferCodingList::kLiteralMatch) {
        for (size_t i : te) {
          if (EqualsIgnoreCase(Slice(req.fields[i].value), "chunked")) {
            chunked = true;
          }
        }
        trace_.HitValue(chunked);
      } else {
        std::vector<Bytes> codings;
        for (size_t i : te) {
          Bytes v = Slice(req.fields[i].value);
          size_t start = 0;
          while (start <= v.size()) {
            size_t comma = v.find(',', start);
            if (comma == Bytes::npos) comma = v.size();
            size_t b = start;
            size_t e = comma;
            while (b < e && IsOws(v[b])) ++b;
            while (e > b && IsOws(v[e - 1])) --e;
            if (e > b) codings.push_back(AsciiLower(v.substr(b, e - b)));
            start = comma + 1;
          }
        }
        size_t offset = req.fields[te.front()].value.begin;
        if (codings.empty() || codings.back() != "chunked") {
          trace_.Hit();
          return Fail(offset, 400, "bad-transfer-coding");
        }
        for (size_t i = 0; i + 1 < codings.size(); ++i) {
          trace_.Hit();
          if (codings[i] == "chunked") return Fail(offset, 400, "bad-transfer-coding");
          return Fail(offset, 501, "unsupported-transfer-coding");
        }
        chunked = true;
        trace_.HitValue(static_cast<uint32_t>(codings.size() > 1));
      }
    }
    if (chunked && !cl.empty()) {
      trace_.Hit();
      return Fail(req.fields[cl.front()].line.begin, 400, "te-and-cl");
    }
    req.chunked = chunked;
    if (chunked) return Step::kOk;
    if (!cl.empty()) {
      Bytes raw = Slice(req.fields[cl.front()].value);
      for (size_t i : cl) {
        if (Slice(req.fields[i].value) != raw) {
          trace_.Hit();
          return Fail(req.fields[i].value.begin, 400, "bad-content-length");
        }
      }
      size_t offset = req.fields[cl.front()].value.begin;
      IntMode mode = q_.content_length_mode;
      trace_.HitValue(static_cast<uint32_t>(mode.kind));
      FramingInt v = raw.empty() ? FramingInt{} : wire::ParseFramingInteger(raw, mode);
      if (!Accepts(v, raw, mode)) {
        trace_.Hit();
        return Fail(offset, 400, "bad-content-length");
      }
      trace_.HitValue(static_cast<uint32_t>(v.consumed == raw.size()));
      if (*v.value < 0) {
        trace_.HitValue(static_cast<uint32_t>(q_.negative_cl_guard));
        if (q_.negative_cl_guard == NegativeClGuard::kRewindUnguarded) {
          scanned_ = req.fields[cl.front()].line.end;
          return Step::kRewind;
        }
        return Fail(offset, 400, "bad-content-length");
      }
      if (raw.size() > 1 && raw[0] == '0') trace_.Hit();
      req.content_length_field = cl.front();
      req.content_length = static_cast<uint64_t>(*v.value);
      return Step::kOk;
    }
    trace_.HitValue(static_cast<uint32_t>(q_.empty_body_post));
    if (req.entry.method == "POST" && q_.empty_body_post == EmptyBodyPost::kReject411) {
      return Fail(req.fields.empty() ? req.start_line.begin
                                     : req.fields.back().line.end,
                  411, "length-required");
    }
    return Step::kOk;
  }

  bool IsBws(unsigned char c) const {
    return IsOws(c) ||
           (c == '\r' &&
            q_.chunk_extension_whitespace == ChunkExtensionWhitespace::kAcceptsCr);
  }

  // chunk-ext = *( BWS ";" BWS ext-name [ BWS "=" BWS ext-val ] ), starting
  // at the first ';'. Returns the offset of the first bad byte, if any.
  std::optional<size_t> CheckExtension(size_t b, size_t e) {
    size_t i = b;
    auto skip = [&] {
      while (i < e && IsBws(data_[i])) ++i;
    };
    while (true) {
      skip();
      if (i == e) return std::nullopt;
      if (data_[i] != ';') return i;
      ++i;
      skip();
      size_t name = i;
      while (i < e && IsTchar(data_[i])) ++i;
      if (i == name) return i;
      size_t save = i;
      skip();
      if (i < e && data_[i] == '=') {
        ++i;
        skip();
        if (i < e && data_[i] == '"') {
          ++i;
          bool closed = false;
          while (i < e) {
            unsigned char c = data_[i];
            if (c == '"') {
              closed = true;
              ++i;
              break;
            }
            if (c == '\\') {
              ++i;
              if (i == e || (IsCtl(data_[i]) && data_[i] != '\t')) return i;
            } else if (IsCtl(c) && c != '\t') {
              return i;
            }
            ++i;
          }
          if (!closed) return e;
        } else {
          size_t val = i;
          while (i < e && IsTchar(data_[i])) ++i;
          if (i == val) return i;
        }
      } else {
        i = save;
      }
    }
  }

  Step ParseChunkLine(size_t& pos, ChunkSpan& chunk) {
    LineEnd end;
    if (Step s = ReadChunkLine(pos, end); s != Step::kOk) return s;
    chunk.line = {pos, end.next};
    chunk.content = {pos, end.content_end};
    size_t semi = data_.find(';', pos);
    if (semi != BytesView::npos && semi < end.content_end) chunk.semicolon = semi;
    size_t size_end = chunk.semicolon.value_or(end.content_end);
    if (chunk.semicolon) {
      trace_.HitValue(static_cast<uint32_t>(q_.chunk_extension_whitespace));
      while (size_end > pos && IsBws(data_[size_end - 1])) --size_end;
    }
    chunk.size = {pos, size_end};
    for (size_t i = pos; i < size_end; ++i) {
      if (data_[i] == '\r') {
        trace_.Hit();
        return Fail(i, 400, "bare-cr");
      }
    }
    if (chunk.semicolon) {
      if (auto bad = CheckExtension(*chunk.semicolon, end.content_end)) {
        trace_.Hit();
        return Fail(*bad, 400, data_[*bad] == '\r' ? "bare-cr" : "bad-chunk-extension");
      }
    }
    BytesView text = data_.substr(pos, size_end - pos);
    IntMode mode = q_.chunk_size_mode;
    trace_.HitValue(static_cast<uint32_t>(mode.kind));
    FramingInt v = text.empty() ? FramingInt{} : wire::ParseFramingInteger(text, mode);
    if (!Accepts(v, text, mode) || *v.value < 0) {
      trace_.Hit();
      return Fail(pos, 400, "bad-chunk-size");
    }
    chunk.strictly_valid_size = !text.empty();
    for (unsigned char c : text) {
      if (!IsHexDigit(c)) chunk.strictly_valid_size = false;
    }
    trace_.HitValue(chunk.strictly_valid_size);
    chunk.value = static_cast<uint64_t>(*v.value);
    pos = end.next;
    return Step::kOk;
  }

  Step ParseChunkedBody(size_t& pos, RequestSpans& req) {
    while (true) {
      if (req.chunks.size() >= 256) {
        trace_.Hit();
        return Fail(pos, 400, "too-many-chunks");
      }
      ChunkSpan chunk;
      if (Step s = ParseChunkLine(pos, chunk); s != Step::kOk) return s;
      if (chunk.value == 0) {
        chunk.data = {pos, pos};
        chunk.data_terminator = {pos, pos};
        req.chunks.push_back(chunk);
        size_t section = pos;
        trace_.HitValue(static_cast<uint32_t>(q_.chunk_terminator_laxity));
        if (q_.chunk_terminator_laxity == ChunkTerminatorLaxity::kCrlfPlusAnyTwoBytes) {
          if (pos + 2 > data_.size()) return NeedMore();
          trace_.HitValue(data_.substr(pos, 2) == "\r\n");
          pos += 2;
        } else if (Step s = ParseFieldSection(pos, req.trailers); s != Step::kOk) {
          return s;
        }
        req.trailer_section = {section, pos};
        return Step::kOk;
      }
      if (chunk.value > data_.size() - pos) return NeedMore();
      size_t n = static_cast<size_t>(chunk.value);
      chunk.data = {pos, pos + n};
      req.entry.body += data_.substr(pos, n);
      pos += n;
      size_t next = 0;
      if (Step s = ReadDataTerminator(pos, next); s != Step::kOk) return s;
      chunk.data_terminator = {pos, next};
      pos = next;
      req.chunks.push_back(chunk);
    }
  }

  Step ParseRequest(size_t& pos, RequestSpans& req) {
    scanned_ = pos;
    bool http09 = false;
    if (Step s = ParseStartLine(pos, req, http09); s != Step::kOk) return s;
    if (http09) return Step::kOk;
    if (Step s = ParseFieldSection(pos, req.fields); s != Step::kOk) return s;
    if (Step s = ResolveFraming(req); s != Step::kOk) return s;
    BuildHeaders(req);
    if (req.chunked) return ParseChunkedBody(pos, req);
    if (req.content_length > data_.size() - pos) return NeedMore();
    size_t n = static_cast<size_t>(req.content_length);
    req.entry.body = Bytes(data_.substr(pos, n));
    pos += n;
    return Step::kOk;
  }

  // Concatenation happens after framing has been decided.
  void BuildHeaders(RequestSpans& req) {
    for (const FieldSpan& f : req.fields) {
      Bytes value = Slice(f.value);
      if (f.concatenated && !req.entry.headers.empty()) {
        Bytes cleaned;
        for (char c : value) {
          if (c != '\0' && c != '\n') cleaned += c;
        }
        req.entry.headers.back().second += cleaned;
        continue;
      }
      req.entry.headers.emplace_back(Slice(f.name), std::move(value));
    }
  }

  const QuirkSet& q_;
  BytesView data_;
  coverage::Trace trace_;
  const std::function<bool(BytesView)>& poison_;
  size_t budget_;
  size_t steps_ = 0;
  size_t scanned_ = 0;
  Rejection rejection_;
};

}  // namespace

EngineResult RunEngine(const QuirkSet& quirks, BytesView data,
                       coverage::Recorder* recorder,
                       const std::function<bool(BytesView)>& poison) {
  return Engine(quirks, data, recorder, poison).Run();
}

bool HasCrBeforeSemicolon(BytesView data, const ChunkSpan& chunk) {
  if (!chunk.semicolon) return false;
  for (size_t i = chunk.size.end; i < *chunk.semicolon; ++i) {
    if (data[i] == '\r') return true;
  }
  return false;
}

}  // namespace garden::personalities::internal
