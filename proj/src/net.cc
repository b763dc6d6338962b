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

#include "garden/net.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <utility>

#include "absl/strings/str_cat.h"
#include "json.hpp"

namespace garden::net {

using personalities::InterpretationReport;
using personalities::ParsedEntry;
using personalities::Rejection;
using personalities::ReportEntry;

absl::Status Endpoint::Validate() const {
  if (port < 1 || port > 65535) {
    return absl::InvalidArgumentError(absl::StrCat("port out of range: ", port));
  }
  if (read_timeout_ms < 10) {
    return absl::InvalidArgumentError("read timeout must be at least 10 ms");
  }
  if (connect_timeout_ms < 1) {
    return absl::InvalidArgumentError("connect timeout must be positive");
  }
  return absl::OkStatus();
}

Bytes ResponseSegments::Concatenated() const {
  Bytes out;
  for (const Segment& s : segments) out += s.bytes;
  return out;
}

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    Reset();
    fd_ = std::exchange(o.fd_, -1);
    return *this;
  }
  ~Fd() { Reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int Release() { return std::exchange(fd_, -1); }
  void Reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string Errno(std::string_view what) {
  return absl::StrCat(std::string(what), ": ", std::strerror(errno));
}

absl::StatusOr<Fd> Connect(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port = std::to_string(e.port);
  if (int rc = ::getaddrinfo(e.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    return absl::UnavailableError(
        absl::StrCat("resolve ", e.host, ": ", ::gai_strerror(rc)));
  }
  absl::Status last = absl::UnavailableError("no addresses");
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!fd.valid()) {
      last = absl::UnavailableError(Errno("socket"));
      continue;
    }
    int flags = ::fcntl(fd.get(), F_GETFL);
    ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd.get(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno != EINPROGRESS) {
      last = absl::UnavailableError(Errno("connect"));
      continue;
    }
    if (rc != 0) {
      pollfd p{fd.get(), POLLOUT, 0};
      if (::poll(&p, 1, e.connect_timeout_ms) <= 0) {
        last = absl::DeadlineExceededError("connect timed out");
        continue;
      }
      int err = 0;
      socklen_t len = sizeof(err);
      ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        last = absl::UnavailableError(
            absl::StrCat("connect: ", std::strerror(err)));
        continue;
      }
    }
    ::fcntl(fd.get(), F_SETFL, flags);
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    ::freeaddrinfo(res);
    return fd;
  }
  ::freeaddrinfo(res);
  return last;
}

bool WriteAll(int fd, BytesView data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<size_t>(n));
  }
  return true;
}

enum class ReadStatus { kTimeout, kData, kEof, kError };

ReadStatus ReadSome(int fd, int timeout_ms, Bytes& out) {
  pollfd p{fd, POLLIN, 0};
  int rc = ::poll(&p, 1, timeout_ms);
  if (rc == 0) return ReadStatus::kTimeout;
  if (rc < 0) return errno == EINTR ? ReadStatus::kTimeout : ReadStatus::kError;
  char buf[16384];
  ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
  if (n > 0) {
    out.append(buf, static_cast<size_t>(n));
    return ReadStatus::kData;
  }
  if (n == 0) return ReadStatus::kEof;
  return errno == EINTR ? ReadStatus::kTimeout : ReadStatus::kError;
}

// Closes so that the peer sees FIN after everything we sent, not RST.
void GracefulClose(Fd& fd) {
  ::shutdown(fd.get(), SHUT_WR);
  Bytes sink;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
  while (std::chrono::steady_clock::now() < deadline) {
    ReadStatus s = ReadSome(fd.get(), 50, sink);
    if (s == ReadStatus::kEof || s == ReadStatus::kError) break;
    sink.clear();
  }
  fd.Reset();
}

void AbortiveClose(Fd& fd) {
  linger l{1, 0};
  ::setsockopt(fd.get(), SOL_SOCKET, SO_LINGER, &l, sizeof(l));
  fd.Reset();
}

std::string ReasonPhrase(int status) {
  switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 411: return "Length Required";
    case 431: return "Request Header Fields Too Large";
    case 501: return "Not Implemented";
    case 502: return "Bad Gateway";
    case 505: return "HTTP Version Not Supported";
    default: return "Error";
  }
}

Bytes Response(int status, BytesView body, bool close) {
  return absl::StrCat("HTTP/1.1 ", status, " ", ReasonPhrase(status),
                      "\r\nContent-Type: application/json\r\nContent-Length: ",
                      body.size(), close ? "\r\nConnection: close" : "",
                      "\r\n\r\n", std::string(body));
}

}  // namespace

absl::StatusOr<ResponseSegments> ExchangeStream(const Endpoint& e,
                                                const RequestStream& s) {
  if (absl::Status st = e.Validate(); !st.ok()) return st;
  absl::StatusOr<Fd> fd = Connect(e);
  if (!fd.ok()) return fd.status();
  ResponseSegments out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!s[i].empty() && !WriteAll(fd->get(), s[i])) {
      out.reset = true;
      break;
    }
    Bytes got;
    ReadStatus status;
    while ((status = ReadSome(fd->get(), e.read_timeout_ms, got)) ==
           ReadStatus::kData) {
    }
    if (!got.empty()) out.segments.push_back({std::move(got), i});
    if (status == ReadStatus::kEof) {
      out.peer_closed = true;
      break;
    }
    if (status == ReadStatus::kError) {
      out.reset = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Servers
// ---------------------------------------------------------------------------

Server::~Server() { Stop(); }

Endpoint Server::endpoint(int read_timeout_ms) const {
  Endpoint e;
  e.port = port_;
  e.read_timeout_ms = read_timeout_ms;
  return e;
}

absl::Status Server::Listen(const Endpoint& e) {
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd.valid()) return absl::UnavailableError(Errno("socket"));
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(e.port));
  if (::inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) != 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("listen address must be IPv4: ", e.host));
  }
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    return absl::UnavailableError(Errno(absl::StrCat("bind port ", e.port)));
  }
  if (::listen(fd.get(), 64) != 0) return absl::UnavailableError(Errno("listen"));
  socklen_t len = sizeof(addr);
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  listen_fd_ = fd.Release();
  acceptor_ = std::thread([this] { AcceptLoop(); });
  return absl::OkStatus();
}

void Server::AcceptLoop() {
  while (!stopping_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    int c = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (c < 0) continue;
    int one = 1;
    ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> lock(mu_);
    workers_.emplace_back([this, c] { HandleConnection(c); });
  }
}

void Server::Stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    workers.swap(workers_);
  }
  for (std::thread& t : workers) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void Server::Wait() {
  while (!stopping_.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

absl::StatusOr<std::unique_ptr<EchoServer>> EchoServer::Start(const Endpoint& e) {
  std::unique_ptr<EchoServer> s(new EchoServer());
  s->read_timeout_ms_ = e.read_timeout_ms;
  if (absl::Status st = s->Listen(e); !st.ok()) return st;
  return s;
}

void EchoServer::HandleConnection(int raw) {
  Fd fd(raw);
  while (!stopping()) {
    Bytes burst;
    ReadStatus status = ReadStatus::kTimeout;
    // Idle until the first byte of a burst.
    while (!stopping() && burst.empty()) {
      status = ReadSome(fd.get(), 50, burst);
      if (status == ReadStatus::kEof || status == ReadStatus::kError) break;
    }
    if (burst.empty()) return;
    while (status == ReadStatus::kData) {
      status = ReadSome(fd.get(), read_timeout_ms_, burst);
    }
    Bytes reply = absl::StrCat("HTTP/1.1 200 OK\r\nContent-Length: ",
                               burst.size(), "\r\n\r\n", burst);
    if (!WriteAll(fd.get(), reply)) return;
    if (status == ReadStatus::kEof || status == ReadStatus::kError) return;
  }
}

absl::StatusOr<std::unique_ptr<OriginShim>> OriginShim::Start(
    personalities::Personality p, const Endpoint& e) {
  std::unique_ptr<OriginShim> s(new OriginShim());
  s->p_ = std::move(p);
  if (absl::Status st = s->Listen(e); !st.ok()) return st;
  return s;
}

void OriginShim::HandleConnection(int raw) {
  Fd fd(raw);
  Bytes buffer;
  size_t emitted = 0;
  bool silent = false;
  while (!stopping()) {
    size_t before = buffer.size();
    ReadStatus status = ReadSome(fd.get(), 50, buffer);
    if (status == ReadStatus::kEof || status == ReadStatus::kError) return;
    if (buffer.size() == before || silent) continue;
    // Re-reading the whole buffer keeps the shim's view identical to the
    // in-process one; earlier entries never change as bytes are appended.
    InterpretationReport report =
        personalities::InterpretWithQuirks(p_, RequestStream{buffer});
    for (; emitted < report.entries.size(); ++emitted) {
      const ReportEntry& entry = report.entries[emitted];
      if (!WriteAll(fd.get(), ReportResponse(entry))) return;
      if (std::holds_alternative<Rejection>(entry)) {
        GracefulClose(fd);
        return;
      }
    }
    switch (report.termination) {
      case personalities::Termination::kCrash:
        AbortiveClose(fd);
        return;
      case personalities::Termination::kLoopDetected:
        silent = true;  // a spinning server answers nothing more
        break;
      default:
        break;
    }
  }
}

absl::StatusOr<std::unique_ptr<TransducerShim>> TransducerShim::Start(
    personalities::Personality p, const Endpoint& listen, const Endpoint& backend) {
  std::unique_ptr<TransducerShim> s(new TransducerShim());
  s->p_ = std::move(p);
  s->backend_ = backend;
  if (absl::Status st = s->Listen(listen); !st.ok()) return st;
  return s;
}

void TransducerShim::HandleConnection(int raw) {
  Fd client(raw);
  Fd backend;
  Bytes pending;  // backend bytes not yet forming a full response
  // Sends one burst to the backend and relays its single response.
  auto relay = [&](BytesView bytes) -> bool {
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (!backend.valid()) {
        absl::StatusOr<Fd> c = Connect(backend_);
        if (!c.ok()) return false;
        backend = std::move(*c);
      }
      if (WriteAll(backend.get(), bytes)) break;
      backend.Reset();
      if (attempt == 1) return false;
    }
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (std::chrono::steady_clock::now() < deadline && !stopping()) {
      absl::StatusOr<std::vector<HttpResponse>> rs = SplitResponses(pending);
      if (rs.ok() && !rs->empty()) {
        for (const HttpResponse& r : *rs) {
          if (!WriteAll(client.get(), r.raw)) return false;
        }
        pending.clear();
        return true;
      }
      ReadStatus s = ReadSome(backend.get(), 50, pending);
      if (s == ReadStatus::kEof || s == ReadStatus::kError) {
        backend.Reset();
        return false;
      }
    }
    return false;
  };
  auto refuse = [&] {
    WriteAll(client.get(),
             "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n"
             "Connection: close\r\n\r\n");
    GracefulClose(client);
  };

  Bytes buffer;
  size_t forwarded = 0;
  while (!stopping()) {
    size_t before = buffer.size();
    ReadStatus status = ReadSome(client.get(), 50, buffer);
    if (status == ReadStatus::kEof || status == ReadStatus::kError) return;
    if (buffer.size() == before) continue;
    if (p_.Has(personalities::Rewrite::kPassthrough)) {
      if (!relay(BytesView(buffer).substr(before))) return refuse();
      continue;
    }
    personalities::TransduceResult r =
        personalities::Transduce(p_, RequestStream{buffer});
    if (!r.ok()) return refuse();
    if (p_.Has(personalities::Rewrite::kUnpipeline)) {
      for (; forwarded < r.requests.size(); ++forwarded) {
        if (!relay(r.requests[forwarded].bytes)) return refuse();
      }
    } else if (forwarded < r.requests.size()) {
      Bytes burst;
      for (; forwarded < r.requests.size(); ++forwarded) {
        burst += r.requests[forwarded].bytes;
      }
      if (!relay(burst)) return refuse();
    }
  }
}

// ---------------------------------------------------------------------------
// Report convention
// ---------------------------------------------------------------------------

Bytes EncodeReportBody(const ParsedEntry& entry) {
  nlohmann::json headers = nlohmann::json::array();
  for (const auto& [name, value] : entry.headers) {
    headers.push_back({Base64Encode(name), Base64Encode(value)});
  }
  nlohmann::json j = {
      {"method", Base64Encode(entry.method)},
      {"uri", Base64Encode(entry.uri)},
      {"version", Base64Encode(entry.version)},
      {"headers", headers},
      {"body", Base64Encode(entry.body)},
  };
  return j.dump();
}

Bytes ReportResponse(const ReportEntry& entry) {
  if (const ParsedEntry* p = std::get_if<ParsedEntry>(&entry)) {
    return Response(200, EncodeReportBody(*p), false);
  }
  const Rejection& r = std::get<Rejection>(entry);
  nlohmann::json j = {{"reason", r.reason}};
  if (r.offset) j["offset"] = *r.offset;
  return Response(r.status, j.dump(), true);
}

absl::StatusOr<std::vector<HttpResponse>> SplitResponses(BytesView data) {
  std::vector<HttpResponse> out;
  size_t pos = 0;
  while (pos < data.size()) {
    size_t head_end = data.find("\r\n\r\n", pos);
    if (head_end == BytesView::npos) {
      return absl::DataLossError(absl::StrCat("truncated response head at ", pos));
    }
    BytesView head = data.substr(pos, head_end - pos);
    if (head.size() < 12 || head.substr(0, 7) != "HTTP/1." || head[8] != ' ') {
      return absl::DataLossError(absl::StrCat("bad status line at ", pos));
    }
    int status = 0;
    for (size_t i = 9; i < 12; ++i) {
      if (head[i] < '0' || head[i] > '9') {
        return absl::DataLossError(absl::StrCat("bad status code at ", pos));
      }
      status = status * 10 + (head[i] - '0');
    }
    std::optional<size_t> length;
    size_t line = head.find("\r\n");
    while (line != BytesView::npos) {
      size_t next = head.find("\r\n", line + 2);
      BytesView field = head.substr(line + 2, (next == BytesView::npos ? head.size() : next) - line - 2);
      size_t colon = field.find(':');
      if (colon != BytesView::npos &&
          EqualsIgnoreCase(field.substr(0, colon), "content-length")) {
        BytesView v = field.substr(colon + 1);
        while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
        size_t n = 0;
        for (char c : v) {
          if (c < '0' || c > '9') {
            return absl::DataLossError("bad Content-Length in response");
          }
          n = n * 10 + static_cast<size_t>(c - '0');
        }
        length = n;
      }
      line = next;
    }
    size_t body_begin = head_end + 4;
    size_t n = length.value_or(0);
    if (body_begin + n > data.size()) {
      return absl::DataLossError(absl::StrCat("truncated response body at ", pos));
    }
    HttpResponse r;
    r.status = status;
    r.raw = Bytes(data.substr(pos, body_begin + n - pos));
    r.body = Bytes(data.substr(body_begin, n));
    out.push_back(std::move(r));
    pos = body_begin + n;
  }
  return out;
}

namespace {

absl::StatusOr<Bytes> B64Field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    return absl::DataLossError(absl::StrCat("decode-error: missing \"", key, "\""));
  }
  std::optional<Bytes> b = Base64Decode(j[key].get<std::string>());
  if (!b) return absl::DataLossError(absl::StrCat("decode-error: bad base64 in ", key));
  return *b;
}

absl::StatusOr<ParsedEntry> DecodeEntry(BytesView body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::DataLossError("decode-error: report body is not a JSON object");
  }
  ParsedEntry e;
  for (auto [key, field] : {std::pair{"method", &e.method}, std::pair{"uri", &e.uri},
                            std::pair{"version", &e.version},
                            std::pair{"body", &e.body}}) {
    absl::StatusOr<Bytes> v = B64Field(j, key);
    if (!v.ok()) return v.status();
    *field = std::move(*v);
  }
  if (!j.contains("headers") || !j["headers"].is_array()) {
    return absl::DataLossError("decode-error: missing \"headers\"");
  }
  for (const nlohmann::json& pair : j["headers"]) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
        !pair[1].is_string()) {
      return absl::DataLossError("decode-error: header is not a [name, value] pair");
    }
    std::optional<Bytes> n = Base64Decode(pair[0].get<std::string>());
    std::optional<Bytes> v = Base64Decode(pair[1].get<std::string>());
    if (!n || !v) return absl::DataLossError("decode-error: bad base64 in header");
    e.headers.emplace_back(std::move(*n), std::move(*v));
  }
  return e;
}

}  // namespace

absl::StatusOr<InterpretationReport> DecodeOriginReport(const ResponseSegments& r) {
  absl::StatusOr<std::vector<HttpResponse>> responses =
      SplitResponses(r.Concatenated());
  if (!responses.ok()) {
    return absl::DataLossError(
        absl::StrCat("decode-error: ", responses.status().message()));
  }
  InterpretationReport report;
  for (const HttpResponse& resp : *responses) {
    if (resp.status >= 200 && resp.status < 300) {
      absl::StatusOr<ParsedEntry> e = DecodeEntry(resp.body);
      if (!e.ok()) return e.status();
      report.entries.emplace_back(std::move(*e));
      continue;
    }
    Rejection rej;
    rej.status = resp.status;
    nlohmann::json j = nlohmann::json::parse(resp.body, nullptr, false);
    if (j.is_object()) {
      if (j.contains("reason") && j["reason"].is_string()) {
        rej.reason = j["reason"].get<std::string>();
      }
      if (j.contains("offset") && j["offset"].is_number_unsigned()) {
        rej.offset = j["offset"].get<size_t>();
      }
    }
    report.entries.emplace_back(std::move(rej));
    break;
  }
  report.termination = r.reset ? personalities::Termination::kCrash
                               : personalities::Termination::kClean;
  return report;
}

absl::StatusOr<RequestStream> RecoverTransduction(const ResponseSegments& r) {
  std::vector<Bytes> elements;
  for (const Segment& s : r.segments) {
    absl::StatusOr<std::vector<HttpResponse>> responses = SplitResponses(s.bytes);
    if (!responses.ok()) {
      return absl::DataLossError(absl::StrCat(
          "recovery-error: ", responses.status().message(), "; got \"",
          EscapeBytes(s.bytes), "\""));
    }
    for (const HttpResponse& resp : *responses) {
      if (resp.status != 200) {
        return absl::AbortedError(absl::StrCat(
            "recovery-error: transducer answered itself: \"",
            EscapeBytes(resp.raw), "\""));
      }
      elements.push_back(resp.body);
    }
  }
  if (r.reset) return absl::DataLossError("recovery-error: connection reset");
  return RequestStream(std::move(elements));
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

absl::StatusOr<analysis::Observation> TcpOrigin::Observe(
    const RequestStream& stream, bool traced) {
  bool tracing = traced && coverage_.has_value() &&
                 coverage::ExternalClear(*coverage_).ok();
  absl::StatusOr<ResponseSegments> seg = ExchangeStream(e_, stream);
  if (!seg.ok()) return seg.status();
  absl::StatusOr<InterpretationReport> report = DecodeOriginReport(*seg);
  if (!report.ok()) return report.status();
  analysis::Observation out;
  out.report = std::move(*report);
  if (tracing) {
    absl::StatusOr<coverage::CoverageMap> map = coverage::ExternalSnapshot(*coverage_);
    if (map.ok()) out.signature = coverage::ComputePathSignature(*map);
  }
  return out;
}

absl::StatusOr<std::optional<RequestStream>> TcpTransducer::Forward(
    const RequestStream& stream) {
  absl::StatusOr<ResponseSegments> seg = ExchangeStream(e_, stream);
  if (!seg.ok()) return seg.status();
  absl::StatusOr<RequestStream> recovered = RecoverTransduction(*seg);
  if (recovered.ok()) return std::optional<RequestStream>(std::move(*recovered));
  if (absl::IsAborted(recovered.status())) return std::optional<RequestStream>();
  return recovered.status();
}

}  // namespace garden::net
