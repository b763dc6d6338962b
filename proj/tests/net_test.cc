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
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "absl/status/status.h"
#include "garden/analysis.h"
#include "garden/bytes.h"
#include "garden/fuzzer.h"
#include "garden/mutation.h"
#include "garden/personalities.h"
#include "gtest/gtest.h"
#include "test_payloads.h"

namespace garden::net {
namespace {

using ::garden::testing::Builtin;
using personalities::InterpretationReport;
using personalities::Personality;
using personalities::Termination;

Endpoint Local(int read_timeout_ms = 100) {
  Endpoint e;
  e.port = 0;
  e.read_timeout_ms = read_timeout_ms;
  return e;
}

// A blocking client socket that reads whole responses, so echo checks do
// not depend on client-side timeouts.
class Client {
 public:
  explicit Client(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr = {};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ok_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0;
  }
  ~Client() { ::close(fd_); }

  bool ok() const { return ok_; }

  bool Send(BytesView data) {
    size_t at = 0;
    while (at < data.size()) {
      ssize_t n = ::send(fd_, data.data() + at, data.size() - at, MSG_NOSIGNAL);
      if (n <= 0) return false;
      at += static_cast<size_t>(n);
    }
    return true;
  }

  // Reads until one complete response is buffered; empty on EOF or timeout.
  std::optional<HttpResponse> ReadResponse(int timeout_ms = 5000) {
    while (true) {
      absl::StatusOr<std::vector<HttpResponse>> r = SplitResponses(buffer_);
      if (r.ok() && !r->empty()) {
        buffer_.erase(0, (*r)[0].raw.size());
        return (*r)[0];
      }
      pollfd p = {fd_, POLLIN, 0};
      if (::poll(&p, 1, timeout_ms) <= 0) return std::nullopt;
      char chunk[16384];
      ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  // True if the peer closes without sending anything.
  bool ClosedSilently(int timeout_ms) {
    pollfd p = {fd_, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) return false;
    char c;
    return ::recv(fd_, &c, 1, 0) == 0;
  }

  void ShutdownWrite() { ::shutdown(fd_, SHUT_WR); }

 private:
  int fd_ = -1;
  bool ok_ = false;
  Bytes buffer_;
};

Bytes EchoResponse(BytesView body) {
  return "HTTP/1.1 200 OK\r\nContent-Length: " + std::to_string(body.size()) +
         "\r\n\r\n" + Bytes(body);
}

// Termination as a peer sees it over TCP: stalls and busy loops both look
// like a server that says nothing more.
InterpretationReport OverTheWire(InterpretationReport r) {
  if (r.termination == Termination::kTimeout ||
      r.termination == Termination::kLoopDetected) {
    r.termination = Termination::kClean;
  }
  return r;
}

std::vector<RequestStream> FuzzStreams(size_t n, uint64_t seed) {
  std::vector<RequestStream> seeds = fuzzer::DefaultSeedCorpus();
  mutation::Rng rng(seed);
  std::vector<RequestStream> out;
  for (size_t i = 0; i < n; ++i) {
    RequestStream s = seeds[rng.Below(seeds.size())];
    for (uint64_t k = rng.Below(4); k > 0; --k) {
      s = mutation::Mutate(s, rng, mutation::ClassWeights{}).child;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Echo server
// ---------------------------------------------------------------------------

TEST(EchoServerTest, EchoesBytes) {
  auto echo = EchoServer::Start(Local(20));
  ASSERT_TRUE(echo.ok()) << echo.status();
  Client c((*echo)->port());
  ASSERT_TRUE(c.ok());
  ASSERT_TRUE(c.Send("abc"));
  std::optional<HttpResponse> r = c.ReadResponse();
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->raw, EchoResponse("abc"));
}

TEST(EchoServerTest, PauseSplitsResponses) {
  auto echo = EchoServer::Start(Local(20));
  ASSERT_TRUE(echo.ok());
  absl::StatusOr<ResponseSegments> r =
      ExchangeStream((*echo)->endpoint(150), RequestStream{"a", "b"});
  ASSERT_TRUE(r.ok()) << r.status();
  ASSERT_EQ(r->segments.size(), 2u);
  EXPECT_EQ(r->segments[0].bytes, EchoResponse("a"));
  EXPECT_EQ(r->segments[0].element_index, 0u);
  EXPECT_EQ(r->segments[1].bytes, EchoResponse("b"));
  EXPECT_EQ(r->segments[1].element_index, 1u);
}

TEST(EchoServerTest, NoDataNoResponse) {
  auto echo = EchoServer::Start(Local(20));
  ASSERT_TRUE(echo.ok());
  Client c((*echo)->port());
  ASSERT_TRUE(c.ok());
  c.ShutdownWrite();
  EXPECT_TRUE(c.ClosedSilently(2000));
}

TEST(EchoServerTest, BitExactOnRandomPayloads) {
  auto echo = EchoServer::Start(Local(20));
  ASSERT_TRUE(echo.ok());
  constexpr int kThreads = 10;
  constexpr int kPerThread = 100;
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      mutation::Rng rng(1000 + t);
      Client c((*echo)->port());
      if (!c.ok()) {
        failures += kPerThread;
        return;
      }
      for (int i = 0; i < kPerThread; ++i) {
        Bytes payload;
        if (i == 0) {
          for (int b = 0; b < 256; ++b) payload += static_cast<char>(b);
        } else {
          size_t len = 1 + rng.Below(8192);
          for (size_t k = 0; k < len; ++k) payload += static_cast<char>(rng.Below(256));
        }
        std::optional<HttpResponse> r;
        if (c.Send(payload)) r = c.ReadResponse();
        if (!r || r->status != 200 || r->body != payload) ++failures;
      }
    });
  }
  for (std::thread& t : threads) t.join();
  EXPECT_EQ(failures.load(), 0);
}

TEST(ExchangeStreamTest, LongerTimeoutNeverCapturesLess) {
  auto echo = EchoServer::Start(Local(20));
  ASSERT_TRUE(echo.ok());
  RequestStream s{"one", "", "three"};
  size_t previous_total = 0;
  for (int timeout : {60, 120, 240}) {
    absl::StatusOr<ResponseSegments> r = ExchangeStream((*echo)->endpoint(timeout), s);
    ASSERT_TRUE(r.ok());
    size_t total = r->Concatenated().size();
    EXPECT_GE(total, previous_total);
    previous_total = total;
  }
}

TEST(ExchangeStreamTest, ConnectFailure) {
  Endpoint e;
  e.port = 1;  // nothing listens here
  e.connect_timeout_ms = 200;
  EXPECT_FALSE(ExchangeStream(e, RequestStream{"x"}).ok());
}

TEST(EndpointTest, Validation) {
  Endpoint e;
  e.port = 80;
  EXPECT_TRUE(e.Validate().ok());
  e.read_timeout_ms = 5;
  EXPECT_FALSE(e.Validate().ok());
  e.read_timeout_ms = 100;
  e.port = 70000;
  EXPECT_FALSE(e.Validate().ok());
}

// ---------------------------------------------------------------------------
// Origin reports
// ---------------------------------------------------------------------------

TEST(DecodeOriginReportTest, Base64Fields) {
  Bytes body =
      R"({"method":"R0VU","uri":"Lw==","version":"SFRUUC8xLjE=","headers":[],"body":""})";
  ResponseSegments r;
  r.segments.push_back({EchoResponse(body), 0});
  absl::StatusOr<InterpretationReport> report = DecodeOriginReport(r);
  ASSERT_TRUE(report.ok()) << report.status();
  ASSERT_EQ(report->entries.size(), 1u);
  EXPECT_EQ(garden::testing::Entry(*report, 0)->method, "GET");
  EXPECT_EQ(garden::testing::Entry(*report, 0)->uri, "/");
}

TEST(DecodeOriginReportTest, ErrorStatusIsRejection) {
  ResponseSegments r;
  r.segments.push_back(
      {"HTTP/1.1 411 Length Required\r\nContent-Length: 0\r\n\r\n", 0});
  absl::StatusOr<InterpretationReport> report = DecodeOriginReport(r);
  ASSERT_TRUE(report.ok());
  ASSERT_NE(report->rejection(), nullptr);
  EXPECT_EQ(report->rejection()->StatusClass(), 4);
}

TEST(DecodeOriginReportTest, ConcatenatedReportsKeepOrder) {
  personalities::ParsedEntry a{"GET", "/a", "HTTP/1.1", {{"Host", "x"}}, ""};
  personalities::ParsedEntry b{"POST", "/b", "HTTP/1.1", {}, "body"};
  ResponseSegments r;
  r.segments.push_back({ReportResponse(a) + ReportResponse(b), 0});
  absl::StatusOr<InterpretationReport> report = DecodeOriginReport(r);
  ASSERT_TRUE(report.ok());
  ASSERT_EQ(report->entries.size(), 2u);
  EXPECT_EQ(*garden::testing::Entry(*report, 0), a);
  EXPECT_EQ(*garden::testing::Entry(*report, 1), b);
}

TEST(DecodeOriginReportTest, MalformedBodyIsDecodeError) {
  ResponseSegments r;
  r.segments.push_back({EchoResponse("{not json"), 0});
  EXPECT_EQ(DecodeOriginReport(r).status().code(), absl::StatusCode::kDataLoss);
  ResponseSegments truncated;
  truncated.segments.push_back({"HTTP/1.1 200 OK\r\nContent-Length: 10\r\n\r\nab", 0});
  EXPECT_EQ(DecodeOriginReport(truncated).status().code(),
            absl::StatusCode::kDataLoss);
}

TEST(OriginShimTest, SingleRequest) {
  auto shim = OriginShim::Start(Builtin("rfc-oracle"), Local());
  ASSERT_TRUE(shim.ok());
  absl::StatusOr<ResponseSegments> r =
      ExchangeStream((*shim)->endpoint(100), RequestStream{"GET / HTTP/1.1\r\n\r\n"});
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r->segments.size(), 1u);
  absl::StatusOr<InterpretationReport> report = DecodeOriginReport(*r);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report->entries.size(), 1u);
}

TEST(OriginShimTest, PipelinedRequestsShareASegment) {
  auto shim = OriginShim::Start(Builtin("rfc-oracle"), Local());
  ASSERT_TRUE(shim.ok());
  absl::StatusOr<ResponseSegments> r = ExchangeStream(
      (*shim)->endpoint(100),
      RequestStream{"GET / HTTP/1.1\r\n\r\nGET / HTTP/1.1\r\n\r\n"});
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r->segments.size(), 1u);
  absl::StatusOr<std::vector<HttpResponse>> responses =
      SplitResponses(r->segments[0].bytes);
  ASSERT_TRUE(responses.ok());
  EXPECT_EQ(responses->size(), 2u);
}

TEST(OriginShimTest, SplitRequestAnswersAfterSecondElement) {
  auto shim = OriginShim::Start(Builtin("rfc-oracle"), Local());
  ASSERT_TRUE(shim.ok());
  absl::StatusOr<ResponseSegments> r = ExchangeStream(
      (*shim)->endpoint(100), RequestStream{"GET / HT", "TP/1.1\r\n\r\n"});
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r->segments.size(), 1u);
  EXPECT_EQ(r->segments[0].element_index, 1u);
}

TEST(OriginShimTest, MatchesInProcessInterpretation) {
  std::vector<Personality> registry = personalities::BuiltinRegistry();
  std::vector<RequestStream> streams = FuzzStreams(1000, 77);
  std::vector<std::unique_ptr<OriginShim>> shims;
  for (const Personality& p : registry) {
    auto shim = OriginShim::Start(p, Local());
    ASSERT_TRUE(shim.ok()) << shim.status();
    shims.push_back(std::move(*shim));
  }
  std::vector<std::string> failures(registry.size());
  std::vector<std::thread> threads;
  for (size_t k = 0; k < registry.size(); ++k) {
    threads.emplace_back([&, k] {
      for (const RequestStream& s : streams) {
        absl::StatusOr<ResponseSegments> r = ExchangeStream(shims[k]->endpoint(25), s);
        absl::StatusOr<InterpretationReport> got =
            r.ok() ? DecodeOriginReport(*r) : r.status();
        InterpretationReport want =
            OverTheWire(personalities::InterpretWithQuirks(registry[k], s));
        if (!got.ok() || *got != want) {
          failures[k] = registry[k].name + " on " + EscapeBytes(s.Concatenated()) +
                        (got.ok() ? "\n" + analysis::CanonicalReport(*got)
                                  : " " + got.status().ToString()) +
                        "vs\n" + analysis::CanonicalReport(want);
          return;
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const std::string& f : failures) EXPECT_TRUE(f.empty()) << f;
}

TEST(OriginShimTest, CrashResetsTheConnection) {
  Personality p = Builtin("rfc-oracle");
  p.poison = [](BytesView request) { return request.find("/boom") != BytesView::npos; };
  auto shim = OriginShim::Start(p, Local());
  ASSERT_TRUE(shim.ok());
  TcpOrigin origin("crashy", (*shim)->endpoint(100));
  absl::StatusOr<analysis::Observation> obs =
      origin.Observe(RequestStream{"GET /boom HTTP/1.1\r\n\r\n"}, false);
  ASSERT_TRUE(obs.ok()) << obs.status();
  EXPECT_EQ(obs->report.termination, Termination::kCrash);
}

// ---------------------------------------------------------------------------
// Transducers
// ---------------------------------------------------------------------------

struct Chain {
  std::unique_ptr<EchoServer> echo;
  std::unique_ptr<TransducerShim> shim;
};

Chain StartChain(const std::string& transducer) {
  Chain c;
  auto echo = EchoServer::Start(Local(20));
  if (!echo.ok()) return c;
  c.echo = std::move(*echo);
  auto shim = TransducerShim::Start(Builtin(transducer), Local(), c.echo->endpoint(100));
  if (shim.ok()) c.shim = std::move(*shim);
  return c;
}

absl::StatusOr<RequestStream> ThroughChain(const Chain& c, const RequestStream& s) {
  absl::StatusOr<ResponseSegments> r = ExchangeStream(c.shim->endpoint(150), s);
  if (!r.ok()) return r.status();
  return RecoverTransduction(*r);
}

TEST(TransducerShimTest, IdentityRecoversInput) {
  Chain c = StartChain("identity");
  ASSERT_NE(c.shim, nullptr);
  RequestStream s{"GET / HTTP/1.1\r\nHost: a\r\n\r\n"};
  absl::StatusOr<RequestStream> out = ThroughChain(c, s);
  ASSERT_TRUE(out.ok()) << out.status();
  EXPECT_EQ(*out, s);
}

TEST(TransducerShimTest, SegmentationRevealsUnpipelining) {
  RequestStream two{"GET /a HTTP/1.1\r\n\r\nGET /b HTTP/1.1\r\n\r\n"};
  Chain unpipelining = StartChain("normalizing");
  Chain pipelining = StartChain("nghttpx-like");
  ASSERT_NE(unpipelining.shim, nullptr);
  ASSERT_NE(pipelining.shim, nullptr);
  absl::StatusOr<RequestStream> split = ThroughChain(unpipelining, two);
  absl::StatusOr<RequestStream> joined = ThroughChain(pipelining, two);
  ASSERT_TRUE(split.ok()) << split.status();
  ASSERT_TRUE(joined.ok()) << joined.status();
  EXPECT_EQ(*split, (RequestStream{"GET /a HTTP/1.1\r\n\r\n", "GET /b HTTP/1.1\r\n\r\n"}));
  EXPECT_EQ(*joined, two);
}

TEST(TransducerShimTest, RefusalIsRecoveryError) {
  Chain c = StartChain("haproxy-like");
  ASSERT_NE(c.shim, nullptr);
  absl::StatusOr<ResponseSegments> r =
      ExchangeStream(c.shim->endpoint(150), RequestStream{"GET / HTTP/1.1\rX: y\r\n\r\n"});
  ASSERT_TRUE(r.ok());
  absl::StatusOr<RequestStream> out = RecoverTransduction(*r);
  EXPECT_EQ(out.status().code(), absl::StatusCode::kAborted);
  EXPECT_NE(out.status().message().find("400"), std::string::npos)
      << out.status();

  TcpTransducer target("haproxy-like", c.shim->endpoint(150));
  absl::StatusOr<std::optional<RequestStream>> fwd =
      target.Forward(RequestStream{"GET / HTTP/1.1\rX: y\r\n\r\n"});
  ASSERT_TRUE(fwd.ok());
  EXPECT_FALSE(fwd->has_value());
}

TEST(TransducerShimTest, MatchesInProcessTransduction) {
  for (const char* name : {"identity", "normalizing", "haproxy-like", "ats-like"}) {
    Chain c = StartChain(name);
    ASSERT_NE(c.shim, nullptr);
    TcpTransducer target(name, c.shim->endpoint(60));
    for (const RequestStream& s : FuzzStreams(25, 13)) {
      personalities::TransduceResult want = personalities::Transduce(Builtin(name), s);
      absl::StatusOr<std::optional<RequestStream>> got = target.Forward(s);
      ASSERT_TRUE(got.ok()) << got.status();
      if (!want.ok()) {
        EXPECT_FALSE(got->has_value()) << name << " " << EscapeBytes(s.Concatenated());
        continue;
      }
      ASSERT_TRUE(got->has_value()) << name << " " << EscapeBytes(s.Concatenated());
      EXPECT_EQ((*got)->Concatenated(), want.forwarded->Concatenated()) << name;
    }
  }
}

}  // namespace
}  // namespace garden::net
