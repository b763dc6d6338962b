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

// Plain TCP plumbing: timeout-segmented exchanges, the echo server, and the
// shims that put in-process personalities behind a socket.
//
// Origins report their parse as one HTTP response per request whose body is
//   {"method": b64, "uri": b64, "version": b64,
//    "headers": [[b64, b64], ...], "body": b64}
// and refusals as a non-2xx response. Transducers are observed by pointing
// them at an echo server and reading back what it echoed.

#ifndef GARDEN_NET_H_
#define GARDEN_NET_H_

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "garden/analysis.h"
#include "garden/bytes.h"
#include "garden/coverage.h"
#include "garden/personalities.h"

namespace garden::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
  int connect_timeout_ms = 1000;
  int read_timeout_ms = 100;

  absl::Status Validate() const;
};

struct Segment {
  Bytes bytes;
  size_t element_index = 0;  // element written just before these bytes
};

struct ResponseSegments {
  std::vector<Segment> segments;
  bool reset = false;        // connection reset before we were done
  bool peer_closed = false;  // orderly close seen

  Bytes Concatenated() const;
};

// Writes each element, then reads until read_timeout_ms passes in silence.
absl::StatusOr<ResponseSegments> ExchangeStream(const Endpoint& e,
                                                const RequestStream& s);

// ---------------------------------------------------------------------------
// Servers
// ---------------------------------------------------------------------------

// Accept loop plus one thread per connection. Stop() (or destruction) shuts
// everything down and joins.
class Server {
 public:
  virtual ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  Endpoint endpoint(int read_timeout_ms = 100) const;
  void Stop();
  // Blocks until Stop() is called from elsewhere.
  void Wait();

 protected:
  Server() = default;
  absl::Status Listen(const Endpoint& e);
  bool stopping() const { return stopping_.load(); }
  virtual void HandleConnection(int fd) = 0;

 private:
  void AcceptLoop();

  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
};

// Reads a burst (first byte, then until `read_timeout_ms` of silence) and
// answers "HTTP/1.1 200 OK\r\nContent-Length: n\r\n\r\n" + the burst.
class EchoServer : public Server {
 public:
  static absl::StatusOr<std::unique_ptr<EchoServer>> Start(const Endpoint& e);

 protected:
  void HandleConnection(int fd) override;

 private:
  int read_timeout_ms_ = 100;
};

// Serves a personality's own interpretation using the report convention.
class OriginShim : public Server {
 public:
  static absl::StatusOr<std::unique_ptr<OriginShim>> Start(
      personalities::Personality p, const Endpoint& e);

 protected:
  void HandleConnection(int fd) override;

 private:
  personalities::Personality p_;
};

// Parses under a transducer personality and forwards to `backend`. A
// refusal is answered with 400 straight to the client.
class TransducerShim : public Server {
 public:
  static absl::StatusOr<std::unique_ptr<TransducerShim>> Start(
      personalities::Personality p, const Endpoint& listen,
      const Endpoint& backend);

 protected:
  void HandleConnection(int fd) override;

 private:
  personalities::Personality p_;
  Endpoint backend_;
};

// ---------------------------------------------------------------------------
// Report convention
// ---------------------------------------------------------------------------

Bytes EncodeReportBody(const personalities::ParsedEntry& entry);
Bytes ReportResponse(const personalities::ReportEntry& entry);

struct HttpResponse {
  int status = 0;
  Bytes raw;
  Bytes body;
};

// Splits a byte string into complete responses; trailing garbage or a
// truncated response is an error.
absl::StatusOr<std::vector<HttpResponse>> SplitResponses(BytesView data);

// Errors are DataLoss ("decode-error"), never a discrepancy.
absl::StatusOr<personalities::InterpretationReport> DecodeOriginReport(
    const ResponseSegments& r);

// Each echoed body becomes one element. Any other response is an Aborted
// error carrying the transducer's own response.
absl::StatusOr<RequestStream> RecoverTransduction(const ResponseSegments& r);

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

class TcpOrigin : public analysis::OriginTarget {
 public:
  TcpOrigin(std::string name, Endpoint e,
            std::optional<coverage::ExternalTarget> coverage = std::nullopt)
      : name_(std::move(name)), e_(std::move(e)), coverage_(std::move(coverage)) {}
  std::string name() const override { return name_; }
  absl::StatusOr<analysis::Observation> Observe(const RequestStream& stream,
                                                bool traced) override;

 private:
  std::string name_;
  Endpoint e_;
  std::optional<coverage::ExternalTarget> coverage_;
};

class TcpTransducer : public analysis::TransducerTarget {
 public:
  TcpTransducer(std::string name, Endpoint e)
      : name_(std::move(name)), e_(std::move(e)) {}
  std::string name() const override { return name_; }
  absl::StatusOr<std::optional<RequestStream>> Forward(
      const RequestStream& stream) override;

 private:
  std::string name_;
  Endpoint e_;
};

}  // namespace garden::net

#endif  // GARDEN_NET_H_
