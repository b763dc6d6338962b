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

// Command-line front end: probe, fuzz, validate, replay, repl, and the
// servers that put builtin personalities on a port.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "garden/analysis.h"
#include "garden/fuzzer.h"
#include "garden/net.h"
#include "garden/personalities.h"
#include "garden/repl.h"

namespace {

using namespace garden;  // NOLINT

std::atomic<bool> g_interrupted{false};

void OnSignal(int) { g_interrupted.store(true); }

int Fail(const absl::Status& s) {
  std::cerr << "garden: " << s.message() << "\n";
  return 1;
}

absl::StatusOr<fuzzer::FuzzConfig> ConfigFrom(const std::string& path) {
  if (path.empty()) return fuzzer::DefaultFuzzConfig();
  return fuzzer::LoadFuzzConfig(path);
}

bool PlainOutput(bool flag) { return flag || std::getenv("NO_COLOR") != nullptr; }

int ServeUntilSignal(net::Server& server, std::string_view what) {
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  std::cout << what << " listening on 127.0.0.1:" << server.port() << std::endl;
  while (!g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.Stop();
  return 0;
}

int RunProbe(const std::string& config, const std::string& out) {
  std::vector<analysis::QuirksRecord> records;
  if (config.empty()) {
    for (const personalities::Personality& p : personalities::BuiltinRegistry()) {
      analysis::PersonalityOrigin origin(p);
      absl::StatusOr<analysis::QuirksRecord> r = analysis::ProbeQuirks(origin);
      if (!r.ok()) return Fail(r.status());
      records.push_back(std::move(*r));
    }
  } else {
    absl::StatusOr<fuzzer::FuzzConfig> cfg = fuzzer::LoadFuzzConfig(config);
    if (!cfg.ok()) return Fail(cfg.status());
    cfg->quirks.clear();  // always probe afresh
    absl::StatusOr<fuzzer::Targets> targets = fuzzer::ResolveTargets(*cfg);
    if (!targets.ok()) return Fail(targets.status());
    records = targets->quirks;
  }
  for (const analysis::QuirksRecord& r : records) {
    std::cout << analysis::QuirksRecordToJson(r).dump() << "\n";
  }
  if (!out.empty()) {
    if (absl::Status s = fuzzer::WriteQuirksFile(out, records); !s.ok()) return Fail(s);
  }
  return 0;
}

int RunFuzzCommand(const std::string& config, const std::string& output,
                   std::optional<uint64_t> seed, std::optional<int> generations,
                   std::optional<int> size) {
  absl::StatusOr<fuzzer::FuzzConfig> cfg = ConfigFrom(config);
  if (!cfg.ok()) return Fail(cfg.status());
  if (!output.empty()) cfg->output = output;
  if (seed) cfg->rng_seed = *seed;
  if (generations) cfg->generations = *generations;
  if (size) cfg->generation_size = *size;
  auto start = std::chrono::steady_clock::now();
  absl::StatusOr<fuzzer::FuzzRun> run = fuzzer::RunFuzz(*cfg);
  if (!run.ok()) return Fail(run.status());
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fuzzer::FuzzStats& st = run->stats;
  std::cout << "evaluations " << st.evaluations << " in " << seconds << " s\n"
            << "discrepancies " << st.discrepancies << ", meaningful " << st.meaningful
            << ", durable " << st.durable << "\n"
            << "corpus " << run->corpus.entries().size() << ", target errors "
            << st.target_errors << "\n";
  std::vector<analysis::ResultGroup> groups = analysis::GroupResults(run->results);
  std::cout << groups.size() << " groups\n";
  for (size_t g = 0; g < groups.size(); ++g) {
    const analysis::FuzzResult& first = run->results[groups[g].members[0]];
    std::cout << "  #" << g + 1 << " " << groups[g].matrix.ToBitString() << " x"
              << groups[g].members.size() << "  e.g. " << first.id << "\n";
  }
  if (!cfg->output.empty()) std::cout << "results written to " << cfg->output << "\n";
  return 0;
}

int RunValidate(const std::string& config, const std::string& results_path) {
  absl::StatusOr<fuzzer::FuzzConfig> cfg = ConfigFrom(config);
  if (!cfg.ok()) return Fail(cfg.status());
  absl::StatusOr<std::vector<analysis::FuzzResult>> results =
      fuzzer::LoadResults(results_path);
  if (!results.ok()) return Fail(results.status());
  absl::StatusOr<fuzzer::Targets> targets = fuzzer::ResolveTargets(*cfg);
  if (!targets.ok()) return Fail(targets.status());
  std::vector<fuzzer::ValidationFailure> failures =
      fuzzer::ValidateResults(*results, *targets);
  for (const fuzzer::ValidationFailure& f : failures) {
    std::cout << "FAIL " << f.id << ": " << f.reason << "\n";
  }
  std::cout << results->size() - failures.size() << "/" << results->size()
            << " results meaningful and durable\n";
  return failures.empty() ? 0 : 1;
}

int RunReplay(const std::string& id, const std::string& config,
              const std::string& results_path, bool verbose, bool plain) {
  absl::StatusOr<fuzzer::FuzzConfig> cfg = ConfigFrom(config);
  if (!cfg.ok()) return Fail(cfg.status());
  absl::StatusOr<std::vector<analysis::FuzzResult>> results =
      fuzzer::LoadResults(results_path);
  if (!results.ok()) return Fail(results.status());
  auto it = std::find_if(results->begin(), results->end(),
                         [&](const analysis::FuzzResult& r) { return r.id == id; });
  if (it == results->end()) {
    return Fail(absl::NotFoundError("no result with id " + id + " in " + results_path));
  }
  absl::StatusOr<fuzzer::Targets> targets = fuzzer::ResolveTargets(*cfg);
  if (!targets.ok()) return Fail(targets.status());
  absl::StatusOr<std::vector<analysis::InterpretationReport>> reports =
      fuzzer::ObserveAll(it->input, *targets);
  if (!reports.ok()) return Fail(reports.status());
  for (size_t i = 0; i < it->input.size(); ++i) {
    std::cout << "[" << i << "] \"" << EscapeBytes(it->input[i]) << "\"\n";
  }
  std::cout << repl::RenderSideBySide(targets->origin_names(), *reports, verbose,
                                      PlainOutput(plain));
  analysis::DiscrepancyMatrix m =
      analysis::ComputeDiscrepancyMatrix(*reports, targets->quirks);
  std::cout << repl::RenderMatrix(targets->origin_names(), m);
  bool same = m == it->matrix;
  std::cout << (same ? "matches" : "DIFFERS FROM") << " the persisted matrix\n";
  return same ? 0 : 1;
}

int RunRepl(const std::string& config, const std::string& load, bool plain) {
  std::shared_ptr<repl::Environment> env;
  if (config.empty()) {
    env = repl::Environment::Builtin();
  } else {
    absl::StatusOr<fuzzer::FuzzConfig> cfg = fuzzer::LoadFuzzConfig(config);
    if (!cfg.ok()) return Fail(cfg.status());
    absl::StatusOr<std::shared_ptr<repl::Environment>> e =
        repl::Environment::FromConfig(*cfg);
    if (!e.ok()) return Fail(e.status());
    env = std::move(*e);
  }
  repl::Session session = repl::Session::Create(env, PlainOutput(plain));
  if (!load.empty()) {
    repl::EvalOutput r = repl::EvalCommand(session, "load " + load);
    std::cout << r.text;
    if (!r.ok) return 1;
  }
  return repl::RunLoop(session, std::cin, std::cout, isatty(STDIN_FILENO) != 0);
}

int RunPersonalities() {
  for (const personalities::Personality& p : personalities::BuiltinRegistry()) {
    std::cout << p.name
              << (p.kind == personalities::Kind::kOrigin ? "  origin  " : "  transducer  ")
              << p.models << "\n";
  }
  return 0;
}

const personalities::Personality* Lookup(const std::vector<personalities::Personality>& r,
                                         const std::string& name) {
  const personalities::Personality* p = personalities::FindPersonality(r, name);
  if (p == nullptr) std::cerr << "garden: unknown personality " << name << "\n";
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential fuzzing workbench for HTTP/1.1 parsers"};
  app.require_subcommand(1);

  std::string config;
  std::string output;
  std::string results_path = "results.jsonl";
  bool plain = false;
  bool verbose = false;

  CLI::App* probe = app.add_subcommand("probe", "Write quirks records for the origins");
  probe->add_option("-c,--config", config, "Fuzz config (default: every builtin)");
  probe->add_option("-o,--out", output, "Quirks file to write");

  CLI::App* fuzz = app.add_subcommand("fuzz", "Run the fuzzing loop");
  std::optional<uint64_t> seed;
  std::optional<int> generations;
  std::optional<int> size;
  fuzz->add_option("-c,--config", config, "Fuzz config (default: the builtin demo)");
  fuzz->add_option("-o,--output", output, "Results JSONL (overrides the config)");
  fuzz->add_option("--seed", seed, "RNG seed");
  fuzz->add_option("--generations", generations, "Number of generations");
  fuzz->add_option("--generation-size", size, "Children per generation");

  CLI::App* validate =
      app.add_subcommand("validate", "Re-check persisted results against the targets");
  validate->add_option("-c,--config", config, "Fuzz config used for the run");
  validate->add_option("-r,--results", results_path, "Results JSONL");

  CLI::App* replay = app.add_subcommand("replay", "Re-send a result and print reports");
  std::string result_id;
  replay->add_option("result-id", result_id, "Result id")->required();
  replay->add_option("-c,--config", config, "Fuzz config used for the run");
  replay->add_option("-r,--results", results_path, "Results JSONL");
  replay->add_flag("-v,--verbose", verbose, "Show every field");
  replay->add_flag("--plain", plain, "No colors");

  CLI::App* repl_cmd = app.add_subcommand("repl", "Interactive workbench");
  std::string load;
  repl_cmd->add_option("-c,--config", config, "Use the targets of a fuzz config");
  repl_cmd->add_option("-l,--load", load, "Results file to load at start");
  repl_cmd->add_flag("--plain", plain, "No colors (also NO_COLOR)");

  app.add_subcommand("personalities", "List builtin personalities");

  int port = 0;
  int read_timeout_ms = 100;
  std::string personality;
  CLI::App* serve_echo = app.add_subcommand("serve-echo", "Run an echo server");
  serve_echo->add_option("-p,--port", port, "Port (0 picks one)");
  serve_echo->add_option("--read-timeout-ms", read_timeout_ms, "Silence ending a burst");

  CLI::App* serve_origin =
      app.add_subcommand("serve-origin", "Serve a personality's parse reports");
  serve_origin->add_option("personality", personality, "Personality")->required();
  serve_origin->add_option("-p,--port", port, "Port (0 picks one)");

  CLI::App* serve_transducer =
      app.add_subcommand("serve-transducer", "Run a transducer personality");
  int backend_port = 0;
  std::string backend_host = "127.0.0.1";
  serve_transducer->add_option("personality", personality, "Personality")->required();
  serve_transducer->add_option("-p,--port", port, "Port (0 picks one)");
  serve_transducer->add_option("--backend-host", backend_host, "Backend host");
  serve_transducer->add_option("--backend-port", backend_port, "Backend port")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (*probe) return RunProbe(config, output);
  if (*fuzz) return RunFuzzCommand(config, output, seed, generations, size);
  if (*validate) return RunValidate(config, results_path);
  if (*replay) return RunReplay(result_id, config, results_path, verbose, plain);
  if (*repl_cmd) return RunRepl(config, load, plain);
  if (app.got_subcommand("personalities")) return RunPersonalities();

  std::vector<personalities::Personality> registry = personalities::BuiltinRegistry();
  net::Endpoint listen;
  listen.port = port;
  listen.read_timeout_ms = read_timeout_ms;
  if (*serve_echo) {
    absl::StatusOr<std::unique_ptr<net::EchoServer>> s = net::EchoServer::Start(listen);
    if (!s.ok()) return Fail(s.status());
    return ServeUntilSignal(**s, "echo");
  }
  if (*serve_origin) {
    const personalities::Personality* p = Lookup(registry, personality);
    if (p == nullptr) return 1;
    absl::StatusOr<std::unique_ptr<net::OriginShim>> s =
        net::OriginShim::Start(*p, listen);
    if (!s.ok()) return Fail(s.status());
    return ServeUntilSignal(**s, personality);
  }
  if (*serve_transducer) {
    const personalities::Personality* p = Lookup(registry, personality);
    if (p == nullptr) return 1;
    net::Endpoint backend;
    backend.host = backend_host;
    backend.port = backend_port;
    absl::StatusOr<std::unique_ptr<net::TransducerShim>> s =
        net::TransducerShim::Start(*p, listen, backend);
    if (!s.ok()) return Fail(s.status());
    return ServeUntilSignal(**s, personality);
  }
  return 0;
}
