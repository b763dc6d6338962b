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

// Line-oriented workbench for turning fuzzer output into payloads.
//
//   load <path>                       read a results file
//   results                           list result groups
//   use <group#> [member#]            make a result the current stream
//   stream set <idx> "<escaped>"      replace or append an element
//   stream show                       print the current stream
//   send [-v] [origin...]             side-by-side reports
//   transduce <transducer>            forward the current stream
//   mutate <byte|stream|grammar> [seed]
//   matrix                            discrepancy matrix of the current stream
//   quirks <origin>                   a target's quirks record
//   history                           commands run so far
//   quit
//
// Escapes: \r \n \0 \t \\ \xNN. A command that fails leaves the session as
// it was.

#ifndef GARDEN_REPL_H_
#define GARDEN_REPL_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "garden/analysis.h"
#include "garden/bytes.h"
#include "garden/fuzzer.h"

namespace garden::repl {

// The targets a session talks to. Quirks records are probed on first use
// and cached.
class Environment {
 public:
  // Every builtin personality as an origin; builtin transducers as
  // transducers. The default selection is the origin-kind personalities.
  static std::shared_ptr<Environment> Builtin();
  // The targets of a fuzz configuration, in its order.
  static absl::StatusOr<std::shared_ptr<Environment>> FromConfig(
      const fuzzer::FuzzConfig& cfg);

  analysis::OriginTarget* origin(std::string_view name) const;
  analysis::TransducerTarget* transducer(std::string_view name) const;
  absl::StatusOr<analysis::QuirksRecord> quirks(std::string_view name);

  const std::vector<std::string>& origin_names() const { return origin_names_; }
  const std::vector<std::string>& transducer_names() const {
    return transducer_names_;
  }
  const std::vector<std::string>& default_origins() const {
    return default_origins_;
  }

 private:
  std::map<std::string, std::unique_ptr<analysis::OriginTarget>, std::less<>> origins_;
  std::map<std::string, std::unique_ptr<analysis::TransducerTarget>, std::less<>>
      transducers_;
  std::map<std::string, analysis::QuirksRecord, std::less<>> quirks_;
  std::vector<std::string> origin_names_;
  std::vector<std::string> transducer_names_;
  std::vector<std::string> default_origins_;
};

struct Session {
  std::shared_ptr<Environment> env;
  bool plain = false;  // no ANSI colors

  std::vector<analysis::FuzzResult> results;
  std::vector<analysis::ResultGroup> groups;
  std::optional<std::string> current_result;  // id of the result in use
  RequestStream stream;
  std::vector<std::string> origins;  // selection for send and matrix
  std::vector<std::string> history;
  uint64_t next_seed = 1;  // for mutate without an explicit seed

  static Session Create(std::shared_ptr<Environment> env, bool plain);

  // The observable part of a session, for purity checks.
  friend bool operator==(const Session& a, const Session& b) {
    return a.results == b.results && a.current_result == b.current_result &&
           a.stream == b.stream && a.origins == b.origins &&
           a.history == b.history && a.next_seed == b.next_seed &&
           a.plain == b.plain;
  }
};

struct EvalOutput {
  std::string text;
  bool ok = true;
  bool quit = false;
};

EvalOutput EvalCommand(Session& session, std::string_view line);

std::string Usage();

// Prompts only when `interactive`. Returns the process exit code.
int RunLoop(Session& session, std::istream& in, std::ostream& out, bool interactive);

// Renders reports side by side, marking the first differing field of each
// entry. `verbose` shows every field.
std::string RenderSideBySide(const std::vector<std::string>& names,
                             const std::vector<analysis::InterpretationReport>& reports,
                             bool verbose, bool plain);

std::string RenderMatrix(const std::vector<std::string>& names,
                         const analysis::DiscrepancyMatrix& m);

}  // namespace garden::repl

#endif  // GARDEN_REPL_H_
