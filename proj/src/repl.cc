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

#include "garden/repl.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>
#include <istream>
#include <ostream>
#include <utility>
#include <variant>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "garden/mutation.h"
#include "garden/personalities.h"

namespace garden::repl {

using analysis::InterpretationReport;
using personalities::ParsedEntry;
using personalities::Rejection;

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

std::shared_ptr<Environment> Environment::Builtin() {
  auto env = std::make_shared<Environment>();
  for (const personalities::Personality& p : personalities::BuiltinRegistry()) {
    env->origins_[p.name] = std::make_unique<analysis::PersonalityOrigin>(p);
    env->origin_names_.push_back(p.name);
    if (p.kind == personalities::Kind::kTransducer) {
      env->transducers_[p.name] = std::make_unique<analysis::PersonalityTransducer>(p);
      env->transducer_names_.push_back(p.name);
    } else {
      env->default_origins_.push_back(p.name);
    }
  }
  return env;
}

absl::StatusOr<std::shared_ptr<Environment>> Environment::FromConfig(
    const fuzzer::FuzzConfig& cfg) {
  absl::StatusOr<fuzzer::Targets> targets = fuzzer::ResolveTargets(cfg);
  if (!targets.ok()) return targets.status();
  auto env = std::make_shared<Environment>();
  for (size_t i = 0; i < targets->origins.size(); ++i) {
    std::string name = targets->origins[i]->name();
    env->quirks_[name] = targets->quirks[i];
    env->origins_[name] = std::move(targets->origins[i]);
    env->origin_names_.push_back(name);
  }
  for (auto& t : targets->transducers) {
    std::string name = t->name();
    env->transducers_[name] = std::move(t);
    env->transducer_names_.push_back(name);
  }
  env->default_origins_ = env->origin_names_;
  return env;
}

analysis::OriginTarget* Environment::origin(std::string_view name) const {
  auto it = origins_.find(name);
  return it == origins_.end() ? nullptr : it->second.get();
}

analysis::TransducerTarget* Environment::transducer(std::string_view name) const {
  auto it = transducers_.find(name);
  return it == transducers_.end() ? nullptr : it->second.get();
}

absl::StatusOr<analysis::QuirksRecord> Environment::quirks(std::string_view name) {
  if (auto it = quirks_.find(name); it != quirks_.end()) return it->second;
  analysis::OriginTarget* o = origin(name);
  if (o == nullptr) {
    return absl::NotFoundError(absl::StrCat("no origin named ", std::string(name)));
  }
  absl::StatusOr<analysis::QuirksRecord> r = analysis::ProbeQuirks(*o);
  if (!r.ok()) return r.status();
  quirks_.emplace(std::string(name), *r);
  return r;
}

Session Session::Create(std::shared_ptr<Environment> env, bool plain) {
  Session s;
  s.origins = env->default_origins();
  s.env = std::move(env);
  s.plain = plain;
  return s;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

constexpr size_t kCellLimit = 32;
constexpr char kRed[] = "\x1b[1;31m";
constexpr char kReset[] = "\x1b[0m";

struct Row {
  std::string label;
  std::vector<std::string> cells;
};

std::string Cell(BytesView bytes) { return absl::StrCat("\"", EscapeBytes(bytes), "\""); }

// The rows of one entry position across all reports.
std::vector<Row> EntryRows(const std::vector<InterpretationReport>& reports,
                           size_t index) {
  std::vector<Row> rows = {{"status", {}}, {"method", {}}, {"uri", {}},
                           {"version", {}}, {"headers", {}}, {"body", {}}};
  for (const InterpretationReport& r : reports) {
    std::array<std::string, 6> v;
    if (index >= r.entries.size()) {
      v[0] = "(none)";
    } else if (const Rejection* rej = std::get_if<Rejection>(&r.entries[index])) {
      v[0] = absl::StrCat("rejected ", rej->status, " ", rej->reason);
      if (rej->offset) absl::StrAppend(&v[0], "@", *rej->offset);
    } else {
      const ParsedEntry& e = std::get<ParsedEntry>(r.entries[index]);
      v[0] = "parsed";
      v[1] = Cell(e.method);
      v[2] = Cell(e.uri);
      v[3] = Cell(e.version);
      std::vector<std::string> headers;
      for (const auto& [name, value] : e.headers) {
        headers.push_back(EscapeBytes(absl::StrCat(AsciiLower(name), ": ", value)));
      }
      v[4] = absl::StrJoin(headers, "; ");
      v[5] = absl::StrCat(e.body.size(), " bytes ", Cell(e.body));
    }
    for (size_t i = 0; i < rows.size(); ++i) rows[i].cells.push_back(std::move(v[i]));
  }
  return rows;
}

bool RowDiffers(const Row& row) {
  return std::adjacent_find(row.cells.begin(), row.cells.end(),
                            std::not_equal_to<>()) != row.cells.end();
}

std::string Fit(std::string s, size_t width, bool truncate) {
  if (truncate && s.size() > width) s = s.substr(0, width - 3) + "...";
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string RenderSideBySide(const std::vector<std::string>& names,
                             const std::vector<InterpretationReport>& reports,
                             bool verbose, bool plain) {
  size_t entries = 0;
  for (const InterpretationReport& r : reports) entries = std::max(entries, r.entries.size());

  struct Block {
    std::string title;
    std::vector<Row> rows;
    std::optional<size_t> marked;
  };
  std::vector<Block> blocks;
  for (size_t i = 0; i < entries; ++i) {
    Block b{absl::StrCat("entry ", i + 1), EntryRows(reports, i), std::nullopt};
    for (size_t k = 0; k < b.rows.size(); ++k) {
      if (RowDiffers(b.rows[k])) {
        b.marked = k;
        break;
      }
    }
    std::vector<Row> shown;
    std::optional<size_t> marked;
    for (size_t k = 0; k < b.rows.size(); ++k) {
      bool keep = verbose || k <= 2 || b.marked == k;
      bool empty = std::all_of(b.rows[k].cells.begin(), b.rows[k].cells.end(),
                               [](const std::string& c) { return c.empty(); });
      if (!keep || (empty && b.marked != k)) continue;
      if (b.marked == k) marked = shown.size();
      shown.push_back(std::move(b.rows[k]));
    }
    b.rows = std::move(shown);
    b.marked = marked;
    blocks.push_back(std::move(b));
  }
  Row end{"end", {}};
  for (const InterpretationReport& r : reports) {
    end.cells.push_back(personalities::TerminationName(r.termination));
  }
  bool end_differs = RowDiffers(end);

  std::vector<size_t> width(names.size());
  for (size_t c = 0; c < names.size(); ++c) {
    width[c] = names[c].size();
    for (const Block& b : blocks) {
      for (const Row& row : b.rows) {
        size_t w = row.cells[c].size();
        width[c] = std::max(width[c], verbose ? w : std::min(w, kCellLimit));
      }
    }
    width[c] = std::max(width[c], end.cells[c].size());
  }

  auto line = [&](std::string_view label, const std::vector<std::string>& cells,
                  bool mark) {
    std::string out = absl::StrCat(mark ? "* " : "  ", Fit(std::string(label), 8, false));
    for (size_t c = 0; c < cells.size(); ++c) {
      std::string cell = Fit(cells[c], width[c], !verbose);
      bool highlight = mark && !plain && c > 0 && cells[c] != cells[0];
      absl::StrAppend(&out, " | ",
                      highlight ? absl::StrCat(kRed, cell, kReset) : cell);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };

  std::string out = line("", names, false);
  for (const Block& b : blocks) {
    absl::StrAppend(&out, b.title, "\n");
    for (size_t k = 0; k < b.rows.size(); ++k) {
      out += line(b.rows[k].label, b.rows[k].cells, b.marked == k);
    }
  }
  out += line(end.label, end.cells, end_differs);
  return out;
}

std::string RenderMatrix(const std::vector<std::string>& names,
                         const analysis::DiscrepancyMatrix& m) {
  std::string out = "    ";
  for (size_t j = 0; j < m.size(); ++j) absl::StrAppend(&out, " ", j % 10);
  out += "\n";
  for (size_t i = 0; i < m.size(); ++i) {
    absl::StrAppend(&out, Fit(std::to_string(i), 4, false));
    for (size_t j = 0; j < m.size(); ++j) {
      absl::StrAppend(&out, " ", i == j ? "-" : (m.Get(i, j) ? "1" : "0"));
    }
    absl::StrAppend(&out, "  ", i < names.size() ? names[i] : "", "\n");
  }
  absl::StrAppend(&out, "bits ", m.ToBitString(), "\n");
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

std::string Usage() {
  return "commands:\n"
         "  load <path>\n"
         "  results\n"
         "  use <group#> [member#]\n"
         "  stream set <idx> \"<escaped bytes>\"\n"
         "  stream show\n"
         "  send [-v] [origin...]\n"
         "  transduce <transducer>\n"
         "  mutate <byte|stream|grammar> [seed]\n"
         "  matrix\n"
         "  quirks <origin>\n"
         "  history\n"
         "  quit\n"
         "escapes: \\r \\n \\0 \\t \\\\ \\xNN\n";
}

namespace {

struct Failure {
  std::string message;
};

template <typename T>
std::optional<T> ParseNumber(std::string_view s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string ShowStream(const RequestStream& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    absl::StrAppend(&out, "[", i, "] \"", EscapeBytes(s[i]), "\"\n");
  }
  return out;
}

std::string ShowDiff(const RequestStream& before, const RequestStream& after) {
  std::string out;
  for (size_t i = 0; i < std::max(before.size(), after.size()); ++i) {
    bool has_old = i < before.size();
    bool has_new = i < after.size();
    if (has_old && has_new && before[i] == after[i]) {
      absl::StrAppend(&out, "  [", i, "] \"", EscapeBytes(before[i]), "\"\n");
      continue;
    }
    if (has_old) absl::StrAppend(&out, "- [", i, "] \"", EscapeBytes(before[i]), "\"\n");
    if (has_new) absl::StrAppend(&out, "+ [", i, "] \"", EscapeBytes(after[i]), "\"\n");
  }
  return out;
}

absl::StatusOr<std::vector<InterpretationReport>> Observe(
    Session& s, const std::vector<std::string>& names) {
  std::vector<InterpretationReport> reports;
  for (const std::string& name : names) {
    analysis::OriginTarget* o = s.env->origin(name);
    if (o == nullptr) return absl::NotFoundError(absl::StrCat("no origin named ", name));
    absl::StatusOr<analysis::Observation> obs = o->Observe(s.stream, false);
    if (!obs.ok()) {
      return absl::Status(obs.status().code(),
                          absl::StrCat(name, ": ", obs.status().message()));
    }
    reports.push_back(std::move(obs->report));
  }
  return reports;
}

using Result = std::variant<std::string, Failure>;

Result CmdLoad(Session& s, const std::vector<std::string>& args) {
  if (args.size() != 1) return Failure{"usage: load <path>"};
  absl::StatusOr<std::vector<analysis::FuzzResult>> results = fuzzer::LoadResults(args[0]);
  if (!results.ok()) return Failure{std::string(results.status().message())};
  s.results = std::move(*results);
  s.groups = analysis::GroupResults(s.results);
  s.current_result.reset();
  return absl::StrCat("loaded ", s.results.size(), " results in ", s.groups.size(),
                      " groups\n");
}

Result CmdResults(Session& s, const std::vector<std::string>& args) {
  if (!args.empty()) return Failure{"usage: results"};
  if (s.groups.empty()) return std::string("no results loaded\n");
  std::string out;
  for (size_t g = 0; g < s.groups.size(); ++g) {
    const analysis::ResultGroup& group = s.groups[g];
    absl::StrAppend(&out, "#", g + 1, "  pairs ", group.matrix.SetPairCount(),
                    "  members ", group.members.size(), "  matrix ",
                    group.matrix.ToBitString(), "\n");
    for (size_t m = 0; m < group.members.size(); ++m) {
      const analysis::FuzzResult& r = s.results[group.members[m]];
      std::string input = EscapeBytes(r.input.Concatenated());
      if (input.size() > 60) input = input.substr(0, 57) + "...";
      absl::StrAppend(&out, "    ", m + 1, ". ", r.id, "  witness ", r.witness,
                      "  \"", input, "\"\n");
    }
  }
  return out;
}

Result CmdUse(Session& s, const std::vector<std::string>& args) {
  if (args.empty() || args.size() > 2) return Failure{"usage: use <group#> [member#]"};
  std::optional<size_t> g = ParseNumber<size_t>(args[0]);
  std::optional<size_t> m =
      args.size() == 2 ? ParseNumber<size_t>(args[1]) : std::optional<size_t>(1);
  if (!g || *g < 1 || *g > s.groups.size()) {
    return Failure{absl::StrCat("no group ", args[0], " (", s.groups.size(),
                                " loaded)")};
  }
  const analysis::ResultGroup& group = s.groups[*g - 1];
  if (!m || *m < 1 || *m > group.members.size()) {
    return Failure{absl::StrCat("group ", *g, " has ", group.members.size(),
                                " members")};
  }
  const analysis::FuzzResult& r = s.results[group.members[*m - 1]];
  for (const std::string& name : r.origins) {
    if (s.env->origin(name) == nullptr) {
      return Failure{absl::StrCat("result needs origin ", name,
                                  ", which this session does not have")};
    }
  }
  s.stream = r.input;
  s.current_result = r.id;
  s.origins = r.origins;
  return absl::StrCat("using ", r.id, "\n", ShowStream(s.stream));
}

// Splits off the next space-delimited word of `rest`.
std::string_view NextWord(std::string_view& rest) {
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  size_t end = std::min(rest.find(' '), rest.size());
  std::string_view word = rest.substr(0, end);
  rest.remove_prefix(end);
  return word;
}

Result CmdStream(Session& s, std::string_view rest) {
  std::vector<std::string_view> parts;
  parts.push_back(NextWord(rest));
  if (parts[0] == "set") {
    parts.push_back(NextWord(rest));
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    parts.push_back(rest);
  } else if (!NextWord(rest).empty()) {
    parts.push_back("");
  }
  if (parts.size() == 1 && parts[0] == "show") return ShowStream(s.stream);
  if (parts.size() != 3 || parts[0] != "set") {
    return Failure{"usage: stream set <idx> \"<escaped bytes>\" | stream show"};
  }
  std::optional<size_t> idx = ParseNumber<size_t>(parts[1]);
  if (!idx || *idx > s.stream.size()) {
    return Failure{absl::StrCat("index must be at most ", s.stream.size())};
  }
  std::string_view quoted = parts[2];
  while (!quoted.empty() && quoted.back() == ' ') quoted.remove_suffix(1);
  if (quoted.size() < 2 || quoted.front() != '"' || quoted.back() != '"') {
    return Failure{"bytes must be one double-quoted escaped string"};
  }
  std::optional<Bytes> bytes = UnescapeBytes(quoted.substr(1, quoted.size() - 2));
  if (!bytes) return Failure{"bad escape sequence"};
  std::vector<Bytes> elements = s.stream.elements();
  if (*idx == elements.size()) {
    elements.push_back(std::move(*bytes));
  } else {
    elements[*idx] = std::move(*bytes);
  }
  RequestStream next(std::move(elements));
  if (next.TotalBytes() > kMaxStreamBytes) {
    return Failure{absl::StrCat("stream would exceed ", kMaxStreamBytes, " bytes")};
  }
  s.stream = std::move(next);
  s.current_result.reset();
  return ShowStream(s.stream);
}

Result CmdSend(Session& s, const std::vector<std::string>& args) {
  bool verbose = false;
  std::vector<std::string> names;
  for (const std::string& a : args) {
    if (a == "-v") {
      verbose = true;
    } else {
      names.push_back(a);
    }
  }
  if (names.empty()) names = s.origins;
  if (names.empty()) return Failure{"no origins selected"};
  absl::StatusOr<std::vector<InterpretationReport>> reports = Observe(s, names);
  if (!reports.ok()) return Failure{std::string(reports.status().message())};
  return RenderSideBySide(names, *reports, verbose, s.plain);
}

Result CmdTransduce(Session& s, const std::vector<std::string>& args) {
  if (args.size() != 1) return Failure{"usage: transduce <transducer>"};
  analysis::TransducerTarget* t = s.env->transducer(args[0]);
  if (t == nullptr) {
    return Failure{absl::StrCat("no transducer named ", args[0], "; have ",
                                absl::StrJoin(s.env->transducer_names(), ", "))};
  }
  absl::StatusOr<std::optional<RequestStream>> forwarded = t->Forward(s.stream);
  if (!forwarded.ok()) return Failure{std::string(forwarded.status().message())};
  if (!forwarded->has_value()) return Failure{absl::StrCat(args[0], " refused the stream")};
  std::string out = ShowDiff(s.stream, **forwarded);
  s.stream = std::move(**forwarded);
  s.current_result.reset();
  return out;
}

Result CmdMutate(Session& s, const std::vector<std::string>& args) {
  if (args.empty() || args.size() > 2) {
    return Failure{"usage: mutate <byte|stream|grammar> [seed]"};
  }
  uint64_t seed = s.next_seed;
  if (args.size() == 2) {
    std::optional<uint64_t> v = ParseNumber<uint64_t>(args[1]);
    if (!v) return Failure{"seed must be an unsigned integer"};
    seed = *v;
  } else {
    ++s.next_seed;
  }
  mutation::Rng rng(seed);
  mutation::Mutation m;
  if (args[0] == "byte") {
    m = mutation::MutateBytes(s.stream, rng);
  } else if (args[0] == "stream") {
    std::vector<Bytes> donors;
    for (const RequestStream& seed_stream : fuzzer::DefaultSeedCorpus()) {
      for (const Bytes& e : seed_stream.elements()) donors.push_back(e);
    }
    m = mutation::MutateStream(s.stream, rng, donors);
  } else if (args[0] == "grammar") {
    m = mutation::MutateGrammar(s.stream, rng);
  } else {
    return Failure{"usage: mutate <byte|stream|grammar> [seed]"};
  }
  std::string out = absl::StrCat("seed ", seed, ": ", m.record.Describe(), "\n",
                                 ShowDiff(s.stream, m.child));
  s.stream = std::move(m.child);
  s.current_result.reset();
  return out;
}

Result CmdMatrix(Session& s, const std::vector<std::string>& args) {
  if (!args.empty()) return Failure{"usage: matrix"};
  if (s.origins.size() < 2) return Failure{"need at least 2 origins"};
  absl::StatusOr<std::vector<InterpretationReport>> reports = Observe(s, s.origins);
  if (!reports.ok()) return Failure{std::string(reports.status().message())};
  std::vector<analysis::QuirksRecord> quirks;
  for (const std::string& name : s.origins) {
    absl::StatusOr<analysis::QuirksRecord> q = s.env->quirks(name);
    if (!q.ok()) return Failure{std::string(q.status().message())};
    quirks.push_back(std::move(*q));
  }
  analysis::DiscrepancyMatrix m = analysis::ComputeDiscrepancyMatrix(*reports, quirks);
  std::string out = RenderMatrix(s.origins, m);
  if (s.current_result) {
    auto it = std::find_if(s.results.begin(), s.results.end(),
                           [&](const analysis::FuzzResult& r) {
                             return r.id == *s.current_result;
                           });
    if (it != s.results.end()) {
      absl::StrAppend(&out, it->matrix == m ? "matches" : "DIFFERS FROM",
                      " the persisted matrix of ", it->id, "\n");
    }
  }
  return out;
}

Result CmdQuirks(Session& s, const std::vector<std::string>& args) {
  if (args.size() != 1) return Failure{"usage: quirks <origin>"};
  absl::StatusOr<analysis::QuirksRecord> q = s.env->quirks(args[0]);
  if (!q.ok()) return Failure{std::string(q.status().message())};
  std::vector<std::string> names;
  for (analysis::Allowance a : q->allowances) names.push_back(analysis::AllowanceName(a));
  return absl::StrCat(args[0], ": ", names.empty() ? "(none)" : absl::StrJoin(names, ", "),
                      "\n");
}

Result CmdHistory(Session& s, const std::vector<std::string>& args) {
  if (!args.empty()) return Failure{"usage: history"};
  std::string out;
  for (size_t i = 0; i < s.history.size(); ++i) {
    absl::StrAppend(&out, i + 1, "  ", s.history[i], "\n");
  }
  return out;
}

}  // namespace

EvalOutput EvalCommand(Session& session, std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.remove_suffix(1);
  }
  std::vector<std::string> tokens = absl::StrSplit(std::string(line), ' ', absl::SkipEmpty());
  if (tokens.empty()) return {};
  std::string command = tokens[0];
  std::vector<std::string> args(tokens.begin() + 1, tokens.end());

  Session next = session;
  Result r = Failure{""};
  if (command == "quit") {
    if (!args.empty()) return {"usage: quit\n", false, false};
    return {"", true, true};
  } else if (command == "load") {
    r = CmdLoad(next, args);
  } else if (command == "results") {
    r = CmdResults(next, args);
  } else if (command == "use") {
    r = CmdUse(next, args);
  } else if (command == "stream") {
    size_t at = line.find("stream");
    r = CmdStream(next, line.substr(at + 6));
  } else if (command == "send") {
    r = CmdSend(next, args);
  } else if (command == "transduce") {
    r = CmdTransduce(next, args);
  } else if (command == "mutate") {
    r = CmdMutate(next, args);
  } else if (command == "matrix") {
    r = CmdMatrix(next, args);
  } else if (command == "quirks") {
    r = CmdQuirks(next, args);
  } else if (command == "history") {
    r = CmdHistory(next, args);
  } else {
    return {absl::StrCat("unknown command: ", command, "\n", Usage()), false, false};
  }
  if (const Failure* f = std::get_if<Failure>(&r)) {
    return {absl::StrCat("error: ", f->message, "\n"), false, false};
  }
  next.history.emplace_back(line);
  session = std::move(next);
  return {std::get<std::string>(std::move(r)), true, false};
}

int RunLoop(Session& session, std::istream& in, std::ostream& out, bool interactive) {
  std::string line;
  while (true) {
    if (interactive) out << "garden> " << std::flush;
    if (!std::getline(in, line)) break;
    EvalOutput r = EvalCommand(session, line);
    out << r.text;
    if (!r.text.empty() && r.text.back() != '\n') out << "\n";
    out << std::flush;
    if (r.quit) return 0;
  }
  return 0;
}

}  // namespace garden::repl
