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

#include "garden/fuzzer.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "garden/net.h"
#include "garden/personalities.h"

namespace garden::fuzzer {

using analysis::FuzzResult;
using analysis::InterpretationReport;
using analysis::QuirksRecord;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

absl::Status CheckKeys(const json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(where), ": expected an object"));
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      return absl::InvalidArgumentError(
          absl::StrCat(std::string(where), ": unknown key \"", key, "\""));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<TargetSpec> TargetFromJson(const json& j, std::string_view where) {
  TargetSpec t;
  if (j.is_string()) {
    t.personality = j.get<std::string>();
    t.name = t.personality;
    return t;
  }
  if (absl::Status s = CheckKeys(
          j, {"name", "personality", "host", "port", "map_path", "coverage_pid"},
          where);
      !s.ok()) {
    return s;
  }
  t.name = j.value("name", "");
  t.personality = j.value("personality", "");
  t.host = j.value("host", t.host);
  t.port = j.value("port", 0);
  t.map_path = j.value("map_path", "");
  t.coverage_pid = j.value("coverage_pid", 0);
  if (t.name.empty()) t.name = t.personality;
  return t;
}

json TargetToJson(const TargetSpec& t) {
  if (t.in_process() && t.name == t.personality) return t.personality;
  json j = {{"name", t.name}};
  if (!t.personality.empty()) j["personality"] = t.personality;
  if (!t.in_process()) {
    j["host"] = t.host;
    j["port"] = t.port;
  }
  if (!t.map_path.empty()) {
    j["map_path"] = t.map_path;
    j["coverage_pid"] = t.coverage_pid;
  }
  return j;
}

absl::Status ValidateTarget(const TargetSpec& t, personalities::Kind kind) {
  if (t.name.empty()) return absl::InvalidArgumentError("target without a name");
  if (t.in_process()) {
    std::vector<personalities::Personality> registry =
        personalities::BuiltinRegistry();
    const personalities::Personality* p =
        personalities::FindPersonality(registry, t.personality);
    if (p == nullptr) {
      return absl::NotFoundError(
          absl::StrCat("unknown personality \"", t.personality, "\""));
    }
    if (kind == personalities::Kind::kTransducer && p->kind != kind) {
      return absl::InvalidArgumentError(
          absl::StrCat("\"", t.personality, "\" is not a transducer"));
    }
    return absl::OkStatus();
  }
  if (t.port < 1 || t.port > 65535) {
    return absl::InvalidArgumentError(
        absl::StrCat("target \"", t.name, "\": port out of range"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status FuzzConfig::Validate() const {
  if (generations < 1) return absl::InvalidArgumentError("generations must be >= 1");
  if (generation_size < 1) {
    return absl::InvalidArgumentError("generation_size must be >= 1");
  }
  if (origins.size() < 2) return absl::InvalidArgumentError("need at least 2 origins");
  if (transducers.empty()) {
    return absl::InvalidArgumentError("need at least 1 transducer");
  }
  if (weights.byte < 0 || weights.stream < 0 || weights.grammar < 0 ||
      weights.byte + weights.stream + weights.grammar == 0) {
    return absl::InvalidArgumentError(
        "mutation weights must be non-negative and not all zero");
  }
  if (read_timeout_ms < 10 || connect_timeout_ms < 1) {
    return absl::InvalidArgumentError("timeouts too small");
  }
  if (max_bytes == 0) return absl::InvalidArgumentError("max_bytes must be positive");
  std::set<std::string> names;
  for (const TargetSpec& t : origins) {
    if (absl::Status s = ValidateTarget(t, personalities::Kind::kOrigin); !s.ok()) {
      return s;
    }
    if (!names.insert(t.name).second) {
      return absl::InvalidArgumentError(absl::StrCat("duplicate origin \"", t.name, "\""));
    }
  }
  for (const TargetSpec& t : transducers) {
    if (absl::Status s = ValidateTarget(t, personalities::Kind::kTransducer);
        !s.ok()) {
      return s;
    }
  }
  for (const std::string& name : traced) {
    if (!names.contains(name)) {
      return absl::InvalidArgumentError(
          absl::StrCat("traced target \"", name, "\" is not an origin"));
    }
  }
  return absl::OkStatus();
}

FuzzConfig DefaultFuzzConfig() {
  FuzzConfig cfg;
  cfg.generations = 50;
  cfg.generation_size = 200;
  for (const char* name :
       {"rfc-oracle", "litespeed-like", "python-int-like", "node-like"}) {
    TargetSpec t;
    t.name = t.personality = name;
    cfg.origins.push_back(t);
  }
  for (const char* name : {"identity", "normalizing"}) {
    TargetSpec t;
    t.name = t.personality = name;
    cfg.transducers.push_back(t);
  }
  return cfg;
}

absl::StatusOr<FuzzConfig> FuzzConfigFromJson(const json& j) {
  if (absl::Status s = CheckKeys(
          j,
          {"seed_corpus", "generations", "generation_size", "rng_seed",
           "mutation_weights", "origins", "transducers", "traced",
           "read_timeout_ms", "connect_timeout_ms", "max_bytes", "quirks", "output"},
          "config");
      !s.ok()) {
    return s;
  }
  FuzzConfig cfg;
  try {
    cfg.seed_corpus = j.value("seed_corpus", "");
    cfg.generations = j.value("generations", cfg.generations);
    cfg.generation_size = j.value("generation_size", cfg.generation_size);
    cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
    if (j.contains("mutation_weights")) {
      const json& w = j["mutation_weights"];
      if (absl::Status s = CheckKeys(w, {"byte", "stream", "grammar"},
                                     "mutation_weights");
          !s.ok()) {
        return s;
      }
      cfg.weights.byte = w.value("byte", cfg.weights.byte);
      cfg.weights.stream = w.value("stream", cfg.weights.stream);
      cfg.weights.grammar = w.value("grammar", cfg.weights.grammar);
    }
    for (const char* key : {"origins", "transducers"}) {
      if (!j.contains(key)) continue;
      if (!j[key].is_array()) {
        return absl::InvalidArgumentError(absl::StrCat(key, ": expected an array"));
      }
      std::vector<TargetSpec>& out =
          std::string_view(key) == "origins" ? cfg.origins : cfg.transducers;
      for (const json& t : j[key]) {
        absl::StatusOr<TargetSpec> spec = TargetFromJson(t, key);
        if (!spec.ok()) return spec.status();
        out.push_back(std::move(*spec));
      }
    }
    if (j.contains("traced")) cfg.traced = j["traced"].get<std::vector<std::string>>();
    cfg.read_timeout_ms = j.value("read_timeout_ms", cfg.read_timeout_ms);
    cfg.connect_timeout_ms = j.value("connect_timeout_ms", cfg.connect_timeout_ms);
    cfg.max_bytes = j.value("max_bytes", cfg.max_bytes);
    cfg.quirks = j.value("quirks", "");
    cfg.output = j.value("output", "");
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("config: ", e.what()));
  }
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  return cfg;
}

json FuzzConfigToJson(const FuzzConfig& cfg) {
  json origins = json::array();
  for (const TargetSpec& t : cfg.origins) origins.push_back(TargetToJson(t));
  json transducers = json::array();
  for (const TargetSpec& t : cfg.transducers) transducers.push_back(TargetToJson(t));
  return {
      {"seed_corpus", cfg.seed_corpus},
      {"generations", cfg.generations},
      {"generation_size", cfg.generation_size},
      {"rng_seed", cfg.rng_seed},
      {"mutation_weights",
       {{"byte", cfg.weights.byte},
        {"stream", cfg.weights.stream},
        {"grammar", cfg.weights.grammar}}},
      {"origins", origins},
      {"transducers", transducers},
      {"traced", cfg.traced},
      {"read_timeout_ms", cfg.read_timeout_ms},
      {"connect_timeout_ms", cfg.connect_timeout_ms},
      {"max_bytes", cfg.max_bytes},
      {"quirks", cfg.quirks},
      {"output", cfg.output},
  };
}

namespace {

absl::StatusOr<json> ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": not valid JSON"));
  }
  return j;
}

}  // namespace

absl::StatusOr<FuzzConfig> LoadFuzzConfig(const std::string& path) {
  absl::StatusOr<json> j = ReadJsonFile(path);
  if (!j.ok()) return j.status();
  return FuzzConfigFromJson(*j);
}

std::vector<RequestStream> DefaultSeedCorpus() {
  return {
      RequestStream{"GET / HTTP/1.1\r\nHost: a\r\n\r\n"},
      RequestStream{"POST / HTTP/1.1\r\nHost: a\r\nContent-Length: 12\r\n\r\nhello, world"},
      RequestStream{
          "POST / HTTP/1.1\r\nHost: a\r\nTransfer-Encoding: chunked\r\n\r\n"
          "c\r\nhello, world\r\n0\r\n\r\n"},
      RequestStream{"GET /a HTTP/1.1\r\nHost: a\r\n\r\n"
                    "GET /b HTTP/1.1\r\nHost: a\r\n\r\n"},
      RequestStream{"GET /a HTTP/1.1\r\nHost: a\r\n\r\n",
                    "GET /b HTTP/1.1\r\nHost: a\r\n\r\n"},
      RequestStream{"HEAD / HTTP/1.1\r\nHost: a\r\n\r\n"},
  };
}

absl::StatusOr<std::vector<RequestStream>> LoadSeedCorpus(const std::string& path) {
  absl::StatusOr<json> j = ReadJsonFile(path);
  if (!j.ok()) return j.status();
  if (!j->is_array() || j->empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": expected a non-empty array of streams"));
  }
  std::vector<RequestStream> out;
  for (size_t i = 0; i < j->size(); ++i) {
    const json& s = (*j)[i];
    if (!s.is_array() || s.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ": stream ", i, " is not a non-empty array"));
    }
    std::vector<Bytes> elements;
    for (const json& e : s) {
      std::optional<Bytes> bytes =
          e.is_string() ? UnescapeBytes(e.get<std::string>()) : std::nullopt;
      if (!bytes) {
        return absl::InvalidArgumentError(
            absl::StrCat(path, ": stream ", i, " has a bad element"));
      }
      elements.push_back(std::move(*bytes));
    }
    out.emplace_back(std::move(elements));
  }
  return out;
}

absl::StatusOr<std::vector<QuirksRecord>> LoadQuirksFile(const std::string& path) {
  absl::StatusOr<json> j = ReadJsonFile(path);
  if (!j.ok()) return j.status();
  if (!j->is_array()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": expected an array"));
  }
  std::vector<QuirksRecord> out;
  for (const json& r : *j) {
    absl::StatusOr<QuirksRecord> record = analysis::QuirksRecordFromJson(r);
    if (!record.ok()) return record.status();
    out.push_back(std::move(*record));
  }
  return out;
}

absl::Status WriteQuirksFile(const std::string& path,
                             std::span<const QuirksRecord> records) {
  json j = json::array();
  for (const QuirksRecord& r : records) j.push_back(analysis::QuirksRecordToJson(r));
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

std::vector<analysis::OriginTarget*> Targets::origin_ptrs() const {
  std::vector<analysis::OriginTarget*> out;
  for (const auto& o : origins) out.push_back(o.get());
  return out;
}

std::vector<analysis::TransducerTarget*> Targets::transducer_ptrs() const {
  std::vector<analysis::TransducerTarget*> out;
  for (const auto& t : transducers) out.push_back(t.get());
  return out;
}

std::vector<std::string> Targets::origin_names() const {
  std::vector<std::string> out;
  for (const auto& o : origins) out.push_back(o->name());
  return out;
}

absl::StatusOr<Targets> ResolveTargets(const FuzzConfig& cfg) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  std::vector<personalities::Personality> registry = personalities::BuiltinRegistry();
  auto endpoint = [&](const TargetSpec& t) {
    net::Endpoint e;
    e.host = t.host;
    e.port = t.port;
    e.read_timeout_ms = cfg.read_timeout_ms;
    e.connect_timeout_ms = cfg.connect_timeout_ms;
    return e;
  };
  auto personality = [&](const TargetSpec& t) {
    personalities::Personality p = *personalities::FindPersonality(registry, t.personality);
    p.name = t.name;
    return p;
  };

  Targets targets;
  for (const TargetSpec& t : cfg.origins) {
    if (t.in_process()) {
      targets.origins.push_back(
          std::make_unique<analysis::PersonalityOrigin>(personality(t)));
      continue;
    }
    std::optional<coverage::ExternalTarget> cov;
    if (!t.map_path.empty()) {
      cov = coverage::ExternalTarget{
          t.map_path, std::make_shared<coverage::SignalControlChannel>(t.coverage_pid)};
    }
    targets.origins.push_back(
        std::make_unique<net::TcpOrigin>(t.name, endpoint(t), std::move(cov)));
  }
  for (const TargetSpec& t : cfg.transducers) {
    if (t.in_process()) {
      targets.transducers.push_back(
          std::make_unique<analysis::PersonalityTransducer>(personality(t)));
    } else {
      targets.transducers.push_back(
          std::make_unique<net::TcpTransducer>(t.name, endpoint(t)));
    }
  }
  for (const TargetSpec& t : cfg.origins) {
    targets.traced.push_back(cfg.traced.empty() ||
                             std::find(cfg.traced.begin(), cfg.traced.end(),
                                       t.name) != cfg.traced.end());
  }

  if (!cfg.quirks.empty()) {
    absl::StatusOr<std::vector<QuirksRecord>> records = LoadQuirksFile(cfg.quirks);
    if (!records.ok()) return records.status();
    for (const TargetSpec& t : cfg.origins) {
      auto it = std::find_if(records->begin(), records->end(),
                             [&](const QuirksRecord& r) { return r.target == t.name; });
      if (it == records->end()) {
        return absl::NotFoundError(
            absl::StrCat(cfg.quirks, ": no quirks record for \"", t.name, "\""));
      }
      targets.quirks.push_back(*it);
    }
  } else {
    for (auto& o : targets.origins) {
      absl::StatusOr<QuirksRecord> r = analysis::ProbeQuirks(*o);
      if (!r.ok()) return r.status();
      targets.quirks.push_back(std::move(*r));
    }
  }
  return targets;
}

// ---------------------------------------------------------------------------
// Corpus and parent selection
// ---------------------------------------------------------------------------

const CorpusEntry* Corpus::Find(std::string_view id) const {
  for (const CorpusEntry& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void Corpus::Add(CorpusEntry entry) {
  for (const Bytes& e : entry.stream.elements()) elements_.push_back(e);
  entries_.push_back(std::move(entry));
}

absl::StatusOr<RequestStream> Corpus::Replay(std::string_view id) const {
  std::vector<const CorpusEntry*> chain;
  const CorpusEntry* e = Find(id);
  while (e != nullptr && e->parent.has_value()) {
    chain.push_back(e);
    e = Find(*e->parent);
  }
  if (e == nullptr) {
    return absl::NotFoundError(absl::StrCat("broken provenance chain for ", std::string(id)));
  }
  RequestStream s = e->stream;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    absl::StatusOr<RequestStream> next = mutation::Apply(*(*it)->record, s);
    if (!next.ok()) return next.status();
    s = std::move(*next);
  }
  return s;
}

std::vector<size_t> SelectParents(std::span<const Evaluation> evaluations,
                                  coverage::DeltaState& state) {
  std::vector<size_t> queue;
  for (size_t i = 0; i < evaluations.size(); ++i) {
    absl::StatusOr<bool> novel = state.Observe(evaluations[i].tuple);
    if (novel.ok() && *novel && !evaluations[i].discrepancy) queue.push_back(i);
  }
  return queue;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

absl::StatusOr<std::vector<InterpretationReport>> ObserveAll(
    const RequestStream& input, Targets& targets) {
  std::vector<InterpretationReport> reports;
  for (auto& o : targets.origins) {
    absl::StatusOr<analysis::Observation> obs = o->Observe(input, false);
    if (!obs.ok()) return obs.status();
    reports.push_back(std::move(obs->report));
  }
  return reports;
}

namespace {

FuzzResult BuildResult(std::string id, const RequestStream& input,
                       std::span<const InterpretationReport> reports,
                       const Targets& targets, std::string witness) {
  FuzzResult r;
  r.id = std::move(id);
  r.input = input;
  r.matrix = analysis::ComputeDiscrepancyMatrix(reports, targets.quirks);
  r.origins = targets.origin_names();
  for (const InterpretationReport& rep : reports) {
    r.digests.push_back(analysis::ReportDigest(rep));
  }
  r.witness = std::move(witness);
  r.group_key = analysis::GroupKey(r.matrix);
  return r;
}

}  // namespace

absl::StatusOr<std::optional<FuzzResult>> JudgeInput(const RequestStream& input,
                                                     Targets& targets,
                                                     std::string id) {
  absl::StatusOr<std::vector<InterpretationReport>> reports =
      ObserveAll(input, targets);
  if (!reports.ok()) return reports.status();
  if (!analysis::IsMeaningful(*reports, targets.quirks)) return std::nullopt;
  std::vector<analysis::OriginTarget*> origins = targets.origin_ptrs();
  std::vector<analysis::TransducerTarget*> transducers = targets.transducer_ptrs();
  analysis::Durability d =
      analysis::IsDurable(input, transducers, origins, targets.quirks);
  if (!d.durable) return std::nullopt;
  return BuildResult(std::move(id), input, *reports, targets, *d.witness);
}

absl::StatusOr<FuzzRun> RunFuzz(const FuzzConfig& cfg) {
  absl::StatusOr<Targets> targets = ResolveTargets(cfg);
  if (!targets.ok()) return targets.status();
  return RunFuzz(cfg, *targets);
}

absl::StatusOr<FuzzRun> RunFuzz(const FuzzConfig& cfg, Targets& targets) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (targets.origins.size() != targets.quirks.size() ||
      targets.origins.size() != targets.traced.size()) {
    return absl::InvalidArgumentError("targets and quirks records do not line up");
  }
  std::vector<RequestStream> seeds = DefaultSeedCorpus();
  if (!cfg.seed_corpus.empty()) {
    absl::StatusOr<std::vector<RequestStream>> loaded = LoadSeedCorpus(cfg.seed_corpus);
    if (!loaded.ok()) return loaded.status();
    seeds = std::move(*loaded);
  }
  std::ofstream out;
  if (!cfg.output.empty()) {
    out.open(cfg.output, std::ios::trunc);
    if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", cfg.output));
  }

  FuzzRun run;
  std::vector<std::string> queue;
  for (size_t i = 0; i < seeds.size(); ++i) {
    std::string id = absl::StrCat("seed-", i);
    seeds[i].TruncateTo(cfg.max_bytes);
    run.corpus.Add({id, seeds[i], std::nullopt, std::nullopt});
    queue.push_back(id);
  }
  std::vector<std::string> traced_names;
  for (size_t i = 0; i < targets.origins.size(); ++i) {
    if (targets.traced[i]) traced_names.push_back(targets.origins[i]->name());
  }
  coverage::DeltaState delta(traced_names);
  std::vector<analysis::OriginTarget*> origins = targets.origin_ptrs();
  std::vector<analysis::TransducerTarget*> transducers = targets.transducer_ptrs();
  const std::vector<QuirksRecord> no_quirks(targets.origins.size());
  mutation::Rng rng(cfg.rng_seed);

  for (int g = 0; g < cfg.generations; ++g) {
    std::vector<std::string> parents;
    std::vector<mutation::Mutation> children;
    for (int i = 0; i < cfg.generation_size; ++i) {
      const std::string& parent = queue[rng.Below(queue.size())];
      children.push_back(mutation::Mutate(run.corpus.Find(parent)->stream, rng,
                                          cfg.weights, run.corpus.elements(),
                                          cfg.max_bytes));
      parents.push_back(parent);
    }

    std::vector<Evaluation> evaluations;
    for (size_t i = 0; i < children.size(); ++i) {
      const RequestStream& child = children[i].child;
      ++run.stats.evaluations;
      Evaluation ev;
      std::vector<InterpretationReport> reports;
      bool complete = true;
      for (size_t k = 0; k < origins.size(); ++k) {
        absl::StatusOr<analysis::Observation> obs =
            origins[k]->Observe(child, targets.traced[k]);
        if (!obs.ok()) {
          // A failed target drops out of this input's tuple.
          ++run.stats.target_errors;
          complete = false;
          if (targets.traced[k]) ev.tuple.push_back(coverage::kUntracedSignature);
          continue;
        }
        if (targets.traced[k]) {
          ev.tuple.push_back(obs->signature.value_or(coverage::kUntracedSignature));
        }
        reports.push_back(std::move(obs->report));
      }
      ev.discrepancy = complete && analysis::IsMeaningful(reports, no_quirks);
      evaluations.push_back(ev);
      if (!ev.discrepancy) continue;
      ++run.stats.discrepancies;
      if (!analysis::IsMeaningful(reports, targets.quirks)) continue;
      ++run.stats.meaningful;
      analysis::Durability d =
          analysis::IsDurable(child, transducers, origins, targets.quirks);
      if (!d.durable) continue;
      ++run.stats.durable;
      FuzzResult result = BuildResult(absl::StrCat("g", g, "-", i), child, reports,
                                      targets, *d.witness);
      if (out.is_open()) {
        out << ResultToJson(result).dump() << "\n";
        out.flush();
        if (!out) {
          return absl::DataLossError(absl::StrCat(
              "writing ", cfg.output, " failed after ", run.results.size(),
              " results"));
        }
      }
      run.results.push_back(std::move(result));
    }

    std::vector<std::string> next;
    for (size_t i : SelectParents(evaluations, delta)) {
      std::string id = absl::StrCat("g", g, "-", i);
      run.corpus.Add({id, children[i].child, parents[i], children[i].record});
      next.push_back(std::move(id));
    }
    run.stats.enqueued += next.size();
    if (!next.empty()) queue = std::move(next);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Persistence and validation
// ---------------------------------------------------------------------------

json ResultToJson(const FuzzResult& r) {
  json input = json::array();
  for (const Bytes& e : r.input.elements()) input.push_back(Base64Encode(e));
  json digests = json::array();
  for (size_t i = 0; i < r.origins.size(); ++i) {
    digests.push_back({{"origin", r.origins[i]}, {"digest", r.digests[i]}});
  }
  return {{"id", r.id},
          {"input", input},
          {"matrix", r.matrix.ToBitString()},
          {"witness", r.witness},
          {"group_key", r.group_key},
          {"digests", digests}};
}

absl::StatusOr<FuzzResult> ResultFromJson(const json& j) {
  if (absl::Status s = CheckKeys(
          j, {"id", "input", "matrix", "witness", "group_key", "digests"}, "result");
      !s.ok()) {
    return s;
  }
  try {
    FuzzResult r;
    r.id = j.at("id").get<std::string>();
    std::vector<Bytes> elements;
    for (const json& e : j.at("input")) {
      std::optional<Bytes> b = Base64Decode(e.get<std::string>());
      if (!b) return absl::InvalidArgumentError("input: bad base64");
      elements.push_back(std::move(*b));
    }
    if (elements.empty()) return absl::InvalidArgumentError("input: empty stream");
    r.input = RequestStream(std::move(elements));
    std::optional<analysis::DiscrepancyMatrix> m =
        analysis::DiscrepancyMatrix::FromBitString(j.at("matrix").get<std::string>());
    if (!m) return absl::InvalidArgumentError("matrix: not a symmetric bit matrix");
    r.matrix = std::move(*m);
    r.witness = j.at("witness").get<std::string>();
    r.group_key = j.at("group_key").get<std::string>();
    for (const json& d : j.at("digests")) {
      r.origins.push_back(d.at("origin").get<std::string>());
      r.digests.push_back(d.at("digest").get<std::string>());
    }
    if (r.origins.size() != r.matrix.size()) {
      return absl::InvalidArgumentError("digests do not match the matrix size");
    }
    if (r.group_key != analysis::GroupKey(r.matrix)) {
      return absl::InvalidArgumentError("group_key does not match the matrix");
    }
    return r;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(e.what());
  }
}

absl::Status PersistResults(std::span<const FuzzResult> results,
                            const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  for (const FuzzResult& r : results) out << ResultToJson(r).dump() << "\n";
  out.flush();
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

absl::StatusOr<std::vector<FuzzResult>> LoadResults(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<FuzzResult> out;
  std::string line;
  for (size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ": line ", n, ": not valid JSON"));
    }
    absl::StatusOr<FuzzResult> r = ResultFromJson(j);
    if (!r.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ": line ", n, ": ", r.status().message()));
    }
    out.push_back(std::move(*r));
  }
  return out;
}

std::vector<ValidationFailure> ValidateResults(std::span<const FuzzResult> results,
                                               Targets& targets) {
  std::vector<ValidationFailure> failures;
  std::vector<std::string> names = targets.origin_names();
  std::vector<analysis::OriginTarget*> origins = targets.origin_ptrs();
  std::vector<analysis::TransducerTarget*> transducers = targets.transducer_ptrs();
  for (const FuzzResult& r : results) {
    auto fail = [&](std::string reason) {
      failures.push_back({r.id, std::move(reason)});
    };
    if (r.origins != names) {
      fail("origins differ from the configured targets");
      continue;
    }
    absl::StatusOr<std::vector<InterpretationReport>> reports =
        ObserveAll(r.input, targets);
    if (!reports.ok()) {
      fail(std::string(reports.status().message()));
      continue;
    }
    if (!analysis::IsMeaningful(*reports, targets.quirks)) {
      fail("not meaningful");
      continue;
    }
    analysis::Durability d =
        analysis::IsDurable(r.input, transducers, origins, targets.quirks);
    if (!d.durable) {
      fail("not durable");
      continue;
    }
    FuzzResult again = BuildResult(r.id, r.input, *reports, targets, *d.witness);
    if (again.matrix != r.matrix) {
      fail(absl::StrCat("matrix ", again.matrix.ToBitString(), " != persisted ",
                        r.matrix.ToBitString()));
    } else if (again.digests != r.digests) {
      fail("report digests differ");
    } else if (again.witness != r.witness) {
      fail(absl::StrCat("witness ", again.witness, " != persisted ", r.witness));
    }
  }
  return failures;
}

}  // namespace garden::fuzzer
