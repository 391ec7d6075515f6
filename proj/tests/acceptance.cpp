// Copyright 2026 The pprl-train Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits non-zero if any fails. `--dump <file>` writes a fixed set of encoded
// vectors and exits; the determinism check runs itself twice in that mode.

#include <unistd.h>
#include <sys/wait.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "pprl/broker_service.hpp"
#include "pprl/csv.hpp"
#include "pprl/eval.hpp"
#include "pprl/protocol.hpp"
#include "pprl/train.hpp"
#include "support.hpp"

using namespace pprl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

EncodingScheme acceptance_scheme() { return eval::default_scheme(testing::fixed_secrets('x')); }

// A stack with one resolver per station file, plus a plan over it.
struct StationRun {
  testing::ServiceStack stack;
  testing::TempDir dir;
  std::vector<std::string> names;

  StationRun(const eval::SplitResult& split, const EncodingScheme& scheme)
      : stack(stack_options(split, scheme)) {
    for (std::size_t f = 0; f < split.files.size(); ++f) {
      names.push_back(fmt::format("station{}", f + 1));
      std::string list;
      for (const auto& r : split.files[f]) list += r.pseudonym + "\n";
      csv::write_file(dir.path() / (names.back() + ".txt"), list);
    }
  }

  static testing::StackOptions stack_options(const eval::SplitResult& split,
                                             const EncodingScheme& scheme) {
    testing::StackOptions o;
    o.scheme = scheme;
    for (const auto& f : split.files) o.mpi_csvs.push_back(eval::format_mpi_store(f));
    return o;
  }

  // Written to disk so that the privacy scan sees the orchestrator's input.
  train::TrainPlan plan(const std::string& out, double threshold,
                        std::optional<std::uint32_t> expected) const {
    json stations = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
      stations.push_back({{"name", names[i]},
                          {"resolver_url", stack.resolver_url(i)},
                          {"pseudonym_file", names[i] + ".txt"}});
    }
    json session = {{"threshold", threshold}};
    if (expected) session["expected_clients"] = *expected;
    const json j = {{"session", session},
                    {"stations", stations},
                    {"broker_url", stack.broker_url()},
                    {"output_dir", out}};
    const auto path = dir.path() / (out + ".plan.json");
    csv::write_file(path, j.dump(2));
    return train::TrainPlan::load(path);
  }
};

train::RunOptions run_options() {
  train::RunOptions o;
  o.poll_interval = std::chrono::milliseconds(50);
  o.timeout = std::chrono::minutes(4);
  return o;
}

int two_phase(const train::TrainPlan& plan, std::ostream& log) {
  const int code = train::run_submit(plan, run_options(), log);
  return code == train::kSuccess ? train::run_results(plan, run_options(), log) : code;
}

std::set<std::pair<std::string, std::string>> pair_set(
    const std::vector<eval::PredictedPair>& pairs) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) out.insert(std::minmax(p.pseudonym_a, p.pseudonym_b));
  return out;
}

// Corrupted-duplicate data, shared with the sweep and privacy checks.
struct CorruptionData {
  eval::SplitResult split;
  std::vector<eval::EncodedFile> encoded;
};

const CorruptionData& corruption_data() {
  static const CorruptionData data = [] {
    eval::GeneratorConfig g;
    g.record_count = 1000;
    g.seed = 2024;
    const auto originals = eval::generate(g);
    auto all = originals;
    for (std::uint64_t seed : {101, 202}) {
      eval::CorruptionConfig c;
      c.seed = seed;
      const auto copies = eval::corrupt(originals, c);
      all.insert(all.end(), copies.begin(), copies.end());
    }
    CorruptionData d;
    d.split = eval::scatter(all, 3, 77);
    d.encoded = eval::encode_files(d.split.files, acceptance_scheme());
    return d;
  }();
  return data;
}

// Everything the orchestrator read or wrote, and every body seen on the wire.
std::vector<std::string> privacy_corpus;

void collect_surface(StationRun& run) {
  for (const auto& entry : fs::recursive_directory_iterator(run.dir.path())) {
    if (entry.is_regular_file()) privacy_corpus.push_back(csv::read_file(entry.path()));
  }
  for (const auto& e : run.stack.traffic().snapshot()) {
    if (e.service == "encoder") continue;  // station-internal hop
    privacy_corpus.push_back(e.request_body);
    privacy_corpus.push_back(e.response_body);
  }
}

std::set<std::string> qid_values;

void remember_qids(const eval::SplitResult& split) {
  for (const auto& f : split.files) {
    for (const auto& r : f) {
      for (const auto& [name, value] : r.attributes) {
        if (name == "gender") continue;  // single letters, not identifying
        qid_values.insert(value);
        qid_values.insert(preprocess(value));
      }
    }
  }
}

// ---------------------------------------------------------------- criteria

Outcome exact_duplicates() {
  const auto start = Clock::now();
  eval::GeneratorConfig g;
  g.record_count = 3000;
  g.seed = 3000;
  const auto split = eval::split(eval::generate(g), 3, 100, 31);
  remember_qids(split);
  const auto scheme = acceptance_scheme();
  StationRun run(split, scheme);
  std::ostringstream log;
  const auto plan = run.plan("exact", 1.0, std::nullopt);
  if (const int code = two_phase(plan, log); code != train::kSuccess) {
    return {false, fmt::format("orchestrator exit {}: {}", code, log.str())};
  }
  const auto predicted = eval::read_report_pairs(plan.output_dir);
  const auto files = eval::encode_files(split.files, scheme);
  const auto result = eval::evaluate(predicted, split.truth, eval::total_comparisons(files));
  const bool same_as_in_process = pair_set(predicted) == pair_set(eval::link(files, 1.0));
  collect_surface(run);
  const double elapsed = seconds_since(start);
  const auto& c = result.counts;
  return {c.false_positives == 0 && c.false_negatives == 0 && c.true_positives == 300 &&
              same_as_in_process && elapsed < 120.0,
          fmt::format("TP={} FP={} FN={} precision={:.4f} recall={:.4f} in-process-equal={} "
                      "{:.1f}s",
                      c.true_positives, c.false_positives, c.false_negatives,
                      result.metrics.precision, result.metrics.recall, same_as_in_process,
                      elapsed)};
}

Outcome corrupted_duplicates() {
  const auto start = Clock::now();
  const auto& data = corruption_data();
  remember_qids(data.split);
  StationRun run(data.split, acceptance_scheme());
  std::ostringstream log;
  const auto plan = run.plan("corrupted", 0.70, std::nullopt);
  if (const int code = two_phase(plan, log); code != train::kSuccess) {
    return {false, fmt::format("orchestrator exit {}: {}", code, log.str())};
  }
  const auto predicted = eval::read_report_pairs(plan.output_dir);
  const auto result =
      eval::evaluate(predicted, data.split.truth, eval::total_comparisons(data.encoded));
  const bool same_as_in_process = pair_set(predicted) == pair_set(eval::link(data.encoded, 0.70));
  collect_surface(run);
  const double elapsed = seconds_since(start);
  const auto& c = result.counts;
  return {result.metrics.f1 >= 0.95 && same_as_in_process && elapsed < 300.0,
          fmt::format("TP={} FP={} FN={} F1={:.4f} in-process-equal={} {:.1f}s",
                      c.true_positives, c.false_positives, c.false_negatives,
                      result.metrics.f1, same_as_in_process, elapsed)};
}

Outcome threshold_sweep() {
  const auto& data = corruption_data();
  const auto report = eval::sweep_experiment(eval::score_all_pairs(data.encoded, data.split.truth),
                                             eval::count_true_pairs(data.split.truth));
  bool monotone = report.rows.size() == 101;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    monotone = monotone && report.rows[i].metrics.recall <= report.rows[i - 1].metrics.recall;
  }
  const auto& at70 = report.rows.at(70);
  const double best = report.best.threshold;
  return {monotone && best >= 0.60 - 1e-9 && best <= 0.90 + 1e-9 &&
              report.best.metrics.f1 >= at70.metrics.f1,
          fmt::format("rows={} recall-monotone={} argmax={:.2f} F1(argmax)={:.4f} "
                      "F1(0.70)={:.4f}",
                      report.rows.size(), monotone, best, report.best.metrics.f1,
                      at70.metrics.f1)};
}

Outcome broker_oracle() {
  std::mt19937_64 gen(4);
  std::size_t sessions_equal = 0;
  std::size_t total_matches = 0;
  for (int s = 0; s < 20; ++s) {
    BrokerOptions options;
    options.parallelism = 1 + s % 3;
    Broker broker(options);
    const auto clients = std::uniform_int_distribution<int>(2, 4)(gen);
    const double threshold = std::uniform_real_distribution<double>(0.3, 1.0)(gen);
    const std::size_t length = 256;
    // noisy copies of shared prototypes, so that matches exist at most thresholds
    std::vector<BitVector> prototypes;
    for (int i = 0; i < 30; ++i) prototypes.push_back(testing::random_vector(length, gen()));
    std::vector<std::vector<BitVector>> data(clients);
    const auto session = fmt::format("oracle-{}", s);
    for (int c = 0; c < clients; ++c) {
      const auto n = std::uniform_int_distribution<std::size_t>(10, 200)(gen);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = prototypes[gen() % prototypes.size()];
        const auto flips = gen() % 80;
        for (std::size_t k = 0; k < flips; ++k) {
          const auto bit = gen() % length;
          v.set(bit, !v.test(bit));
        }
        data[c].push_back(gen() % 5 == 0 ? testing::random_vector(length, gen()) : v);
      }
      protocol::SubmissionEnvelope e;
      e.session_id = session;
      e.client_id = fmt::format("client-{}", c);
      e.config = {session, threshold, static_cast<std::uint32_t>(clients), std::string("d")};
      e.vectors = data[c];
      broker.submit(e);
    }
    broker.wait_idle();
    std::set<std::tuple<std::string, std::size_t, std::string, std::size_t, double>> expected;
    for (int a = 0; a < clients; ++a) {
      for (int b = a + 1; b < clients; ++b) {
        for (std::size_t i = 0; i < data[a].size(); ++i) {
          for (std::size_t j = 0; j < data[b].size(); ++j) {
            const double sim = testing::naive_jaccard(data[a][i], data[b][j]);
            if (sim >= threshold) {
              expected.emplace(fmt::format("client-{}", a), i, fmt::format("client-{}", b), j,
                               sim);
            }
          }
        }
      }
    }
    std::set<std::tuple<std::string, std::size_t, std::string, std::size_t, double>> got;
    for (const auto& m : broker.stored_matches(session)) {
      got.emplace(m.client_a, m.index_a, m.client_b, m.index_b, m.similarity);
    }
    total_matches += expected.size();
    sessions_equal += got == expected && broker.progress(session).complete;
  }
  return {sessions_equal == 20,
          fmt::format("{}/20 sessions equal to the naive oracle ({} matches)", sessions_equal,
                      total_matches)};
}

std::vector<PersonRecord> determinism_records() {
  eval::GeneratorConfig g;
  g.record_count = 200;
  g.seed = 55;
  std::vector<PersonRecord> out;
  for (const auto& r : eval::generate(g)) out.push_back(r.person());
  return out;
}

std::string dump_vectors() {
  const auto scheme = acceptance_scheme();
  std::string out;
  for (const auto& r : determinism_records()) out += encode(r, scheme).to_bytes();
  return out;
}

bool run_dump(const std::string& self, const fs::path& file) {
  const pid_t pid = fork();
  if (pid == 0) {
    execl(self.c_str(), self.c_str(), "--dump", file.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  int status = 0;
  return pid > 0 && waitpid(pid, &status, 0) == pid && WIFEXITED(status) &&
         WEXITSTATUS(status) == 0;
}

Outcome encoding_invariants(const std::string& self) {
  std::mt19937_64 gen(5);
  std::size_t bad_preprocess = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto raw = testing::random_unicode(gen);
    const auto p = preprocess(raw);
    const bool ascii_lower = std::all_of(p.begin(), p.end(), [](char ch) {
      const auto u = static_cast<unsigned char>(ch);
      return u >= 0x20 && u < 0x7F && !std::isupper(u);
    });
    bad_preprocess += !(ascii_lower && preprocess(p) == p);
  }

  eval::GeneratorConfig g;
  g.record_count = 1000;
  g.seed = 5;
  const auto records = eval::generate(g);
  const auto scheme = acceptance_scheme();
  std::size_t bad_weight = 0;
  for (const auto& r : records) bad_weight += encode(r.person(), scheme).count() != scheme.filter_length;

  auto permuted = scheme;
  permuted.permutation_seed = "another permutation seed";
  double worst = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    const auto& a = records[i].person();
    const auto& b = records[(i * 7 + 1) % records.size()].person();
    const double d = std::abs(jaccard(encode(a, scheme), encode(b, scheme)) -
                              jaccard(encode(a, permuted), encode(b, permuted)));
    worst = std::max(worst, d);
  }

  testing::TempDir dir;
  const bool ran = run_dump(self, dir.path() / "1.bin") && run_dump(self, dir.path() / "2.bin");
  const bool identical = ran && csv::read_file(dir.path() / "1.bin") ==
                                    csv::read_file(dir.path() / "2.bin") &&
                         csv::read_file(dir.path() / "1.bin") == dump_vectors();
  return {bad_preprocess == 0 && bad_weight == 0 && worst <= 1e-12 && identical,
          fmt::format("preprocess violations {}/10000, weight violations {}/1000, "
                      "max permutation delta {:.1e}, cross-process identical={}",
                      bad_preprocess, bad_weight, worst, identical)};
}

Outcome metrics_reproduction() {
  const auto cm = eval::complete_confusion(1145, 4, 12, 1143252);
  const auto m = metrics(cm);
  return {cm.true_negatives == 1142091 && std::abs(m.f1 - 0.9931) <= 1e-4,
          fmt::format("TN={} precision={:.4f} recall={:.4f} F1={:.4f}", cm.true_negatives,
                      m.precision, m.recall, m.f1)};
}

Outcome mode_equivalence() {
  eval::GeneratorConfig g;
  g.record_count = 600;
  g.seed = 77;
  const auto originals = eval::generate(g);
  eval::CorruptionConfig c;
  c.seed = 3;
  auto all = originals;
  const auto copies = eval::corrupt(originals, c);
  all.insert(all.end(), copies.begin(), copies.end());
  const auto split = eval::split(all, 3, 50, 12);
  remember_qids(split);
  StationRun run(split, acceptance_scheme());
  std::ostringstream log;
  const auto two = run.plan("two-phase", 0.75, 3u);
  const auto fed = run.plan("federated", 0.75, 3u);
  const int code_two = two_phase(two, log);
  const int code_fed = train::run_federated(fed, run_options(), log);
  std::size_t equal = 0;
  std::size_t rows = 0;
  for (const auto& name : run.names) {
    const auto a = csv::read_file(two.output_dir / (name + ".csv"));
    const auto b = csv::read_file(fed.output_dir / (name + ".csv"));
    equal += a == b;
    rows += std::count(a.begin(), a.end(), '\n') - 1;
  }
  collect_surface(run);
  return {code_two == 0 && code_fed == 0 && equal == run.names.size() && rows > 0,
          fmt::format("exit codes {}/{}, {}/{} station CSVs byte-identical, {} rows", code_two,
                      code_fed, equal, run.names.size(), rows)};
}

bool word_char(char c) { return c == '_' || std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// String values of a JSON document, skipping the base64 vector payloads.
// Keys and literals are fixed protocol vocabulary and carry no record data;
// a corrupted name can collide with them ("true").
void string_values(const json& j, std::string& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k != "bits") string_values(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) string_values(v, out);
  } else if (j.is_string()) {
    out += j.get<std::string>();
    out += '\n';
  }
}

std::string scannable(const std::string& text) {
  try {
    std::string out;
    string_values(json::parse(text), out);
    return lower(out);
  } catch (const json::exception&) {
    return lower(text);
  }
}

std::size_t count_hits(const std::string& text, const std::set<std::string>& needles,
                       std::string& example) {
  std::size_t hits = 0;
  for (const auto& needle : needles) {
    for (auto pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + 1)) {
      const bool left = pos == 0 || !word_char(text[pos - 1]);
      const auto end = pos + needle.size();
      const bool right = end == text.size() || !word_char(text[end]);
      if (left && right) {
        ++hits;
        if (std::getenv("PPRL_PRIVACY_VERBOSE")) {
          std::cerr << needle << " | " << text.substr(pos < 40 ? 0 : pos - 40, 100) << "\n";
        }
        if (example.empty()) example = needle;
      }
    }
  }
  return hits;
}

Outcome privacy_surface() {
  if (privacy_corpus.empty() || qid_values.empty()) return {false, "no traffic recorded"};
  std::set<std::string> needles;
  for (const auto& v : qid_values) {
    if (!v.empty()) needles.insert(lower(v));
  }
  // the scan must see a value planted in a document shaped like the traffic
  std::string ignored;
  const auto planted = json{{"matches", {{{"pseudonym", *qid_values.rbegin()}}}}};
  const bool control = count_hits(scannable(planted.dump()), needles, ignored) > 0;

  std::size_t hits = 0;
  std::size_t bytes = 0;
  std::string example;
  for (const auto& t : privacy_corpus) {
    const auto text = scannable(t);
    bytes += text.size();
    hits += count_hits(text, needles, example);
  }
  return {hits == 0 && control,
          fmt::format("{} quasi-identifier values, {} documents ({} bytes) scanned, {} hits{}, "
                      "planted value detected={}",
                      needles.size(), privacy_corpus.size(), bytes, hits,
                      example.empty() ? "" : " e.g. '" + example + "'", control)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--dump") {
    csv::write_file(argv[2], dump_vectors());
    return 0;
  }
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exact-duplicate linkage", exact_duplicates},
      {"corrupted-duplicate linkage", corrupted_duplicates},
      {"threshold sweep", threshold_sweep},
      {"broker oracle equivalence", broker_oracle},
      {"encoding invariants", [&] { return encoding_invariants(self); }},
      {"metrics reproduction", metrics_reproduction},
      {"mode equivalence", mode_equivalence},
      {"privacy surface", privacy_surface},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("{} [{}] {}: {} ({:.1f}s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                             criteria[i].first, o.detail, seconds_since(start))
              << std::flush;
  }
  std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
