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

#include "pprl/eval.hpp"

#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "pprl/csv.hpp"
#include "pprl/matcher.hpp"

namespace pprl::eval {

namespace {

// ---------------------------------------------------------------- text

std::u32string to_u32(std::string_view utf8) {
  const auto u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  std::u32string out;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    out.push_back(static_cast<char32_t>(u.char32At(i)));
  }
  return out;
}

std::string to_utf8(const std::u32string& text) {
  const auto u = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(text.data()),
      static_cast<int32_t>(text.size()));
  std::string out;
  u.toUTF8String(out);
  return out;
}

char32_t lower(char32_t c) { return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))); }
char32_t upper(char32_t c) { return static_cast<char32_t>(u_toupper(static_cast<UChar32>(c))); }
bool is_upper(char32_t c) { return u_isupper(static_cast<UChar32>(c)) != 0; }

std::vector<std::pair<std::u32string, std::u32string>> parse_rules(
    std::string_view text) {
  std::vector<std::pair<std::u32string, std::u32string>> rules;
  for (const auto& row : csv::parse_with_header(text, {"from", "to"})) {
    if (row.fields[0].empty()) throw csv::ParseError(row.line, "empty rule");
    rules.emplace_back(to_u32(row.fields[0]), to_u32(row.fields[1]));
  }
  return rules;
}

// ---------------------------------------------------------------- dates

// days since 1970-01-01 of a proleptic Gregorian date
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::string civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
  return fmt::format("{:04d}-{:02d}-{:02d}", y, m, d);
}

std::int64_t parse_iso_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char dash1 = 0;
  char dash2 = 0;
  if (text.size() != 10 ||
      std::sscanf(text.c_str(), "%4d%c%2u%c%2u", &y, &dash1, &m, &dash2, &d) != 5 ||
      dash1 != '-' || dash2 != '-' || m < 1 || m > 12 || d < 1 || d > 31) {
    throw std::invalid_argument("invalid ISO date '" + text + "'");
  }
  const auto days = days_from_civil(y, m, d);
  if (civil_from_days(days) != text) {
    throw std::invalid_argument("invalid calendar date '" + text + "'");
  }
  return days;
}

// ---------------------------------------------------------------- ids

class PseudonymSource {
 public:
  explicit PseudonymSource(DeterministicRng& rng) : rng_(rng) {}
  void reserve(const std::string& existing) { used_.insert(existing); }
  std::string next() {
    for (;;) {
      auto p = fmt::format("PSN-{:016x}", rng_.next());
      if (used_.insert(p).second) return p;
    }
  }

 private:
  DeterministicRng& rng_;
  std::unordered_set<std::string> used_;
};

FrequencyTable table_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir,
                               const std::string& builtin_name) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "builtin") return FrequencyTable::builtin(builtin_name);
    auto path = std::filesystem::path(name);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return FrequencyTable::parse(csv::read_file(path));
  }
  if (j.is_object()) {
    FrequencyTable t;
    for (const auto& [value, weight] : j.items()) {
      t.values.push_back(value);
      t.weights.push_back(weight.get<double>());
      if (!(t.weights.back() > 0.0)) {
        throw std::invalid_argument("frequencies must be positive");
      }
    }
    if (t.values.empty()) throw std::invalid_argument("empty frequency table");
    return t;
  }
  throw std::invalid_argument("frequency table must be a path, \"builtin\" or an object");
}

nlohmann::json table_to_json(const FrequencyTable& t) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < t.values.size(); ++i) out[t.values[i]] = t.weights[i];
  return out;
}

}  // namespace

// ---------------------------------------------------------------- tables

FrequencyTable FrequencyTable::parse(std::string_view csv_text) {
  FrequencyTable t;
  std::set<std::string> seen;
  for (const auto& row : csv::parse_with_header(csv_text, {"name", "count"})) {
    double count = 0.0;
    try {
      count = std::stod(row.fields[1]);
    } catch (const std::exception&) {
      throw csv::ParseError(row.line, "count is not a number");
    }
    if (!(count > 0.0)) throw csv::ParseError(row.line, "count must be positive");
    if (row.fields[0].empty() || !seen.insert(row.fields[0]).second) {
      throw csv::ParseError(row.line, "empty or duplicate value");
    }
    t.values.push_back(row.fields[0]);
    t.weights.push_back(count);
  }
  if (t.values.empty()) throw std::invalid_argument("empty frequency table");
  return t;
}

FrequencyTable FrequencyTable::builtin(std::string_view name) {
  return parse(builtin_table(name));
}

const CorruptionTables& CorruptionTables::builtin() {
  static const CorruptionTables tables = [] {
    CorruptionTables t;
    t.ocr = parse_rules(builtin_table("ocr.csv"));
    t.phonetic = parse_rules(builtin_table("phonetic.csv"));
    for (const auto& row :
         csv::parse_with_header(builtin_table("keyboard_qwertz.csv"), {"key", "neighbors"})) {
      const auto key = to_u32(row.fields[0]);
      if (key.size() != 1) throw csv::ParseError(row.line, "key must be one character");
      t.keyboard[key[0]] = to_u32(row.fields[1]);
    }
    return t;
  }();
  return tables;
}

GroundTruth truth_of(const std::vector<DatasetRecord>& records, int file) {
  GroundTruth truth;
  for (const auto& r : records) truth[r.pseudonym] = {r.entity_id, file};
  return truth;
}

// ---------------------------------------------------------------- generate

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j,
                                           const std::filesystem::path& base_dir) {
  GeneratorConfig c;
  if (j.contains("record_count")) c.record_count = j.at("record_count").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("first_names")) {
    c.first_names = table_from_json(j.at("first_names"), base_dir, "first_names.csv");
  }
  if (j.contains("surnames")) {
    c.surnames = table_from_json(j.at("surnames"), base_dir, "surnames.csv");
  }
  if (j.contains("cities")) c.cities = table_from_json(j.at("cities"), base_dir, "cities.csv");
  if (j.contains("birth_date_range")) {
    const auto& range = j.at("birth_date_range");
    c.birth_date_from = range.at(0).get<std::string>();
    c.birth_date_to = range.at(1).get<std::string>();
  }
  if (j.contains("genders")) {
    c.genders = j.at("genders").get<std::map<std::string, double>>();
  }
  return c;
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"record_count", record_count},
          {"seed", seed},
          {"first_names", table_to_json(first_names)},
          {"surnames", table_to_json(surnames)},
          {"cities", table_to_json(cities)},
          {"birth_date_range", {birth_date_from, birth_date_to}},
          {"genders", genders}};
}

std::vector<DatasetRecord> generate(const GeneratorConfig& config) {
  const auto first_day = parse_iso_date(config.birth_date_from);
  const auto last_day = parse_iso_date(config.birth_date_to);
  if (last_day < first_day) throw std::invalid_argument("empty birth date range");

  std::vector<std::string> gender_values;
  std::vector<double> gender_weights;
  for (const auto& [g, w] : config.genders) {
    if (!(w >= 0.0)) throw std::invalid_argument("gender weights must be non-negative");
    if (w > 0.0) {
      gender_values.push_back(g);
      gender_weights.push_back(w);
    }
  }
  if (gender_values.empty()) throw std::invalid_argument("no gender has positive weight");
  for (const auto* t : {&config.first_names, &config.surnames, &config.cities}) {
    if (t->values.empty() || t->values.size() != t->weights.size()) {
      throw std::invalid_argument("malformed frequency table");
    }
    for (double w : t->weights) {
      if (!(w > 0.0)) throw std::invalid_argument("frequencies must be positive");
    }
  }

  const long double capacity =
      static_cast<long double>(config.first_names.values.size()) *
      static_cast<long double>(config.surnames.values.size()) *
      static_cast<long double>(config.cities.values.size()) *
      static_cast<long double>(gender_values.size()) *
      static_cast<long double>(last_day - first_day + 1);
  if (static_cast<long double>(config.record_count) > capacity) {
    throw std::invalid_argument(fmt::format(
        "record_count {} exceeds the {} distinct QID tuples the tables allow",
        config.record_count, static_cast<double>(capacity)));
  }

  DeterministicRng rng(config.seed);
  PseudonymSource pseudonyms(rng);
  const auto span = static_cast<std::uint64_t>(last_day - first_day + 1);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::int64_t>> used;
  std::vector<DatasetRecord> out;
  out.reserve(config.record_count);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * config.record_count + 10000;
  while (out.size() < config.record_count) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("could not draw enough distinct QID tuples");
    }
    const auto f = rng.weighted(config.first_names.weights);
    const auto s = rng.weighted(config.surnames.weights);
    const auto c = rng.weighted(config.cities.weights);
    const auto g = rng.weighted(gender_weights);
    const auto day = first_day + static_cast<std::int64_t>(rng.below(span));
    if (!used.emplace(f, s, c, g, day).second) continue;

    DatasetRecord r;
    r.entity_id = fmt::format("E{:06d}", out.size() + 1);
    r.pseudonym = pseudonyms.next();
    r.attributes = {{"first_name", config.first_names.values[f]},
                    {"last_name", config.surnames.values[s]},
                    {"gender", gender_values[g]},
                    {"birth_date", civil_from_days(day)},
                    {"city", config.cities.values[c]}};
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- corrupt

void CorruptionConfig::validate() const {
  bool any_count = false;
  for (double w : error_count_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("error count weights must be non-negative");
    any_count = any_count || w > 0.0;
  }
  if (!any_count) throw std::invalid_argument("error count distribution is empty");
  const double ops[] = {ocr_weight, phonetic_weight, keyboard_weight, edit_weight};
  bool any_op = false;
  for (double w : ops) {
    if (!(w >= 0.0)) throw std::invalid_argument("operator weights must be non-negative");
    any_op = any_op || w > 0.0;
  }
  if (!any_op) throw std::invalid_argument("at least one operator weight must be positive");
  if (attributes.empty()) throw std::invalid_argument("no attributes to corrupt");
}

CorruptionConfig CorruptionConfig::from_json(const nlohmann::json& j) {
  CorruptionConfig c;
  if (j.contains("error_count_weights")) {
    c.error_count_weights = j.at("error_count_weights").get<std::vector<double>>();
  }
  if (j.contains("operator_weights")) {
    const auto& w = j.at("operator_weights");
    c.ocr_weight = w.value("ocr", 0.0);
    c.phonetic_weight = w.value("phonetic", 0.0);
    c.keyboard_weight = w.value("keyboard", 0.0);
    c.edit_weight = w.value("edit", 0.0);
  }
  if (j.contains("attributes")) c.attributes = j.at("attributes").get<std::vector<std::string>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json CorruptionConfig::to_json() const {
  return {{"error_count_weights", error_count_weights},
          {"operator_weights",
           {{"ocr", ocr_weight},
            {"phonetic", phonetic_weight},
            {"keyboard", keyboard_weight},
            {"edit", edit_weight}}},
          {"attributes", attributes},
          {"seed", seed}};
}

namespace {

constexpr std::u32string_view kAlphabet = U"abcdefghijklmnopqrstuvwxyz";

char32_t random_letter(DeterministicRng& rng) {
  return kAlphabet[rng.below(kAlphabet.size())];
}

std::u32string match_case(std::u32string replacement, char32_t original) {
  if (!replacement.empty() && is_upper(original)) replacement[0] = upper(replacement[0]);
  return replacement;
}

bool random_edit(std::u32string& s, DeterministicRng& rng) {
  enum { kInsert, kDelete, kSubstitute, kTranspose };
  std::vector<int> options = {kInsert, kSubstitute};
  if (s.size() >= 2) {
    options.push_back(kDelete);
    options.push_back(kTranspose);
  }
  if (s.empty()) options = {kInsert};
  switch (options[rng.below(options.size())]) {
    case kInsert: {
      const auto pos = rng.below(s.size() + 1);
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), random_letter(rng));
      return true;
    }
    case kDelete: {
      s.erase(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size())));
      return true;
    }
    case kSubstitute: {
      const auto pos = rng.below(s.size());
      char32_t c = random_letter(rng);
      while (c == lower(s[pos])) c = random_letter(rng);
      s[pos] = match_case(std::u32string(1, c), s[pos])[0];
      return true;
    }
    default: {
      const auto pos = rng.below(s.size() - 1);
      if (s[pos] == s[pos + 1]) return false;
      std::swap(s[pos], s[pos + 1]);
      return true;
    }
  }
}

bool apply_rules(std::u32string& s,
                 const std::vector<std::pair<std::u32string, std::u32string>>& rules,
                 DeterministicRng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> sites;  // (position, rule)
  for (std::size_t pos = 0; pos < s.size(); ++pos) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      const auto& from = rules[r].first;
      if (pos + from.size() > s.size()) continue;
      bool hit = true;
      for (std::size_t k = 0; k < from.size() && hit; ++k) {
        hit = lower(s[pos + k]) == from[k];
      }
      if (hit) sites.emplace_back(pos, r);
    }
  }
  if (sites.empty()) return false;
  const auto [pos, r] = sites[rng.below(sites.size())];
  const auto replacement = match_case(rules[r].second, s[pos]);
  s.replace(pos, rules[r].first.size(), replacement);
  return true;
}

bool keyboard_slip(std::u32string& s, const std::map<char32_t, std::u32string>& keyboard,
                   DeterministicRng& rng) {
  std::vector<std::size_t> sites;
  for (std::size_t pos = 0; pos < s.size(); ++pos) {
    auto it = keyboard.find(lower(s[pos]));
    if (it != keyboard.end() && !it->second.empty()) sites.push_back(pos);
  }
  if (sites.empty()) return false;
  const auto pos = sites[rng.below(sites.size())];
  const auto& neighbors = keyboard.at(lower(s[pos]));
  const char32_t replacement = neighbors[rng.below(neighbors.size())];
  s[pos] = match_case(std::u32string(1, replacement), s[pos])[0];
  return true;
}

}  // namespace

std::string apply_operator(CorruptionOperator op, std::string_view value,
                           DeterministicRng& rng, const CorruptionTables& tables) {
  auto s = to_u32(value);
  const auto original = s;
  bool applied = false;
  switch (op) {
    case CorruptionOperator::kOcr:
      applied = apply_rules(s, tables.ocr, rng);
      break;
    case CorruptionOperator::kPhonetic:
      applied = apply_rules(s, tables.phonetic, rng);
      break;
    case CorruptionOperator::kKeyboard:
      applied = keyboard_slip(s, tables.keyboard, rng);
      break;
    case CorruptionOperator::kEdit:
      applied = random_edit(s, rng);
      break;
  }
  // fall back to a plain edit so that every application changes the value
  for (int tries = 0; (!applied || s == original) && tries < 16; ++tries) {
    s = original;
    applied = random_edit(s, rng);
  }
  return to_utf8(s);
}

std::vector<DatasetRecord> corrupt(const std::vector<DatasetRecord>& records,
                                   const CorruptionConfig& config) {
  config.validate();
  const auto& tables = CorruptionTables::builtin();
  DeterministicRng rng(config.seed);
  PseudonymSource pseudonyms(rng);
  for (const auto& r : records) pseudonyms.reserve(r.pseudonym);
  const std::vector<double> op_weights = {config.ocr_weight, config.phonetic_weight,
                                          config.keyboard_weight, config.edit_weight};
  constexpr CorruptionOperator kOps[] = {CorruptionOperator::kOcr,
                                         CorruptionOperator::kPhonetic,
                                         CorruptionOperator::kKeyboard,
                                         CorruptionOperator::kEdit};

  std::vector<DatasetRecord> out;
  out.reserve(records.size());
  for (const auto& source : records) {
    DatasetRecord copy = source;
    copy.pseudonym = pseudonyms.next();
    const auto errors = rng.weighted(config.error_count_weights);
    for (std::size_t e = 0; e < errors; ++e) {
      std::vector<std::string> candidates;
      for (const auto& name : config.attributes) {
        auto it = copy.attributes.find(name);
        if (it != copy.attributes.end() && !it->second.empty()) candidates.push_back(name);
      }
      if (candidates.empty()) break;
      const auto& name = candidates[rng.below(candidates.size())];
      const auto op = kOps[rng.weighted(op_weights)];
      copy.attributes[name] = apply_operator(op, copy.attributes[name], rng, tables);
    }
    out.push_back(std::move(copy));
  }
  return out;
}

// ---------------------------------------------------------------- split

SplitResult split(const std::vector<DatasetRecord>& records, std::size_t file_count,
                  std::size_t common_count, std::uint64_t seed) {
  if (file_count == 0) throw std::invalid_argument("file count must be at least 1");
  if (common_count > records.size()) {
    throw std::invalid_argument("common count exceeds the record count");
  }
  DeterministicRng rng(seed);
  PseudonymSource pseudonyms(rng);
  for (const auto& r : records) pseudonyms.reserve(r.pseudonym);

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  SplitResult result;
  result.files.resize(file_count);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& record = records[order[k]];
    if (k < common_count) {
      for (std::size_t f = 0; f < file_count; ++f) {
        DatasetRecord copy = record;
        if (f > 0) copy.pseudonym = pseudonyms.next();
        result.files[f].push_back(std::move(copy));
      }
    } else {
      result.files[rng.below(file_count)].push_back(record);
    }
  }
  for (std::size_t f = 0; f < file_count; ++f) {
    rng.shuffle(result.files[f]);
    for (const auto& r : result.files[f]) {
      result.truth[r.pseudonym] = {r.entity_id, static_cast<int>(f)};
    }
  }
  return result;
}

SplitResult scatter(const std::vector<DatasetRecord>& records, std::size_t file_count,
                    std::uint64_t seed) {
  if (file_count == 0) throw std::invalid_argument("file count must be at least 1");
  std::vector<std::string> entity_order;
  std::unordered_map<std::string, std::vector<const DatasetRecord*>> groups;
  std::unordered_set<std::string> seen_pseudonyms;
  for (const auto& r : records) {
    if (!seen_pseudonyms.insert(r.pseudonym).second) {
      throw std::invalid_argument("duplicate pseudonym " + r.pseudonym);
    }
    auto& group = groups[r.entity_id];
    if (group.empty()) entity_order.push_back(r.entity_id);
    group.push_back(&r);
  }
  DeterministicRng rng(seed);
  SplitResult result;
  result.files.resize(file_count);
  std::vector<std::size_t> slots(file_count);
  for (const auto& entity : entity_order) {
    const auto& group = groups[entity];
    if (group.size() > file_count) {
      throw std::invalid_argument("entity " + entity + " has more records than files");
    }
    for (std::size_t f = 0; f < file_count; ++f) slots[f] = f;
    rng.shuffle(slots);
    for (std::size_t i = 0; i < group.size(); ++i) result.files[slots[i]].push_back(*group[i]);
  }
  for (std::size_t f = 0; f < file_count; ++f) {
    rng.shuffle(result.files[f]);
    for (const auto& r : result.files[f]) {
      result.truth[r.pseudonym] = {r.entity_id, static_cast<int>(f)};
    }
  }
  return result;
}

// ---------------------------------------------------------------- evaluate

ConfusionMatrix complete_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                   std::uint64_t total) {
  if (tp + fp + fn > total) {
    throw std::invalid_argument("total comparisons smaller than TP + FP + FN");
  }
  return {tp, fp, fn, total - tp - fp - fn};
}

std::uint64_t count_true_pairs(const GroundTruth& truth) {
  std::unordered_map<std::string, std::map<int, std::uint64_t>> by_entity;
  for (const auto& [pseudonym, entry] : truth) ++by_entity[entry.entity_id][entry.file];
  std::uint64_t pairs = 0;
  for (const auto& [entity, per_file] : by_entity) {
    std::uint64_t n = 0;
    std::uint64_t same_file = 0;
    for (const auto& [file, count] : per_file) {
      n += count;
      // records without a file assignment are treated as all cross-file
      if (file >= 0) same_file += count * (count - 1) / 2;
    }
    pairs += n * (n - 1) / 2 - same_file;
  }
  return pairs;
}

Evaluation evaluate(const std::vector<PredictedPair>& predicted, const GroundTruth& truth,
                    std::uint64_t total_comparisons) {
  std::set<std::pair<std::string, std::string>> unique;
  for (const auto& p : predicted) {
    for (const auto* name : {&p.pseudonym_a, &p.pseudonym_b}) {
      if (!truth.contains(*name)) {
        throw std::invalid_argument("unknown pseudonym in predictions: " + *name);
      }
    }
    if (p.pseudonym_a == p.pseudonym_b) {
      throw std::invalid_argument("prediction pairs a record with itself");
    }
    unique.insert(std::minmax(p.pseudonym_a, p.pseudonym_b));
  }
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (const auto& [a, b] : unique) {
    if (truth.at(a).entity_id == truth.at(b).entity_id) {
      ++tp;
    } else {
      ++fp;
    }
  }
  Evaluation out;
  out.true_pairs = count_true_pairs(truth);
  if (tp > out.true_pairs) throw std::invalid_argument("more true positives than true pairs");
  out.counts = complete_confusion(tp, fp, out.true_pairs - tp, total_comparisons);
  out.metrics = metrics(out.counts);
  return out;
}

// ---------------------------------------------------------------- pipeline

std::vector<EncodedFile> encode_files(const std::vector<std::vector<DatasetRecord>>& files,
                                      const EncodingScheme& scheme) {
  const RecordEncoder encoder(scheme);
  std::vector<EncodedFile> out;
  for (const auto& file : files) {
    EncodedFile encoded;
    for (const auto& r : file) {
      encoded.pseudonyms.push_back(r.pseudonym);
      encoded.vectors.push_back(encoder.encode(r.person()));
    }
    out.push_back(std::move(encoded));
  }
  return out;
}

std::uint64_t total_comparisons(const std::vector<EncodedFile>& files) {
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < files.size(); ++a) {
    for (std::size_t b = a + 1; b < files.size(); ++b) {
      total += files[a].vectors.size() * files[b].vectors.size();
    }
  }
  return total;
}

std::vector<PredictedPair> link(const std::vector<EncodedFile>& files, double threshold) {
  std::vector<PredictedPair> out;
  for (std::size_t a = 0; a < files.size(); ++a) {
    for (std::size_t b = a + 1; b < files.size(); ++b) {
      MatchTask task{"in-process", std::to_string(a), std::to_string(b),
                     files[a].vectors, files[b].vectors, threshold};
      for (const auto& pair : match_pairwise(task)) {
        out.push_back({files[a].pseudonyms[pair.left.index],
                       files[b].pseudonyms[pair.right.index], pair.similarity});
      }
    }
  }
  return out;
}

std::vector<ScoredPair> score_all_pairs(const std::vector<EncodedFile>& files,
                                        const GroundTruth& truth) {
  std::vector<ScoredPair> out;
  out.reserve(total_comparisons(files));
  for (std::size_t a = 0; a < files.size(); ++a) {
    std::vector<const std::string*> entity_a;
    for (const auto& p : files[a].pseudonyms) entity_a.push_back(&truth.at(p).entity_id);
    for (std::size_t b = a + 1; b < files.size(); ++b) {
      std::vector<const std::string*> entity_b;
      for (const auto& p : files[b].pseudonyms) entity_b.push_back(&truth.at(p).entity_id);
      for_each_similarity(files[a].vectors, files[b].vectors,
                          [&](std::size_t i, std::size_t j, double s) {
                            out.push_back({s, *entity_a[i] == *entity_b[j]});
                          });
    }
  }
  return out;
}

SweepReport sweep_experiment(const std::vector<ScoredPair>& scored, std::uint64_t true_pairs) {
  std::uint64_t listed_true = 0;
  for (const auto& s : scored) listed_true += s.is_true_match ? 1 : 0;
  if (listed_true > true_pairs) throw std::invalid_argument("more labelled matches than true pairs");
  const auto thresholds = percent_thresholds();
  SweepReport report;
  report.rows = sweep(scored, thresholds, true_pairs - listed_true);
  report.best = best_f1(report.rows);
  return report;
}

std::map<std::string, double> sample_weights(std::size_t sample_size, std::uint64_t seed) {
  GeneratorConfig config;
  config.record_count = sample_size;
  config.seed = seed;
  std::map<std::string, std::vector<std::string>> samples;
  for (const auto& r : generate(config)) {
    for (const auto& [name, value] : r.attributes) samples[name].push_back(value);
  }
  return estimate_weights(samples, 2);
}

EncodingScheme default_scheme(const SchemeSecrets& secrets) {
  return build_scheme(default_attributes(), sample_weights(), secrets);
}

// ---------------------------------------------------------------- files

const std::vector<std::string>& dataset_header() {
  static const std::vector<std::string> columns = {
      "pseudonym", "entity_id", "first_name", "last_name", "gender", "birth_date", "city"};
  return columns;
}

std::string format_dataset(const std::vector<DatasetRecord>& records) {
  const auto& columns = dataset_header();
  std::string out = csv::format_row(columns);
  for (const auto& r : records) {
    std::vector<std::string> fields = {r.pseudonym, r.entity_id};
    for (std::size_t i = 2; i < columns.size(); ++i) {
      auto it = r.attributes.find(columns[i]);
      fields.push_back(it == r.attributes.end() ? "" : it->second);
    }
    out += csv::format_row(fields);
  }
  return out;
}

std::vector<DatasetRecord> parse_dataset(std::string_view text) {
  const auto& columns = dataset_header();
  std::vector<DatasetRecord> out;
  for (auto& row : csv::parse_with_header(text, columns)) {
    DatasetRecord r;
    r.pseudonym = std::move(row.fields[0]);
    r.entity_id = std::move(row.fields[1]);
    if (r.pseudonym.empty() || r.entity_id.empty()) {
      throw csv::ParseError(row.line, "pseudonym and entity_id must be non-empty");
    }
    for (std::size_t i = 2; i < columns.size(); ++i) {
      r.attributes.emplace(columns[i], std::move(row.fields[i]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  return parse_dataset(csv::read_file(path));
}

std::string format_truth(const GroundTruth& truth) {
  std::string out = csv::format_row({"pseudonym", "entity_id", "file"});
  for (const auto& [pseudonym, e] : truth) {
    out += csv::format_row({pseudonym, e.entity_id, e.file < 0 ? "" : std::to_string(e.file + 1)});
  }
  return out;
}

GroundTruth parse_truth(std::string_view text) {
  GroundTruth truth;
  for (const auto& row : csv::parse_with_header(text, {"pseudonym", "entity_id", "file"})) {
    int file = -1;
    if (!row.fields[2].empty()) {
      try {
        file = std::stoi(row.fields[2]) - 1;
      } catch (const std::exception&) {
        throw csv::ParseError(row.line, "file must be an integer");
      }
    }
    if (!truth.emplace(row.fields[0], TruthEntry{row.fields[1], file}).second) {
      throw csv::ParseError(row.line, "duplicate pseudonym");
    }
  }
  return truth;
}

void write_dataset_dir(const std::filesystem::path& dir, const SplitResult& split) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < split.files.size(); ++f) {
    csv::write_file(dir / fmt::format("file_{}.csv", f + 1), format_dataset(split.files[f]));
  }
  csv::write_file(dir / "truth.csv", format_truth(split.truth));
}

SplitResult read_dataset_dir(const std::filesystem::path& dir) {
  SplitResult out;
  for (std::size_t f = 1;; ++f) {
    const auto path = dir / fmt::format("file_{}.csv", f);
    if (!std::filesystem::exists(path)) break;
    out.files.push_back(read_dataset(path));
  }
  if (out.files.empty()) throw std::runtime_error("no file_1.csv in " + dir.string());
  out.truth = parse_truth(csv::read_file(dir / "truth.csv"));
  return out;
}

std::string format_predictions(const std::vector<PredictedPair>& pairs) {
  std::string out = csv::format_row({"pseudonym_a", "pseudonym_b", "similarity"});
  for (const auto& p : pairs) {
    out += csv::format_row({p.pseudonym_a, p.pseudonym_b, fmt::format("{:.6f}", p.similarity)});
  }
  return out;
}

std::vector<PredictedPair> parse_predictions(std::string_view text) {
  std::vector<PredictedPair> out;
  for (const auto& row :
       csv::parse_with_header(text, {"pseudonym_a", "pseudonym_b", "similarity"})) {
    PredictedPair p{row.fields[0], row.fields[1], 0.0};
    try {
      p.similarity = std::stod(row.fields[2]);
    } catch (const std::exception&) {
      throw csv::ParseError(row.line, "similarity is not a number");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredictedPair> join_links(const std::vector<std::string>& link_csvs) {
  struct Half {
    std::string pseudonym;
    double similarity;
  };
  std::map<std::string, std::vector<Half>> by_match;
  for (const auto& text : link_csvs) {
    for (const auto& row : csv::parse_with_header(
             text, {"pseudonym", "peer_client", "similarity", "match_id"})) {
      by_match[row.fields[3]].push_back({row.fields[0], std::stod(row.fields[2])});
    }
  }
  std::vector<PredictedPair> out;
  for (const auto& [id, halves] : by_match) {
    if (halves.size() != 2) {
      throw std::invalid_argument(
          fmt::format("match {} appears {} times in the link files", id, halves.size()));
    }
    const auto [a, b] = std::minmax(halves[0].pseudonym, halves[1].pseudonym);
    out.push_back({a, b, halves[0].similarity});
  }
  std::sort(out.begin(), out.end(), [](const PredictedPair& x, const PredictedPair& y) {
    return std::tie(x.pseudonym_a, x.pseudonym_b) < std::tie(y.pseudonym_a, y.pseudonym_b);
  });
  return out;
}

std::vector<PredictedPair> read_report_pairs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with(".links.csv")) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<std::string> texts;
  for (const auto& p : paths) texts.push_back(csv::read_file(p));
  return join_links(texts);
}

std::string format_mpi_store(const std::vector<DatasetRecord>& records) {
  static const std::vector<std::string> columns = {
      "pseudonym", "first_name", "last_name", "gender", "birth_date", "city"};
  std::string out = csv::format_row(columns);
  for (const auto& r : records) {
    std::vector<std::string> fields = {r.pseudonym};
    for (std::size_t i = 1; i < columns.size(); ++i) {
      auto it = r.attributes.find(columns[i]);
      fields.push_back(it == r.attributes.end() ? "" : it->second);
    }
    out += csv::format_row(fields);
  }
  return out;
}

}  // namespace pprl::eval
