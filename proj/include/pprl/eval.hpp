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

// Linkage-quality experiments: synthetic records drawn from frequency
// tables, typographic corruption, overlap-controlled splitting into station
// files, an in-process linkage pipeline and pair-level evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pprl/bit_vector.hpp"
#include "pprl/masking.hpp"
#include "pprl/rng.hpp"
#include "pprl/similarity.hpp"

namespace pprl::eval {

/// Contents of a bundled data file ("first_names.csv", "surnames.csv",
/// "cities.csv", "ocr.csv", "phonetic.csv", "keyboard_qwertz.csv").
std::string_view builtin_table(std::string_view name);

struct FrequencyTable {
  std::vector<std::string> values;
  std::vector<double> weights;

  /// CSV with header name,count. Throws on non-positive counts.
  static FrequencyTable parse(std::string_view csv_text);
  static FrequencyTable builtin(std::string_view name);
};

struct DatasetRecord {
  std::string pseudonym;
  std::string entity_id;
  std::map<std::string, std::string> attributes;

  PersonRecord person() const { return {pseudonym, attributes}; }
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct TruthEntry {
  std::string entity_id;
  int file = -1;  // 0-based station file, -1 if not assigned to one
};

/// pseudonym -> hidden identity (and station file, where known).
using GroundTruth = std::map<std::string, TruthEntry>;

GroundTruth truth_of(const std::vector<DatasetRecord>& records, int file = -1);

struct GeneratorConfig {
  std::size_t record_count = 1000;
  FrequencyTable first_names = FrequencyTable::builtin("first_names.csv");
  FrequencyTable surnames = FrequencyTable::builtin("surnames.csv");
  FrequencyTable cities = FrequencyTable::builtin("cities.csv");
  std::string birth_date_from = "1930-01-01";  // inclusive, ISO dates
  std::string birth_date_to = "2005-12-31";
  std::map<std::string, double> genders = {{"F", 0.5}, {"M", 0.5}};
  std::uint64_t seed = 42;

  /// Fields as in to_json(); table entries are file paths or "builtin".
  static GeneratorConfig from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// Records with unique entity ids, pseudonyms and QID tuples. Throws
/// std::invalid_argument when record_count exceeds the tuple capacity.
std::vector<DatasetRecord> generate(const GeneratorConfig& config);

enum class CorruptionOperator { kOcr, kPhonetic, kKeyboard, kEdit };

struct CorruptionConfig {
  // weight of applying n operators for n = 0, 1, 2, ...
  std::vector<double> error_count_weights = {0.0, 1.0, 1.0};
  double ocr_weight = 1.0;
  double phonetic_weight = 1.0;
  double keyboard_weight = 1.0;
  double edit_weight = 1.0;
  std::vector<std::string> attributes = {"first_name", "last_name", "city"};
  std::uint64_t seed = 7;

  void validate() const;
  static CorruptionConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Substitution rule tables used by the corruption operators.
struct CorruptionTables {
  std::vector<std::pair<std::u32string, std::u32string>> ocr;
  std::vector<std::pair<std::u32string, std::u32string>> phonetic;
  std::map<char32_t, std::u32string> keyboard;

  static const CorruptionTables& builtin();
};

/// Applies one operator to `value` at a random applicable position.
/// Operators that find no applicable position fall back to a random edit.
std::string apply_operator(CorruptionOperator op, std::string_view value,
                           DeterministicRng& rng,
                           const CorruptionTables& tables = CorruptionTables::builtin());

/// Corrupted copies with fresh pseudonyms and unchanged entity ids.
std::vector<DatasetRecord> corrupt(const std::vector<DatasetRecord>& records,
                                   const CorruptionConfig& config);

struct SplitResult {
  std::vector<std::vector<DatasetRecord>> files;
  GroundTruth truth;
};

/// `common_count` random records go into every file (fresh pseudonyms for
/// the extra copies); each remaining record goes to one uniformly chosen file.
SplitResult split(const std::vector<DatasetRecord>& records, std::size_t file_count,
                  std::size_t common_count, std::uint64_t seed);

/// Distributes the records of each entity over distinct files, so that
/// duplicates only ever meet across files. Throws if an entity has more
/// records than there are files.
SplitResult scatter(const std::vector<DatasetRecord>& records,
                    std::size_t file_count, std::uint64_t seed);

struct PredictedPair {
  std::string pseudonym_a;
  std::string pseudonym_b;
  double similarity = 1.0;
};

struct Evaluation {
  ConfusionMatrix counts;
  Metrics metrics;
  std::uint64_t true_pairs = 0;
};

/// Confusion matrix with TN = total - TP - FP - FN.
ConfusionMatrix complete_confusion(std::uint64_t tp, std::uint64_t fp,
                                   std::uint64_t fn, std::uint64_t total);

/// Number of unordered cross-file pseudonym pairs sharing an entity id.
std::uint64_t count_true_pairs(const GroundTruth& truth);

/// Pair-level confusion matrix. Duplicate and reversed predictions count
/// once. Throws std::invalid_argument on unknown pseudonyms.
Evaluation evaluate(const std::vector<PredictedPair>& predicted,
                    const GroundTruth& truth, std::uint64_t total_comparisons);

struct EncodedFile {
  std::vector<std::string> pseudonyms;
  std::vector<BitVector> vectors;
};

std::vector<EncodedFile> encode_files(
    const std::vector<std::vector<DatasetRecord>>& files,
    const EncodingScheme& scheme);

std::uint64_t total_comparisons(const std::vector<EncodedFile>& files);

/// Cross-file pairs with similarity >= threshold (the in-process
/// counterpart of the broker).
std::vector<PredictedPair> link(const std::vector<EncodedFile>& files,
                                double threshold);

/// Similarity of every cross-file pair, labelled against the truth.
std::vector<ScoredPair> score_all_pairs(const std::vector<EncodedFile>& files,
                                        const GroundTruth& truth);

struct SweepReport {
  std::vector<SweepRow> rows;
  SweepRow best;
};

/// Sweep over 0.00..1.00 in steps of 0.01 on precomputed similarities.
SweepReport sweep_experiment(const std::vector<ScoredPair>& scored,
                             std::uint64_t true_pairs);

/// Entropy weights estimated from `sample_size` generated records.
std::map<std::string, double> sample_weights(std::size_t sample_size = 1000,
                                             std::uint64_t seed = 1);

/// Scheme over default_attributes() with weights from sample_weights().
EncodingScheme default_scheme(const SchemeSecrets& secrets);

// Dataset files: CSV pseudonym,entity_id,first_name,last_name,gender,
// birth_date,city. A dataset directory holds file_1.csv .. file_n.csv and
// truth.csv (pseudonym,entity_id,file).
const std::vector<std::string>& dataset_header();
std::string format_dataset(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> parse_dataset(std::string_view text);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

void write_dataset_dir(const std::filesystem::path& dir, const SplitResult& split);
SplitResult read_dataset_dir(const std::filesystem::path& dir);

std::string format_truth(const GroundTruth& truth);
GroundTruth parse_truth(std::string_view text);

/// Predictions CSV: pseudonym_a,pseudonym_b,similarity.
std::string format_predictions(const std::vector<PredictedPair>& pairs);
std::vector<PredictedPair> parse_predictions(std::string_view text);

/// Re-joins per-station link files (pseudonym,peer_client,similarity,
/// match_id) into pairs: the two rows sharing a match_id form one pair.
/// Throws std::invalid_argument when a match_id is not seen exactly twice.
std::vector<PredictedPair> join_links(const std::vector<std::string>& link_csvs);
/// join_links over every *.links.csv in `dir`.
std::vector<PredictedPair> read_report_pairs(const std::filesystem::path& dir);

/// Resolver stub format (entity_id stripped).
std::string format_mpi_store(const std::vector<DatasetRecord>& records);

}  // namespace pprl::eval
