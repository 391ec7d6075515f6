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


#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <map>

#include "cli_common.hpp"
#include "pprl/crypto.hpp"
#include "pprl/csv.hpp"
#include "pprl/eval.hpp"
#include "pprl/protocol.hpp"

namespace {

namespace fs = std::filesystem;
namespace ev = pprl::eval;
using nlohmann::json;

json read_json(const std::string& path) { return json::parse(pprl::csv::read_file(path)); }

std::vector<ev::DatasetRecord> read_inputs(const std::vector<std::string>& paths) {
  std::vector<ev::DatasetRecord> all;
  for (const auto& p : paths) {
    auto records = ev::read_dataset(p);
    all.insert(all.end(), records.begin(), records.end());
  }
  return all;
}

void print_split(const ev::SplitResult& result, const fs::path& out) {
  for (std::size_t f = 0; f < result.files.size(); ++f) {
    std::cout << fmt::format("file_{}.csv: {} records\n", f + 1, result.files[f].size());
  }
  std::cout << "wrote " << out.string() << "\n";
}

pprl::EncodingScheme load_or_make_scheme(const std::string& path) {
  if (!path.empty()) {
    return pprl::protocol::deserialize<pprl::EncodingScheme>(pprl::csv::read_file(path));
  }
  pprl::SchemeSecrets secrets;
  secrets.hash_secret = pprl::crypto::random_bytes(32);
  secrets.study_secret = pprl::crypto::random_bytes(32);
  secrets.permutation_seed = pprl::crypto::random_bytes(32);
  return ev::default_scheme(secrets);
}

std::uint64_t comparisons_from_truth(const ev::GroundTruth& truth) {
  std::map<int, std::uint64_t> sizes;
  for (const auto& [p, e] : truth) {
    if (e.file < 0) throw std::invalid_argument("truth has no file column; pass --total");
    ++sizes[e.file];
  }
  std::uint64_t total = 0;
  std::uint64_t seen = 0;
  for (const auto& [f, n] : sizes) {
    total += seen * n;
    seen += n;
  }
  return total;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data, corruption, splitting and linkage-quality evaluation"};
  app.require_subcommand(1);

  std::string config_path, out, pred, truth_path, dataset, scheme_path, reports;
  std::vector<std::string> inputs;
  std::size_t files = 3, common = 100;
  std::uint64_t seed = 11;
  std::optional<std::uint64_t> total;
  std::optional<std::size_t> records_override;
  std::optional<std::uint64_t> seed_override;

  auto* gen = app.add_subcommand("gen", "Generate records (records.csv + truth.csv)");
  gen->add_option("--config", config_path, "Generator config JSON");
  gen->add_option("--records", records_override, "Override record_count");
  gen->add_option("--seed", seed_override, "Override the seed");
  gen->add_option("--out", out, "Output directory")->required();

  auto* corrupt = app.add_subcommand("corrupt", "Write a corrupted copy of a dataset");
  corrupt->add_option("--in", inputs, "Dataset CSV")->required()->expected(1);
  corrupt->add_option("--config", config_path, "Corruption config JSON");
  corrupt->add_option("--seed", seed_override, "Override the seed");
  corrupt->add_option("--out", out, "Output CSV")->required();

  auto* split = app.add_subcommand("split", "Split records into station files with overlap");
  split->add_option("--in", inputs, "Dataset CSV (repeatable)")->required();
  split->add_option("--files", files, "Number of files")->check(CLI::PositiveNumber);
  split->add_option("--common", common, "Records copied into every file");
  split->add_option("--seed", seed, "Random seed");
  split->add_option("--out", out, "Output directory")->required();

  auto* scatter = app.add_subcommand(
      "scatter", "Spread each entity's records over distinct station files");
  scatter->add_option("--in", inputs, "Dataset CSV (repeatable)")->required();
  scatter->add_option("--files", files, "Number of files")->check(CLI::PositiveNumber);
  scatter->add_option("--seed", seed, "Random seed");
  scatter->add_option("--out", out, "Output directory")->required();

  auto* export_mpi = app.add_subcommand("export-mpi", "Write a resolver index (no entity ids)");
  export_mpi->add_option("--in", inputs, "Dataset CSV")->required()->expected(1);
  export_mpi->add_option("--out", out, "Index CSV")->required();
  std::string pseudonyms_out;
  export_mpi->add_option("--pseudonyms", pseudonyms_out, "Also write the pseudonym list here");

  auto* scheme = app.add_subcommand("scheme", "Create an encoding scheme with fresh secrets");
  scheme->add_option("--out", out, "Scheme JSON")->required();

  auto* evaluate = app.add_subcommand("eval", "Score predicted pairs against the truth");
  evaluate->add_option("--pred", pred, "Predictions CSV (pseudonym_a,pseudonym_b,similarity)")
      ->required();
  evaluate->add_option("--truth", truth_path, "truth.csv")->required();
  evaluate->add_option("--total", total, "Total comparisons (default: from truth file sizes)");

  auto* pairs = app.add_subcommand("pairs", "Join a train's link files into a predictions CSV");
  pairs->add_option("--reports", reports, "Train output directory")->required();
  pairs->add_option("--out", out, "Predictions CSV")->required();

  auto* sweep = app.add_subcommand("sweep", "Threshold sweep over a dataset directory");
  sweep->add_option("--dataset", dataset, "Directory with file_N.csv and truth.csv")->required();
  sweep->add_option("--scheme", scheme_path, "Encoding scheme JSON (default: fresh secrets)");
  sweep->add_option("--out", out, "Sweep CSV")->required();

  CLI11_PARSE(app, argc, argv);

  return pprl::cli::guarded([&]() -> int {
    if (gen->parsed()) {
      ev::GeneratorConfig config;
      if (!config_path.empty()) {
        config = ev::GeneratorConfig::from_json(read_json(config_path),
                                                fs::path(config_path).parent_path());
      }
      if (records_override) config.record_count = *records_override;
      if (seed_override) config.seed = *seed_override;
      const auto records = ev::generate(config);
      fs::create_directories(out);
      pprl::csv::write_file(fs::path(out) / "records.csv", ev::format_dataset(records));
      pprl::csv::write_file(fs::path(out) / "truth.csv", ev::format_truth(ev::truth_of(records)));
      std::cout << fmt::format("generated {} records in {}\n", records.size(), out);
    } else if (corrupt->parsed()) {
      ev::CorruptionConfig config;
      if (!config_path.empty()) config = ev::CorruptionConfig::from_json(read_json(config_path));
      if (seed_override) config.seed = *seed_override;
      const auto records = ev::corrupt(ev::read_dataset(inputs.front()), config);
      pprl::csv::write_file(out, ev::format_dataset(records));
      std::cout << fmt::format("corrupted {} records into {}\n", records.size(), out);
    } else if (split->parsed()) {
      const auto result = ev::split(read_inputs(inputs), files, common, seed);
      ev::write_dataset_dir(out, result);
      print_split(result, out);
    } else if (scatter->parsed()) {
      const auto result = ev::scatter(read_inputs(inputs), files, seed);
      ev::write_dataset_dir(out, result);
      print_split(result, out);
    } else if (export_mpi->parsed()) {
      const auto records = ev::read_dataset(inputs.front());
      pprl::csv::write_file(out, ev::format_mpi_store(records));
      if (!pseudonyms_out.empty()) {
        std::string list;
        for (const auto& r : records) list += r.pseudonym + "\n";
        pprl::csv::write_file(pseudonyms_out, list);
      }
    } else if (scheme->parsed()) {
      pprl::csv::write_file(out, pprl::protocol::to_json(load_or_make_scheme("")).dump(2) + "\n");
    } else if (evaluate->parsed()) {
      const auto truth = ev::parse_truth(pprl::csv::read_file(truth_path));
      const auto predicted = ev::parse_predictions(pprl::csv::read_file(pred));
      const auto result =
          ev::evaluate(predicted, truth, total ? *total : comparisons_from_truth(truth));
      const json report = {{"tp", result.counts.true_positives},
                           {"fp", result.counts.false_positives},
                           {"fn", result.counts.false_negatives},
                           {"tn", result.counts.true_negatives},
                           {"precision", result.metrics.precision},
                           {"recall", result.metrics.recall},
                           {"f1", result.metrics.f1}};
      std::cout << report.dump(2) << "\n";
    } else if (pairs->parsed()) {
      const auto predicted = ev::read_report_pairs(reports);
      pprl::csv::write_file(out, ev::format_predictions(predicted));
      std::cout << fmt::format("{} pairs written to {}\n", predicted.size(), out);
    } else if (sweep->parsed()) {
      const auto data = ev::read_dataset_dir(dataset);
      const auto encoded = ev::encode_files(data.files, load_or_make_scheme(scheme_path));
      const auto scored = ev::score_all_pairs(encoded, data.truth);
      const auto report = ev::sweep_experiment(scored, ev::count_true_pairs(data.truth));
      pprl::csv::write_file(out, pprl::sweep_csv(report.rows));
      std::cout << fmt::format("best threshold {:.2f}: precision {:.4f} recall {:.4f} f1 {:.4f}\n",
                               report.best.threshold, report.best.metrics.precision,
                               report.best.metrics.recall, report.best.metrics.f1);
    }
    return 0;
  });
}
