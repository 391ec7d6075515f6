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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pprl/bit_vector.hpp"
#include "pprl/eval.hpp"
#include "pprl/masking.hpp"
#include "pprl/matcher.hpp"
#include "pprl/protocol.hpp"
#include "pprl/similarity.hpp"

namespace py = pybind11;

namespace {

pprl::PersonRecord to_record(const std::map<std::string, std::string>& attributes,
                             const std::string& pseudonym) {
  return {pseudonym, attributes};
}

py::dict metrics_dict(const pprl::ConfusionMatrix& cm) {
  const auto m = pprl::metrics(cm);
  py::dict d;
  d["tp"] = cm.true_positives;
  d["fp"] = cm.false_positives;
  d["fn"] = cm.false_negatives;
  d["tn"] = cm.true_negatives;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pprl, m) {
  m.doc() = "Bloom-filter record encoding, similarity matching and evaluation";

  py::register_exception<pprl::SchemeError>(m, "SchemeError", PyExc_ValueError);
  py::register_exception<pprl::AttributeMismatch>(m, "AttributeMismatch", PyExc_ValueError);
  py::register_exception<pprl::protocol::DecodeError>(m, "DecodeError", PyExc_ValueError);

  m.def("preprocess", &pprl::preprocess, py::arg("raw"));
  m.def("tokenize", &pprl::tokenize, py::arg("value"), py::arg("q") = 2);
  m.def("estimate_weights", &pprl::estimate_weights, py::arg("samples"), py::arg("q") = 2);
  m.def("allocate_hash_counts", &pprl::allocate_hash_counts, py::arg("weights"),
        py::arg("total_budget"));

  py::class_<pprl::BitVector>(m, "BitVector")
      .def(py::init<std::size_t>(), py::arg("length"))
      .def_static("from_string", &pprl::BitVector::from_string)
      .def_static("from_bytes",
                  [](const py::bytes& b, std::size_t length) {
                    return pprl::BitVector::from_bytes(std::string(b), length);
                  })
      .def("to_bytes", [](const pprl::BitVector& v) { return py::bytes(v.to_bytes()); })
      .def("to_string", &pprl::BitVector::to_string)
      .def("count", &pprl::BitVector::count)
      .def("complement", &pprl::BitVector::complement)
      .def("__len__", &pprl::BitVector::size)
      .def("__getitem__", &pprl::BitVector::test)
      .def("__eq__", [](const pprl::BitVector& a, const pprl::BitVector& b) { return a == b; })
      .def("__repr__", [](const pprl::BitVector& v) {
        return "<BitVector length=" + std::to_string(v.size()) +
               " weight=" + std::to_string(v.count()) + ">";
      });

  py::class_<pprl::EncodingScheme>(m, "EncodingScheme")
      .def_static(
          "from_json",
          [](const std::string& text) {
            return pprl::protocol::deserialize<pprl::EncodingScheme>(text);
          },
          py::arg("text"))
      .def("to_json",
           [](const pprl::EncodingScheme& s) { return pprl::protocol::to_json(s).dump(); })
      .def("validate", &pprl::EncodingScheme::validate)
      .def("output_length", &pprl::EncodingScheme::output_length)
      .def("digest", &pprl::protocol::scheme_digest)
      .def_readonly("filter_length", &pprl::EncodingScheme::filter_length)
      .def_readonly("qgram", &pprl::EncodingScheme::qgram)
      .def_readonly("balanced", &pprl::EncodingScheme::balanced)
      .def_property_readonly("hash_counts", [](const pprl::EncodingScheme& s) {
        std::map<std::string, int> out;
        for (const auto& a : s.attributes) out[a.name] = a.hash_count;
        return out;
      });

  m.def(
      "build_scheme",
      [](const std::vector<std::string>& order, const std::map<std::string, double>& weights,
         const py::bytes& hash_secret, const py::bytes& study_secret,
         const py::bytes& permutation_seed, std::size_t filter_length, std::size_t q,
         bool balanced) {
        return pprl::build_scheme(order, weights,
                                  {std::string(hash_secret), std::string(study_secret),
                                   std::string(permutation_seed)},
                                  filter_length, q, balanced);
      },
      py::arg("attributes"), py::arg("weights"), py::arg("hash_secret"),
      py::arg("study_secret"), py::arg("permutation_seed"), py::arg("filter_length") = 1024,
      py::arg("q") = 2, py::arg("balanced") = true);

  m.def(
      "encode",
      [](const std::map<std::string, std::string>& attributes,
         const pprl::EncodingScheme& scheme, const std::string& pseudonym) {
        return pprl::encode(to_record(attributes, pseudonym), scheme);
      },
      py::arg("attributes"), py::arg("scheme"), py::arg("pseudonym") = "record");
  m.def(
      "encode_many",
      [](const std::vector<std::map<std::string, std::string>>& records,
         const pprl::EncodingScheme& scheme) {
        const pprl::RecordEncoder encoder(scheme);
        std::vector<pprl::BitVector> out;
        out.reserve(records.size());
        py::gil_scoped_release release;
        for (const auto& r : records) out.push_back(encoder.encode(to_record(r, "record")));
        return out;
      },
      py::arg("records"), py::arg("scheme"));

  m.def("jaccard", &pprl::jaccard, py::arg("a"), py::arg("b"));
  m.def(
      "match",
      [](const std::vector<pprl::BitVector>& a, const std::vector<pprl::BitVector>& b,
         double threshold, unsigned workers) {
        pprl::MatchTask task{"python", "a", "b", a, b, threshold};
        std::vector<pprl::ClassifiedPair> pairs;
        {
          py::gil_scoped_release release;
          pairs = pprl::match_pairwise(task, workers);
        }
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& p : pairs) out.emplace_back(p.left.index, p.right.index, p.similarity);
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("threshold"), py::arg("workers") = 1,
      "Cross-product pairs (i, j, similarity) with similarity >= threshold.");

  m.def(
      "evaluate_counts",
      [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t total) {
        return metrics_dict(pprl::eval::complete_confusion(tp, fp, fn, total));
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("total"),
      "Confusion matrix with TN derived from the total and its metrics.");
  m.def(
      "sweep",
      [](const std::vector<std::pair<double, bool>>& scored, std::uint64_t unlisted_true) {
        std::vector<pprl::ScoredPair> pairs;
        for (const auto& [s, t] : scored) pairs.push_back({s, t});
        const auto thresholds = pprl::percent_thresholds();
        std::vector<std::tuple<double, double, double, double>> out;
        for (const auto& row : pprl::sweep(pairs, thresholds, unlisted_true)) {
          out.emplace_back(row.threshold, row.metrics.precision, row.metrics.recall,
                           row.metrics.f1);
        }
        return out;
      },
      py::arg("scored"), py::arg("unlisted_true_matches") = 0,
      "Rows (threshold, precision, recall, f1) for thresholds 0.00..1.00.");

  m.def(
      "generate",
      [](std::size_t record_count, std::uint64_t seed) {
        pprl::eval::GeneratorConfig config;
        config.record_count = record_count;
        config.seed = seed;
        std::vector<std::map<std::string, std::string>> out;
        for (auto& r : pprl::eval::generate(config)) {
          auto row = r.attributes;
          row["pseudonym"] = r.pseudonym;
          row["entity_id"] = r.entity_id;
          out.push_back(std::move(row));
        }
        return out;
      },
      py::arg("record_count"), py::arg("seed") = 42,
      "Synthetic records from the bundled frequency tables.");
}
