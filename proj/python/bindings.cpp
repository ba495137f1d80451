// Copyright 2026 The Translit Authors. All Rights Reserved.
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
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "translit/cli.hpp"
#include "translit/common.hpp"
#include "translit/corpus.hpp"
#include "translit/decoding.hpp"
#include "translit/manifest.hpp"
#include "translit/metrics.hpp"
#include "translit/mlm.hpp"
#include "translit/model.hpp"
#include "translit/report.hpp"
#include "translit/splitter.hpp"
#include "translit/tokenizer.hpp"
#include "translit/training.hpp"

namespace py = pybind11;

namespace translit {
namespace {

using PyPair = std::pair<std::string, std::string>;

std::vector<SentencePair> to_pairs(const std::vector<PyPair>& in) {
  std::vector<SentencePair> out;
  out.reserve(in.size());
  for (const auto& [s, t] : in) out.push_back({s, t});
  return out;
}

std::vector<PyPair> from_pairs(std::span<const SentencePair> in) {
  std::vector<PyPair> out;
  out.reserve(in.size());
  for (const auto& p : in) out.emplace_back(p.source, p.target);
  return out;
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

SplitConfig split_config(std::size_t unique_val, std::size_t unique_test, std::size_t multi_val,
                         std::size_t multi_test, std::uint64_t seed) {
  return {.unique_val = unique_val, .unique_test = unique_test, .multi_val_groups = multi_val,
          .multi_test_groups = multi_test, .seed = seed};
}

py::dict split_dict(const CorpusSplit& s) {
  py::dict d;
  d["train"] = from_pairs(s.train);
  d["val_full"] = from_pairs(s.val_full);
  d["test_full"] = from_pairs(s.test_full);
  d["val_small"] = from_pairs(s.val_small);
  d["test_small"] = from_pairs(s.test_small);
  return d;
}

CorpusSplit split_from_dict(const py::dict& d) {
  CorpusSplit s;
  auto get = [&](const char* key) {
    return d.contains(key) ? to_pairs(d[key].cast<std::vector<PyPair>>()) : std::vector<SentencePair>{};
  };
  s.train = get("train");
  s.val_full = get("val_full");
  s.test_full = get("test_full");
  s.val_small = get("val_small");
  s.test_small = get("test_small");
  return s;
}

}  // namespace
}  // namespace translit

PYBIND11_MODULE(_translit, m) {
  using namespace translit;
  m.doc() = "Transliteration toolkit core";
  m.attr("__version__") = std::string(toolkit_version());

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("normalize", &normalize, py::arg("text"));

  m.def(
      "generate_synthetic",
      [](std::size_t groups, std::uint64_t seed, double singleton_fraction, int min_words, int max_words,
         const std::string& domain) {
        SynthConfig c;
        c.group_count = groups;
        c.seed = seed;
        c.singleton_fraction = singleton_fraction;
        c.min_words = min_words;
        c.max_words = max_words;
        c.domain = domain == "B" ? SynthDomain::kB : SynthDomain::kA;
        return from_pairs(generate_synthetic(c));
      },
      py::arg("groups"), py::arg("seed") = 0, py::arg("singleton_fraction") = 0.4, py::arg("min_words") = 3,
      py::arg("max_words") = 6, py::arg("domain") = "A");

  m.def(
      "build_split",
      [](const std::vector<std::pair<std::string, std::string>>& pairs, std::uint64_t seed,
         std::size_t unique_val, std::size_t unique_test, std::size_t multi_val, std::size_t multi_test) {
        const auto groups = group_by_source(to_pairs(pairs));
        return split_dict(build_split(groups, split_config(unique_val, unique_test, multi_val, multi_test, seed)));
      },
      py::arg("pairs"), py::arg("seed"), py::arg("unique_val") = 1500, py::arg("unique_test") = 1500,
      py::arg("multi_val") = 3000, py::arg("multi_test") = 3000);

  m.def(
      "audit",
      [](const py::dict& split, std::size_t unique_val, std::size_t unique_test, std::size_t multi_val,
         std::size_t multi_test) {
        return to_python(to_json(audit(split_from_dict(split),
                                       split_config(unique_val, unique_test, multi_val, multi_test, 0))));
      },
      py::arg("split"), py::arg("unique_val") = 1500, py::arg("unique_test") = 1500, py::arg("multi_val") = 3000,
      py::arg("multi_test") = 3000);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static(
          "build",
          [](const std::vector<std::pair<std::string, std::string>>& pairs, const std::vector<std::string>& langs) {
            return Vocabulary::build(to_pairs(pairs), langs);
          },
          py::arg("pairs"), py::arg("langs") = std::vector<std::string>{std::string(kRomanUrdu), std::string(kUrdu)})
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("__len__", &Vocabulary::size)
      .def("symbol", &Vocabulary::symbol, py::arg("id"))
      .def(
          "encode",
          [](const Vocabulary& v, const std::string& text, const std::string& lang, int max_len) {
            return encode(v, text, lang, max_len).ids;
          },
          py::arg("text"), py::arg("lang"), py::arg("max_len") = kDefaultMaxLen)
      .def(
          "decode", [](const Vocabulary& v, const std::vector<TokenId>& ids) { return decode(v, ids); },
          py::arg("ids"));

  m.def(
      "mask_tokens",
      [](const Vocabulary& v, const std::string& text, const std::string& lang, double rate, std::uint64_t seed) {
        const auto seq = encode(v, text, lang);
        const auto masked = mask_tokens(seq, v, {.mask_rate = rate, .seed = seed});
        return std::make_pair(masked.masked.ids, masked.labels);
      },
      py::arg("vocab"), py::arg("text"), py::arg("lang"), py::arg("mask_rate") = 0.15, py::arg("seed") = 0);

  m.def(
      "bleu", [](const std::vector<std::string>& h, const std::vector<std::string>& r) {
        return bleu_corpus(h, single_references(r)).score;
      },
      py::arg("hyps"), py::arg("refs"));
  m.def(
      "char_bleu", [](const std::vector<std::string>& h, const std::vector<std::string>& r) {
        return char_bleu(h, single_references(r)).score;
      },
      py::arg("hyps"), py::arg("refs"));
  m.def(
      "chrf", [](const std::vector<std::string>& h, const std::vector<std::string>& r) { return chrf(h, r).score; },
      py::arg("hyps"), py::arg("refs"));
  m.def(
      "evaluate_metrics",
      [](const std::vector<std::string>& h, const std::vector<std::string>& r, const std::string& label) {
        return to_python(to_json(evaluate_metrics(h, r, label)));
      },
      py::arg("hyps"), py::arg("refs"), py::arg("label") = "");

  m.def(
      "learning_rate",
      [](double peak, std::int64_t total_steps, double warmup_ratio, std::int64_t step) {
        return LinearWarmupSchedule(peak, total_steps, warmup_ratio).at(step);
      },
      py::arg("peak"), py::arg("total_steps"), py::arg("warmup_ratio"), py::arg("step"));

  m.def(
      "transliterate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& vocab,
         const std::vector<std::string>& texts, const std::string& source_lang, const std::string& target_lang,
         int beam) {
        const auto model = load_checkpoint(checkpoint);
        const auto v = Vocabulary::load(vocab);
        DecodeOptions opts;
        opts.beam_width = beam;
        opts.max_len = model.config.max_len;
        py::gil_scoped_release release;
        return transliterate(model, v, texts, source_lang, target_lang, opts);
      },
      py::arg("checkpoint"), py::arg("vocab"), py::arg("texts"), py::arg("source_lang"), py::arg("target_lang"),
      py::arg("beam") = 1);

  m.def(
      "render_report",
      [](const py::object& description, const std::filesystem::path& base_dir) {
        const auto table = build_report(from_python(description), base_dir);
        return std::make_pair(to_markdown(table), to_csv(table));
      },
      py::arg("description"), py::arg("base_dir") = std::filesystem::path("."));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
