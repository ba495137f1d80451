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

#include "translit/splitter.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "translit/common.hpp"
#include "translit/digest.hpp"

namespace translit {

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::kTrain: return "train";
    case Subset::kVal: return "val";
    case Subset::kTest: return "test";
  }
  return "train";
}

std::string_view to_string(Containment relation) {
  switch (relation) {
    case Containment::kDuplicate: return "duplicate";
    case Containment::kSubstring: return "substring";
    case Containment::kSuperstring: return "superstring";
  }
  return "duplicate";
}

void SplitConfig::validate() const {
  if (multi_band_min < 2) throw PreconditionError("multi_band min must be >= 2");
  if (multi_band_max < multi_band_min) throw PreconditionError("multi_band max < min");
}

namespace {

constexpr std::uint64_t kSelectSalt = 1;
constexpr std::uint64_t kSmallValSalt = 2;
constexpr std::uint64_t kSmallTestSalt = 3;

void append_group(std::vector<SentencePair>& out, const ParallelGroup& g) {
  for (const auto& v : g.variants) {
    out.push_back({g.source, v, Origin::kOther, out.size() + 1});
  }
}

std::vector<SentencePair> pick_one_per_group(std::span<const SentencePair> full, Rng rng) {
  std::vector<SentencePair> out;
  for (const auto& g : group_by_source(full)) {
    const std::size_t pick = g.variant_count() == 1 ? 0 : rng.uniform(g.variant_count());
    out.push_back({g.source, g.variants[pick], Origin::kOther, out.size() + 1});
  }
  return out;
}

}  // namespace

CorpusSplit build_split(std::span<const ParallelGroup> groups, const SplitConfig& config) {
  config.validate();
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return groups[a].source < groups[b].source; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (groups[order[i]].source == groups[order[i - 1]].source) {
      throw PreconditionError("duplicate group key: " + groups[order[i]].source);
    }
  }

  std::vector<std::size_t> singletons;
  std::vector<std::size_t> in_band;
  for (std::size_t idx : order) {
    const std::size_t n = groups[idx].variant_count();
    if (n == 1) {
      singletons.push_back(idx);
    } else if (n >= config.multi_band_min && n <= config.multi_band_max) {
      in_band.push_back(idx);
    }
  }
  const std::size_t need_single = config.unique_val + config.unique_test;
  const std::size_t need_multi = config.multi_val_groups + config.multi_test_groups;
  if (singletons.size() < need_single) {
    throw PreconditionError("insufficient singleton groups: need " + std::to_string(need_single) +
                            ", have " + std::to_string(singletons.size()));
  }
  if (in_band.size() < need_multi) {
    throw PreconditionError("insufficient in-band multi-variant groups: need " +
                            std::to_string(need_multi) + ", have " + std::to_string(in_band.size()));
  }

  Rng rng(derive_seed(config.seed, kSelectSalt));
  rng.shuffle(singletons);
  rng.shuffle(in_band);

  CorpusSplit split;
  std::vector<Subset> assignment(groups.size(), Subset::kTrain);
  auto assign = [&](const std::vector<std::size_t>& pool, std::size_t begin, std::size_t count,
                    Subset subset, std::vector<SentencePair>& out) {
    for (std::size_t i = begin; i < begin + count; ++i) {
      assignment[pool[i]] = subset;
      append_group(out, groups[pool[i]]);
    }
  };
  assign(singletons, 0, config.unique_val, Subset::kVal, split.val_full);
  assign(singletons, config.unique_val, config.unique_test, Subset::kTest, split.test_full);
  assign(in_band, 0, config.multi_val_groups, Subset::kVal, split.val_full);
  assign(in_band, config.multi_val_groups, config.multi_test_groups, Subset::kTest,
         split.test_full);

  for (std::size_t idx = 0; idx < groups.size(); ++idx) {
    split.provenance.emplace(groups[idx].source, assignment[idx]);
    if (assignment[idx] == Subset::kTrain) append_group(split.train, groups[idx]);
  }

  auto small = build_small_eval(split, config);
  split.val_small = std::move(small.val);
  split.test_small = std::move(small.test);
  return split;
}

SmallEval build_small_eval(const CorpusSplit& split, const SplitConfig& config) {
  return {pick_one_per_group(split.val_full, Rng(derive_seed(config.seed, kSmallValSalt))),
          pick_one_per_group(split.test_full, Rng(derive_seed(config.seed, kSmallTestSalt)))};
}

namespace {

std::vector<std::string_view> words_of(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t space = s.find(' ', start);
    const std::size_t end = space == std::string_view::npos ? s.size() : space;
    if (end > start) words.push_back(s.substr(start, end - start));
    if (space == std::string_view::npos) break;
    start = space + 1;
  }
  return words;
}

// Every contiguous word span shorter than the whole sentence.
template <typename Fn>
void for_each_proper_span(std::string_view s, Fn&& fn) {
  const auto words = words_of(s);
  for (std::size_t len = 1; len < words.size(); ++len) {
    for (std::size_t i = 0; i + len <= words.size(); ++i) {
      const char* begin = words[i].data();
      const char* end = words[i + len - 1].data() + words[i + len - 1].size();
      fn(std::string_view(begin, static_cast<std::size_t>(end - begin)));
    }
  }
}

struct SubsetView {
  Subset subset;
  const std::vector<SentencePair>* pairs;
};

}  // namespace

AuditReport audit(const CorpusSplit& split, const SplitConfig& config,
                  const AuditOptions& options) {
  AuditReport report;
  const SubsetView views[] = {{Subset::kTrain, &split.train},
                              {Subset::kVal, &split.val_full},
                              {Subset::kTest, &split.test_full}};

  // (1) pairwise disjointness, on both the source and the rendering side.
  std::unordered_set<std::string> sources[3];
  std::unordered_set<std::string> targets[3];
  std::unordered_multimap<std::string_view, std::string_view> target_sources[3];
  for (int i = 0; i < 3; ++i) {
    for (const auto& p : *views[i].pairs) {
      sources[i].insert(p.source);
      targets[i].insert(p.target);
      target_sources[i].emplace(p.target, p.source);
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      std::set<std::string> shared_src;
      std::set<std::string> shared_tgt;
      for (const auto& s : sources[a]) {
        if (sources[b].count(s)) shared_src.insert(s);
      }
      for (const auto& t : targets[a]) {
        if (targets[b].count(t)) shared_tgt.insert(t);
      }
      for (const auto& s : shared_src) {
        report.overlap_violations.push_back({s, views[a].subset, views[b].subset, "source"});
      }
      // A rendering shared because its whole pair is shared is already
      // reported through the source.
      for (const auto& t : shared_tgt) {
        const auto [lo, hi] = target_sources[a].equal_range(t);
        const bool explained = std::any_of(lo, hi, [&](const auto& kv) {
          return shared_src.count(std::string(kv.second)) > 0;
        });
        if (!explained) {
          report.overlap_violations.push_back({t, views[a].subset, views[b].subset, "target"});
        }
      }
    }
  }

  // (2) variation inclusion and (3) balanced counts.
  auto check_eval = [&](Subset subset, const std::vector<SentencePair>& full,
                        const std::vector<SentencePair>& small, std::size_t want_unique,
                        std::size_t want_multi, std::size_t& unique, std::size_t& multi,
                        std::size_t& small_count) {
    const auto groups = group_by_source(full);
    std::unordered_map<std::string, std::unordered_set<std::string>> members;
    for (const auto& g : groups) {
      if (g.variant_count() == 1) {
        ++unique;
      } else {
        ++multi;
        if (g.variant_count() < config.multi_band_min || g.variant_count() > config.multi_band_max) {
          report.variation_inclusion_problems.push_back(
              std::string(to_string(subset)) + ": group outside the variant band: " + g.source);
        }
      }
      members[g.source].insert(g.variants.begin(), g.variants.end());
      for (const auto& v : g.variants) {
        if (targets[0].count(v)) {
          report.variation_inclusion_problems.push_back(
              std::string(to_string(subset)) + ": variant also present in train: " + v);
        }
      }
    }
    small_count = small.size();
    std::unordered_set<std::string> small_sources;
    for (const auto& p : small) {
      auto it = members.find(p.source);
      if (it == members.end() || !it->second.count(p.target)) {
        report.variation_inclusion_problems.push_back(
            std::string(to_string(subset)) + ": small-set pair missing from full set: " + p.source);
      }
      if (!small_sources.insert(p.source).second) report.counts_ok = false;
    }
    if (small_sources.size() != groups.size()) report.counts_ok = false;
    if (unique != want_unique || multi != want_multi || small.size() != want_unique + want_multi) {
      report.counts_ok = false;
    }
  };
  check_eval(Subset::kVal, split.val_full, split.val_small, config.unique_val,
             config.multi_val_groups, report.unique_counts.val, report.multi_counts.val,
             report.small_counts.val);
  check_eval(Subset::kTest, split.test_full, split.test_small, config.unique_test,
             config.multi_test_groups, report.unique_counts.test, report.multi_counts.test,
             report.small_counts.test);
  report.variation_inclusion_ok = report.variation_inclusion_problems.empty();

  // (4) training-set integrity.
  std::unordered_set<std::string_view> eval_sentences;
  std::unordered_map<std::string_view, std::vector<std::string_view>> eval_spans;
  for (int i = 1; i < 3; ++i) {
    for (const auto& s : sources[i]) eval_sentences.insert(s);
  }
  for (std::string_view e : eval_sentences) {
    for_each_proper_span(e, [&](std::string_view span) {
      auto& owners = eval_spans[span];
      if (owners.empty() || owners.back() != e) owners.push_back(e);
    });
  }
  std::vector<std::string_view> train_sources(sources[0].begin(), sources[0].end());
  std::sort(train_sources.begin(), train_sources.end());
  for (std::string_view t : train_sources) {
    if (eval_sentences.count(t)) {
      report.partial_repetition_hits.push_back(
          {std::string(t), std::string(t), Containment::kDuplicate});
    }
    if (auto it = eval_spans.find(t); it != eval_spans.end()) {
      for (std::string_view e : it->second) {
        report.partial_repetition_hits.push_back(
            {std::string(t), std::string(e), Containment::kSubstring});
      }
    }
    std::set<std::string_view> contained;
    for_each_proper_span(t, [&](std::string_view span) {
      if (auto it = eval_sentences.find(span); it != eval_sentences.end()) contained.insert(*it);
    });
    for (std::string_view e : contained) {
      report.partial_repetition_hits.push_back(
          {std::string(t), std::string(e), Containment::kSuperstring});
    }
  }

  report.passed = report.overlap_violations.empty() && report.variation_inclusion_ok &&
                  report.counts_ok &&
                  (!options.strict_partial_repetition || report.partial_repetition_hits.empty());
  return report;
}

nlohmann::json to_json(const AuditReport& report) {
  nlohmann::json overlaps = nlohmann::json::array();
  for (const auto& v : report.overlap_violations) {
    overlaps.push_back({{"sentence", v.sentence},
                        {"subsets", {to_string(v.first), to_string(v.second)}},
                        {"side", v.side}});
  }
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : report.partial_repetition_hits) {
    hits.push_back({{"train_sentence", h.train_sentence},
                    {"eval_sentence", h.eval_sentence},
                    {"relation", to_string(h.relation)}});
  }
  return {
      {"passed", report.passed},
      {"overlap_violations", overlaps},
      {"variation_inclusion_ok", report.variation_inclusion_ok},
      {"variation_inclusion_problems", report.variation_inclusion_problems},
      {"counts_ok", report.counts_ok},
      {"unique_counts", {{"val", report.unique_counts.val}, {"test", report.unique_counts.test}}},
      {"multi_counts", {{"val", report.multi_counts.val}, {"test", report.multi_counts.test}}},
      {"small_counts", {{"val", report.small_counts.val}, {"test", report.small_counts.test}}},
      {"partial_repetition_hits", hits},
  };
}

namespace {

constexpr const char* kSubsetFiles[] = {"train.jsonl", "val_full.jsonl", "test_full.jsonl",
                                        "val_small.jsonl", "test_small.jsonl"};

nlohmann::json config_json(const SplitConfig& c) {
  return {{"unique_val", c.unique_val},
          {"unique_test", c.unique_test},
          {"multi_val_groups", c.multi_val_groups},
          {"multi_test_groups", c.multi_test_groups},
          {"multi_band", {c.multi_band_min, c.multi_band_max}},
          {"small_eval_size", c.small_val_size()},
          {"seed", c.seed}};
}

}  // namespace

void write_split(const std::filesystem::path& dir, const CorpusSplit& split,
                 const SplitConfig& config) {
  std::filesystem::create_directories(dir);
  const std::vector<SentencePair>* subsets[] = {&split.train, &split.val_full, &split.test_full,
                                                &split.val_small, &split.test_small};
  nlohmann::json counts;
  nlohmann::json digests;
  for (int i = 0; i < 5; ++i) {
    std::ostringstream body;
    write_jsonl(body, *subsets[i]);
    const std::string bytes = body.str();
    std::ofstream out(dir / kSubsetFiles[i], std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / kSubsetFiles[i]).string());
    out << bytes;
    counts[kSubsetFiles[i]] = subsets[i]->size();
    digests[kSubsetFiles[i]] = sha256_hex(bytes);
  }
  const nlohmann::json header = {{"format_version", 1},
                                 {"config", config_json(config)},
                                 {"seed", config.seed},
                                 {"counts", counts},
                                 {"sha256", digests}};
  std::ofstream out(dir / "split.json");
  out << header.dump(2) << '\n';
}

CorpusSplit read_split(const std::filesystem::path& dir, SplitConfig* config,
                       std::vector<std::string>* digest_mismatches) {
  std::ifstream in(dir / "split.json");
  if (!in) throw IoError("missing split header in " + dir.string());
  const auto header = nlohmann::json::parse(in);
  if (header.value("format_version", 0) != 1) throw FormatError("unsupported split format version");
  CorpusSplit split;
  std::vector<SentencePair>* subsets[] = {&split.train, &split.val_full, &split.test_full,
                                          &split.val_small, &split.test_small};
  for (int i = 0; i < 5; ++i) {
    const auto path = dir / kSubsetFiles[i];
    const std::string digest = file_sha256(path);
    if (digest != header["sha256"][kSubsetFiles[i]].get<std::string>()) {
      if (!digest_mismatches) throw FormatError("digest mismatch for " + path.string());
      digest_mismatches->push_back(kSubsetFiles[i]);
    }
    std::ifstream f(path, std::ios::binary);
    // An empty subset is legal here; parse_corpus rejects empty input.
    if (std::filesystem::file_size(path) > 0) {
      *subsets[i] = parse_corpus(f, CorpusFormat::kJsonl).pairs;
    }
  }
  for (const auto& p : split.train) split.provenance.emplace(p.source, Subset::kTrain);
  for (const auto& p : split.val_full) split.provenance.emplace(p.source, Subset::kVal);
  for (const auto& p : split.test_full) split.provenance.emplace(p.source, Subset::kTest);
  if (config) {
    const auto& c = header["config"];
    config->unique_val = c["unique_val"];
    config->unique_test = c["unique_test"];
    config->multi_val_groups = c["multi_val_groups"];
    config->multi_test_groups = c["multi_test_groups"];
    config->multi_band_min = c["multi_band"][0];
    config->multi_band_max = c["multi_band"][1];
    config->seed = c["seed"];
  }
  return split;
}

}  // namespace translit
