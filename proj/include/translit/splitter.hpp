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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "translit/corpus.hpp"

namespace translit {

enum class Subset { kTrain, kVal, kTest };

std::string_view to_string(Subset subset);

struct SplitConfig {
  std::size_t unique_val = 1500;
  std::size_t unique_test = 1500;
  std::size_t multi_val_groups = 3000;
  std::size_t multi_test_groups = 3000;
  std::size_t multi_band_min = 2;
  std::size_t multi_band_max = 10;
  std::uint64_t seed = 0;

  std::size_t small_val_size() const { return unique_val + multi_val_groups; }
  std::size_t small_test_size() const { return unique_test + multi_test_groups; }
  void validate() const;
};

struct CorpusSplit {
  std::vector<SentencePair> train;
  std::vector<SentencePair> val_full;
  std::vector<SentencePair> test_full;
  std::vector<SentencePair> val_small;
  std::vector<SentencePair> test_small;
  std::map<std::string, Subset> provenance;
};

/// Selects evaluation groups and flattens the rest into training pairs.
/// Singletons are drawn before multi-variant groups and validation before
/// test. Groups larger than the band stay in training.
CorpusSplit build_split(std::span<const ParallelGroup> groups, const SplitConfig& config);

struct SmallEval {
  std::vector<SentencePair> val;
  std::vector<SentencePair> test;
};

/// One pair per evaluation group: singletons verbatim, one seeded-random
/// variant for every multi-variant group.
SmallEval build_small_eval(const CorpusSplit& split, const SplitConfig& config);

struct OverlapViolation {
  std::string sentence;
  Subset first;
  Subset second;
  /// "source" when a source sentence is shared, "target" when a rendering is.
  std::string side;
};

enum class Containment { kDuplicate, kSubstring, kSuperstring };

std::string_view to_string(Containment relation);

struct PartialRepetition {
  std::string train_sentence;
  std::string eval_sentence;
  Containment relation;
};

struct SubsetCounts {
  std::size_t val = 0;
  std::size_t test = 0;
};

struct AuditReport {
  std::vector<OverlapViolation> overlap_violations;
  bool variation_inclusion_ok = true;
  std::vector<std::string> variation_inclusion_problems;
  SubsetCounts unique_counts;
  SubsetCounts multi_counts;
  SubsetCounts small_counts;
  bool counts_ok = true;
  std::vector<PartialRepetition> partial_repetition_hits;
  bool passed = true;
};

struct AuditOptions {
  /// When false, partial repetitions are reported but do not fail the audit.
  bool strict_partial_repetition = true;
};

/// Runs the four integrity checks: pairwise disjointness, variation
/// inclusion, balanced counts, and training-set integrity (duplicates and
/// whole-word containment in either direction).
AuditReport audit(const CorpusSplit& split, const SplitConfig& config,
                  const AuditOptions& options = {});

nlohmann::json to_json(const AuditReport& report);

/// Manifest layout: one JSONL file per subset plus split.json carrying the
/// config, counts, and a SHA-256 of each subset file.
void write_split(const std::filesystem::path& dir, const CorpusSplit& split,
                 const SplitConfig& config);
/// Reads a split directory and optionally its config. A subset whose
/// digest disagrees with split.json throws FormatError, unless
/// `digest_mismatches` is given, which then collects the file names.
CorpusSplit read_split(const std::filesystem::path& dir, SplitConfig* config = nullptr,
                       std::vector<std::string>* digest_mismatches = nullptr);

}  // namespace translit
