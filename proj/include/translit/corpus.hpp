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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace translit {

enum class Origin { kRup, kDakshina, kSynthetic, kOther };

std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view name);

/// One row of a parallel corpus. `source` is the Urdu-script side and
/// `target` the Roman-Urdu rendering.
struct SentencePair {
  std::string source;
  std::string target;
  Origin origin = Origin::kOther;
  std::size_t line_no = 1;

  friend bool operator==(const SentencePair& a, const SentencePair& b) {
    return a.source == b.source && a.target == b.target;
  }
};

/// A source sentence with every distinct target spelling seen for it.
struct ParallelGroup {
  std::string source;
  std::vector<std::string> variants;

  std::size_t variant_count() const { return variants.size(); }
};

enum class CorpusFormat { kTsv, kJsonl };

CorpusFormat parse_format(std::string_view name);

struct RowError {
  std::size_t line_no = 0;
  std::string message;
};

struct IngestResult {
  std::vector<SentencePair> pairs;
  std::vector<RowError> errors;
};

/// Whitespace collapse, control-character removal, then NFC.
std::string normalize(std::string_view raw);

/// Parses a corpus stream. Malformed rows land in `errors`; throws
/// FormatError if no valid row remains.
IngestResult parse_corpus(std::istream& in, CorpusFormat format,
                          Origin origin = Origin::kOther);

/// Reads a corpus file; throws IoError when the file cannot be opened.
IngestResult ingest(const std::filesystem::path& path, CorpusFormat format,
                    Origin origin = Origin::kOther);

void write_tsv(std::ostream& out, std::span<const SentencePair> pairs);
void write_jsonl(std::ostream& out, std::span<const SentencePair> pairs);

/// Groups pairs by exact source text. Groups come out in first-seen order
/// and duplicate (source, target) pairs are collapsed.
std::vector<ParallelGroup> group_by_source(std::span<const SentencePair> pairs);

/// Flattens groups back into pairs, variants in group order.
std::vector<SentencePair> flatten(std::span<const ParallelGroup> groups,
                                  Origin origin = Origin::kOther);

// ---------------------------------------------------------------------------
// Synthetic corpora.

/// Two romanisation conventions with conflicting spellings, so that a
/// model trained on one degrades on the other.
enum class SynthDomain { kA, kB };

struct SynthConfig {
  std::size_t group_count = 1000;
  int max_variants = 10;
  std::uint64_t seed = 0;
  int min_words = 3;
  int max_words = 6;
  int min_word_len = 2;
  int max_word_len = 5;
  /// Number of source letters whose spelling may vary; -1 means all.
  int variant_rule_count = -1;
  /// Fraction of groups that get exactly one variant.
  double singleton_fraction = 0.4;
  /// Draw words from a fixed lexicon of this size; 0 draws fresh words.
  std::size_t lexicon_size = 0;
  SynthDomain domain = SynthDomain::kA;
  /// Set when the output feeds a full-size split (1,500/3,000 defaults).
  bool for_default_split = false;

  void validate() const;
};

/// Letter-level romanisation rules with an exact inverse. Every source
/// letter owns a set of spellings and the union of all spellings is
/// prefix-free, so any rendering decodes back to a unique source.
class RomanizationRules {
 public:
  explicit RomanizationRules(SynthDomain domain, int variant_rule_count = -1);

  const std::vector<std::string>& letters() const { return letters_; }

  std::string canonical(std::string_view source) const;
  /// Samples an independent spelling for every letter occurrence.
  std::string sample(std::string_view source, class Rng& rng) const;
  /// Rule-based inverse; nullopt if `roman` is not a valid rendering.
  std::optional<std::string> inverse(std::string_view roman) const;

 private:
  std::vector<std::string> letters_;
  std::vector<std::vector<std::string>> spellings_;
};

/// Deterministic in `config`; throws PreconditionError on invalid configs.
std::vector<SentencePair> generate_synthetic(const SynthConfig& config);

}  // namespace translit
