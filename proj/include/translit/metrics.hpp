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
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace translit {

struct BleuBreakdown {
  int max_order = 4;
  /// Clipped n-gram matches and hypothesis n-gram totals per order.
  std::vector<std::int64_t> matches;
  std::vector<std::int64_t> totals;
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  std::int64_t hyp_length = 0;
  std::int64_t ref_length = 0;
  double score = 0.0;
};

struct ChrfBreakdown {
  int max_order = 6;
  double beta = 2.0;
  std::vector<std::int64_t> matches;
  std::vector<std::int64_t> hyp_counts;
  std::vector<std::int64_t> ref_counts;
  std::vector<double> precision;
  std::vector<double> recall;
  /// Orders with no n-grams on either side are skipped in the averages.
  std::vector<bool> counted;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double score = 0.0;
};

/// Corpus BLEU over whitespace tokens, unsmoothed. The reference length of
/// each sentence is the closest reference length (ties to the shorter).
/// Orders with no hypothesis n-grams in the whole corpus are left out of
/// the geometric mean; any other zero precision gives a score of 0.
/// Throws PreconditionError on empty input or a length mismatch.
BleuBreakdown bleu_corpus(std::span<const std::string> hyps,
                          std::span<const std::vector<std::string>> refs, int max_order = 4);

/// Corpus BLEU whose tokens are Unicode code points; spaces are tokens.
BleuBreakdown char_bleu(std::span<const std::string> hyps,
                        std::span<const std::vector<std::string>> refs, int max_order = 4);

/// BLEU over pre-tokenized input.
BleuBreakdown bleu_tokens(std::span<const std::vector<std::string>> hyps,
                          std::span<const std::vector<std::vector<std::string>>> refs,
                          int max_order = 4);

/// Single-sentence diagnostic BLEU with add-one smoothing above order 1.
double sentence_bleu(const std::string& hyp, std::span<const std::string> refs, int max_order = 4);

/// Corpus chrF: whitespace removed, n-gram statistics summed over the
/// corpus per order, precision and recall averaged over counted orders,
/// then combined as F-beta. 0/0 counts as 0.
ChrfBreakdown chrf(std::span<const std::string> hyps, std::span<const std::string> refs,
                   int max_order = 6, double beta = 2.0);

/// Single-reference helper lifting `refs` to the multi-reference form.
std::vector<std::vector<std::string>> single_references(std::span<const std::string> refs);

struct MetricReport {
  std::string label;
  std::size_t sentences = 0;
  BleuBreakdown bleu;
  BleuBreakdown char_bleu;
  ChrfBreakdown chrf;

  /// `| label | BLEU | Char-BLEU | CHRF |`
  std::string markdown_row() const;
};

MetricReport evaluate_metrics(std::span<const std::string> hyps,
                              std::span<const std::string> refs, std::string label = {});

nlohmann::json to_json(const BleuBreakdown& b);
nlohmann::json to_json(const ChrfBreakdown& c);
nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Shortest decimal text that round-trips `value`.
std::string format_number(double value);

}  // namespace translit
