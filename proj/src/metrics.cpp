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

#include "translit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

#include "translit/common.hpp"
#include "translit/unicode.hpp"

namespace translit {

namespace {

using Ngram = std::vector<int>;
using NgramCounts = std::map<Ngram, std::int64_t>;

/// Interns token strings so n-grams compare as small integer vectors.
class Interner {
 public:
  std::vector<int> ids(const std::vector<std::string>& tokens) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
      auto [it, inserted] = table_.try_emplace(t, static_cast<int>(table_.size()));
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, int> table_;
};

NgramCounts count_ngrams(const std::vector<int>& seq, int n) {
  NgramCounts counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    ++counts[Ngram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                   seq.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void check_corpus(std::size_t hyps, std::size_t refs) {
  if (hyps == 0) throw PreconditionError("empty corpus");
  if (hyps != refs) throw PreconditionError("hypothesis and reference counts differ");
}

std::string strip_whitespace(const std::string& text) {
  std::string out;
  for (const auto& t : whitespace_tokens(text)) out += t;
  return out;
}

}  // namespace

BleuBreakdown bleu_tokens(std::span<const std::vector<std::string>> hyps,
                          std::span<const std::vector<std::vector<std::string>>> refs,
                          int max_order) {
  check_corpus(hyps.size(), refs.size());
  if (max_order < 1) throw PreconditionError("max_order must be positive");
  BleuBreakdown b;
  b.max_order = max_order;
  b.matches.assign(static_cast<std::size_t>(max_order), 0);
  b.totals.assign(static_cast<std::size_t>(max_order), 0);
  Interner interner;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    if (refs[s].empty()) throw PreconditionError("sentence without references");
    const auto hyp = interner.ids(hyps[s]);
    std::vector<std::vector<int>> ref_ids;
    for (const auto& r : refs[s]) ref_ids.push_back(interner.ids(r));

    const auto h = static_cast<std::int64_t>(hyp.size());
    std::int64_t closest = static_cast<std::int64_t>(ref_ids[0].size());
    for (const auto& r : ref_ids) {
      const auto len = static_cast<std::int64_t>(r.size());
      const auto d = std::llabs(len - h), best = std::llabs(closest - h);
      if (d < best || (d == best && len < closest)) closest = len;
    }
    b.hyp_length += h;
    b.ref_length += closest;

    for (int n = 1; n <= max_order; ++n) {
      const auto hyp_counts = count_ngrams(hyp, n);
      NgramCounts max_ref;
      for (const auto& r : ref_ids) {
        for (const auto& [g, c] : count_ngrams(r, n)) {
          auto& slot = max_ref[g];
          slot = std::max(slot, c);
        }
      }
      for (const auto& [g, c] : hyp_counts) {
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) b.matches[static_cast<std::size_t>(n - 1)] += std::min(c, it->second);
        b.totals[static_cast<std::size_t>(n - 1)] += c;
      }
    }
  }
  // Orders the hypotheses are too short to contain are left out of the
  // geometric mean, so identical short corpora still score 100.
  b.precisions.resize(static_cast<std::size_t>(max_order));
  bool all_positive = true;
  double log_sum = 0.0;
  int effective_order = 0;
  for (std::size_t n = 0; n < b.precisions.size(); ++n) {
    if (b.totals[n] == 0) continue;
    ++effective_order;
    b.precisions[n] = static_cast<double>(b.matches[n]) / static_cast<double>(b.totals[n]);
    if (b.precisions[n] > 0.0) {
      log_sum += std::log(b.precisions[n]);
    } else {
      all_positive = false;
    }
  }
  all_positive = all_positive && effective_order > 0;
  if (b.hyp_length == 0) {
    b.brevity_penalty = 0.0;
  } else if (b.hyp_length >= b.ref_length) {
    b.brevity_penalty = 1.0;
  } else {
    b.brevity_penalty = std::exp(1.0 - static_cast<double>(b.ref_length) / static_cast<double>(b.hyp_length));
  }
  b.score = all_positive ? 100.0 * b.brevity_penalty * std::exp(log_sum / effective_order) : 0.0;
  return b;
}

BleuBreakdown bleu_corpus(std::span<const std::string> hyps,
                          std::span<const std::vector<std::string>> refs, int max_order) {
  check_corpus(hyps.size(), refs.size());
  std::vector<std::vector<std::string>> h;
  std::vector<std::vector<std::vector<std::string>>> r;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    h.push_back(whitespace_tokens(hyps[i]));
    auto& rr = r.emplace_back();
    for (const auto& ref : refs[i]) rr.push_back(whitespace_tokens(ref));
  }
  return bleu_tokens(h, r, max_order);
}

BleuBreakdown char_bleu(std::span<const std::string> hyps,
                        std::span<const std::vector<std::string>> refs, int max_order) {
  check_corpus(hyps.size(), refs.size());
  std::vector<std::vector<std::string>> h;
  std::vector<std::vector<std::vector<std::string>>> r;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    h.push_back(unicode::split_chars(hyps[i]));
    auto& rr = r.emplace_back();
    for (const auto& ref : refs[i]) rr.push_back(unicode::split_chars(ref));
  }
  return bleu_tokens(h, r, max_order);
}

double sentence_bleu(const std::string& hyp, std::span<const std::string> refs, int max_order) {
  if (refs.empty()) throw PreconditionError("sentence without references");
  const std::vector<std::string> hyps = {hyp};
  const std::vector<std::vector<std::string>> multi = {{refs.begin(), refs.end()}};
  const auto b = bleu_corpus(hyps, multi, max_order);
  if (b.hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < b.matches.size(); ++n) {
    const double add = n == 0 ? 0.0 : 1.0;
    const double num = static_cast<double>(b.matches[n]) + add;
    const double den = static_cast<double>(b.totals[n]) + add;
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  return 100.0 * b.brevity_penalty * std::exp(log_sum / max_order);
}

ChrfBreakdown chrf(std::span<const std::string> hyps, std::span<const std::string> refs,
                   int max_order, double beta) {
  check_corpus(hyps.size(), refs.size());
  if (max_order < 1) throw PreconditionError("max_order must be positive");
  if (!(beta > 0.0)) throw PreconditionError("beta must be positive");
  ChrfBreakdown c;
  c.max_order = max_order;
  c.beta = beta;
  const auto orders = static_cast<std::size_t>(max_order);
  c.matches.assign(orders, 0);
  c.hyp_counts.assign(orders, 0);
  c.ref_counts.assign(orders, 0);
  Interner interner;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto hyp = interner.ids(unicode::split_chars(strip_whitespace(hyps[s])));
    const auto ref = interner.ids(unicode::split_chars(strip_whitespace(refs[s])));
    for (int n = 1; n <= max_order; ++n) {
      const auto hc = count_ngrams(hyp, n);
      const auto rc = count_ngrams(ref, n);
      auto& m = c.matches[static_cast<std::size_t>(n - 1)];
      for (const auto& [g, k] : hc) {
        c.hyp_counts[static_cast<std::size_t>(n - 1)] += k;
        const auto it = rc.find(g);
        if (it != rc.end()) m += std::min(k, it->second);
      }
      for (const auto& [g, k] : rc) c.ref_counts[static_cast<std::size_t>(n - 1)] += k;
    }
  }
  c.precision.assign(orders, 0.0);
  c.recall.assign(orders, 0.0);
  c.counted.assign(orders, false);
  int counted = 0;
  for (std::size_t n = 0; n < orders; ++n) {
    if (c.hyp_counts[n] == 0 && c.ref_counts[n] == 0) continue;
    c.counted[n] = true;
    ++counted;
    if (c.hyp_counts[n]) c.precision[n] = static_cast<double>(c.matches[n]) / static_cast<double>(c.hyp_counts[n]);
    if (c.ref_counts[n]) c.recall[n] = static_cast<double>(c.matches[n]) / static_cast<double>(c.ref_counts[n]);
    c.mean_precision += c.precision[n];
    c.mean_recall += c.recall[n];
  }
  if (counted == 0) return c;
  c.mean_precision /= counted;
  c.mean_recall /= counted;
  const double b2 = beta * beta;
  const double den = b2 * c.mean_precision + c.mean_recall;
  c.score = den > 0.0 ? 100.0 * (1.0 + b2) * c.mean_precision * c.mean_recall / den : 0.0;
  return c;
}

std::vector<std::vector<std::string>> single_references(std::span<const std::string> refs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r});
  return out;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string MetricReport::markdown_row() const {
  auto fixed = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  return "| " + label + " | " + fixed(bleu.score) + " | " + fixed(char_bleu.score) + " | " +
         fixed(chrf.score) + " |";
}

MetricReport evaluate_metrics(std::span<const std::string> hyps,
                              std::span<const std::string> refs, std::string label) {
  MetricReport r;
  r.label = std::move(label);
  r.sentences = hyps.size();
  const auto multi = single_references(refs);
  r.bleu = bleu_corpus(hyps, multi);
  r.char_bleu = char_bleu(hyps, multi);
  r.chrf = chrf(hyps, refs);
  return r;
}

nlohmann::json to_json(const BleuBreakdown& b) {
  return {{"score", b.score},
          {"max_order", b.max_order},
          {"precisions", b.precisions},
          {"matches", b.matches},
          {"totals", b.totals},
          {"brevity_penalty", b.brevity_penalty},
          {"hyp_length", b.hyp_length},
          {"ref_length", b.ref_length}};
}

nlohmann::json to_json(const ChrfBreakdown& c) {
  return {{"score", c.score},
          {"max_order", c.max_order},
          {"beta", c.beta},
          {"precision", c.precision},
          {"recall", c.recall},
          {"matches", c.matches},
          {"hyp_counts", c.hyp_counts},
          {"ref_counts", c.ref_counts},
          {"mean_precision", c.mean_precision},
          {"mean_recall", c.mean_recall}};
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"label", r.label},
          {"sentences", r.sentences},
          {"bleu", to_json(r.bleu)},
          {"char_bleu", to_json(r.char_bleu)},
          {"chrf", to_json(r.chrf)}};
}

namespace {

BleuBreakdown bleu_from_json(const nlohmann::json& j) {
  BleuBreakdown b;
  b.score = j.at("score").get<double>();
  b.max_order = j.value("max_order", 4);
  b.precisions = j.value("precisions", std::vector<double>{});
  b.matches = j.value("matches", std::vector<std::int64_t>{});
  b.totals = j.value("totals", std::vector<std::int64_t>{});
  b.brevity_penalty = j.value("brevity_penalty", 0.0);
  b.hyp_length = j.value("hyp_length", std::int64_t{0});
  b.ref_length = j.value("ref_length", std::int64_t{0});
  return b;
}

}  // namespace

MetricReport metric_report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.label = j.value("label", std::string{});
    r.sentences = j.value("sentences", std::size_t{0});
    r.bleu = bleu_from_json(j.at("bleu"));
    r.char_bleu = bleu_from_json(j.at("char_bleu"));
    const auto& c = j.at("chrf");
    r.chrf.score = c.at("score").get<double>();
    r.chrf.max_order = c.value("max_order", 6);
    r.chrf.beta = c.value("beta", 2.0);
    r.chrf.precision = c.value("precision", std::vector<double>{});
    r.chrf.recall = c.value("recall", std::vector<double>{});
    r.chrf.matches = c.value("matches", std::vector<std::int64_t>{});
    r.chrf.hyp_counts = c.value("hyp_counts", std::vector<std::int64_t>{});
    r.chrf.ref_counts = c.value("ref_counts", std::vector<std::int64_t>{});
    r.chrf.mean_precision = c.value("mean_precision", 0.0);
    r.chrf.mean_recall = c.value("mean_recall", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metric report: ") + e.what());
  }
}

}  // namespace translit
