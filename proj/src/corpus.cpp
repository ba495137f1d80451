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

#include "translit/corpus.hpp"

#include <unicode/uchar.h>

#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "translit/common.hpp"
#include "translit/unicode.hpp"

namespace translit {

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::kRup: return "rup";
    case Origin::kDakshina: return "dakshina";
    case Origin::kSynthetic: return "synthetic";
    case Origin::kOther: return "other";
  }
  return "other";
}

Origin parse_origin(std::string_view name) {
  if (name == "rup") return Origin::kRup;
  if (name == "dakshina") return Origin::kDakshina;
  if (name == "synthetic") return Origin::kSynthetic;
  if (name == "other") return Origin::kOther;
  throw FormatError("unknown origin '" + std::string(name) + "'");
}

CorpusFormat parse_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw FormatError("unknown corpus format '" + std::string(name) + "'");
}

std::string normalize(std::string_view raw) {
  std::u32string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : unicode::to_utf32(raw)) {
    if (u_isUWhiteSpace(static_cast<UChar32>(cp))) {
      pending_space = !out.empty();
      continue;
    }
    if (u_charType(static_cast<UChar32>(cp)) == U_CONTROL_CHAR) continue;
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  return unicode::nfc(unicode::to_utf8(out));
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

IngestResult parse_corpus(std::istream& in, CorpusFormat format, Origin origin) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fail = [&](std::string message) {
      result.errors.push_back({line_no, std::move(message)});
    };
    std::string source;
    std::string target;
    Origin row_origin = origin;
    if (format == CorpusFormat::kTsv) {
      const auto fields = split_tabs(line);
      if (fields.size() != 2) {
        fail("expected 2 tab-separated fields, found " + std::to_string(fields.size()));
        continue;
      }
      source = normalize(fields[0]);
      target = normalize(fields[1]);
    } else {
      nlohmann::json row;
      try {
        row = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
        continue;
      }
      if (!row.is_object() || !row.contains("source") || !row.contains("target") ||
          !row["source"].is_string() || !row["target"].is_string()) {
        fail("missing string field \"source\" or \"target\"");
        continue;
      }
      source = normalize(row["source"].get<std::string>());
      target = normalize(row["target"].get<std::string>());
      if (row.contains("origin") && row["origin"].is_string()) {
        try {
          row_origin = parse_origin(row["origin"].get<std::string>());
        } catch (const FormatError& e) {
          fail(e.what());
          continue;
        }
      }
    }
    if (source.empty() || target.empty()) {
      fail("empty field after normalization");
      continue;
    }
    result.pairs.push_back({std::move(source), std::move(target), row_origin, line_no});
  }
  if (result.pairs.empty()) throw FormatError("corpus contains no valid rows");
  return result;
}

IngestResult ingest(const std::filesystem::path& path, CorpusFormat format, Origin origin) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  return parse_corpus(in, format, origin);
}

void write_tsv(std::ostream& out, std::span<const SentencePair> pairs) {
  for (const auto& p : pairs) out << p.source << '\t' << p.target << '\n';
}

void write_jsonl(std::ostream& out, std::span<const SentencePair> pairs) {
  for (const auto& p : pairs) {
    nlohmann::json row = {{"source", p.source},
                          {"target", p.target},
                          {"origin", std::string(to_string(p.origin))}};
    out << row.dump() << '\n';
  }
}

std::vector<ParallelGroup> group_by_source(std::span<const SentencePair> pairs) {
  std::vector<ParallelGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::unordered_set<std::string>> seen;
  for (const auto& p : pairs) {
    auto [it, inserted] = index.try_emplace(p.source, groups.size());
    if (inserted) {
      groups.push_back({p.source, {}});
      seen.emplace_back();
    }
    if (seen[it->second].insert(p.target).second) {
      groups[it->second].variants.push_back(p.target);
    }
  }
  return groups;
}

std::vector<SentencePair> flatten(std::span<const ParallelGroup> groups, Origin origin) {
  std::vector<SentencePair> out;
  std::size_t line_no = 0;
  for (const auto& g : groups) {
    for (const auto& v : g.variants) out.push_back({g.source, v, origin, ++line_no});
  }
  return out;
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (max_variants < 1 || max_variants > 10) {
    throw PreconditionError("max_variants must lie in [1, 10]");
  }
  if (min_words < 1 || max_words < min_words) throw PreconditionError("bad sentence_len_range");
  if (min_word_len < 1 || max_word_len < min_word_len) throw PreconditionError("bad word length range");
  if (singleton_fraction < 0.0 || singleton_fraction > 1.0) {
    throw PreconditionError("singleton_fraction must lie in [0, 1]");
  }
  if (for_default_split && group_count < 6000) {
    throw PreconditionError("full-size split needs at least 6000 groups, got " +
                            std::to_string(group_count));
  }
}

namespace {

struct LetterRule {
  const char* letter;
  std::vector<const char*> spellings;  // canonical first
};

const std::vector<LetterRule>& rules_for(SynthDomain domain) {
  static const std::vector<LetterRule> kDomainA = {
      {"ا", {"a"}},       {"ب", {"b"}},      {"پ", {"p"}},           {"ت", {"t"}},
      {"ج", {"j"}},       {"د", {"d"}},      {"ر", {"r"}},           {"ز", {"z"}},
      {"س", {"s", "c"}},  {"ف", {"f", "v"}}, {"ک", {"k", "q"}},      {"گ", {"g"}},
      {"ل", {"l"}},       {"م", {"m"}},      {"ن", {"n"}},           {"و", {"o", "u", "w"}},
      {"ہ", {"h"}},       {"ی", {"i", "ee", "y"}},
  };
  static const std::vector<LetterRule> kDomainB = {
      {"ا", {"aa", "ah"}}, {"ب", {"b"}},      {"پ", {"p"}},             {"ت", {"th"}},
      {"ج", {"j"}},        {"د", {"d"}},      {"ر", {"r"}},             {"ز", {"z", "x"}},
      {"س", {"s"}},        {"ف", {"f"}},      {"ک", {"c", "q"}},        {"گ", {"g"}},
      {"ل", {"l"}},        {"م", {"m"}},      {"ن", {"n"}},             {"و", {"oo", "ou", "w"}},
      {"ہ", {"h"}},        {"ی", {"ie", "iy", "ey"}},
  };
  return domain == SynthDomain::kA ? kDomainA : kDomainB;
}

}  // namespace

RomanizationRules::RomanizationRules(SynthDomain domain, int variant_rule_count) {
  int variable_seen = 0;
  for (const auto& rule : rules_for(domain)) {
    letters_.emplace_back(rule.letter);
    std::vector<std::string> spellings(rule.spellings.begin(), rule.spellings.end());
    if (spellings.size() > 1) {
      if (variant_rule_count >= 0 && variable_seen >= variant_rule_count) spellings.resize(1);
      ++variable_seen;
    }
    spellings_.push_back(std::move(spellings));
  }
  std::vector<std::string> all;
  for (const auto& s : spellings_) all.insert(all.end(), s.begin(), s.end());
  for (const auto& a : all) {
    for (const auto& b : all) {
      if (&a != &b && b.starts_with(a)) {
        throw Error("romanisation rules are not prefix-free: " + a + " / " + b);
      }
    }
  }
}

namespace {

template <typename Pick>
std::string render(std::string_view source, const std::vector<std::string>& letters,
                   const std::vector<std::vector<std::string>>& spellings, Pick pick) {
  std::string out;
  for (const auto& ch : unicode::split_chars(source)) {
    if (ch == " ") {
      out.push_back(' ');
      continue;
    }
    std::size_t idx = letters.size();
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (letters[i] == ch) {
        idx = i;
        break;
      }
    }
    if (idx == letters.size()) throw PreconditionError("letter outside the synthetic alphabet: " + ch);
    out += pick(spellings[idx]);
  }
  return out;
}

}  // namespace

std::string RomanizationRules::canonical(std::string_view source) const {
  return render(source, letters_, spellings_,
                [](const std::vector<std::string>& s) -> const std::string& { return s.front(); });
}

std::string RomanizationRules::sample(std::string_view source, Rng& rng) const {
  return render(source, letters_, spellings_,
                [&rng](const std::vector<std::string>& s) -> const std::string& {
                  return s[rng.uniform(s.size())];
                });
}

std::optional<std::string> RomanizationRules::inverse(std::string_view roman) const {
  std::string out;
  std::size_t pos = 0;
  while (pos < roman.size()) {
    if (roman[pos] == ' ') {
      out.push_back(' ');
      ++pos;
      continue;
    }
    bool matched = false;
    for (std::size_t i = 0; i < letters_.size() && !matched; ++i) {
      for (const auto& sp : spellings_[i]) {
        if (roman.substr(pos).starts_with(sp)) {
          out += letters_[i];
          pos += sp.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) return std::nullopt;
  }
  return out;
}

std::vector<SentencePair> generate_synthetic(const SynthConfig& config) {
  config.validate();
  const RomanizationRules rules(config.domain, config.variant_rule_count);
  const auto& letters = rules.letters();
  Rng rng(config.seed);

  auto random_word = [&] {
    const auto len = config.min_word_len +
                     static_cast<int>(rng.uniform(static_cast<std::uint64_t>(
                         config.max_word_len - config.min_word_len + 1)));
    std::string word;
    for (int i = 0; i < len; ++i) word += letters[rng.uniform(letters.size())];
    return word;
  };

  std::vector<std::string> lexicon;
  if (config.lexicon_size > 0) {
    std::set<std::string> seen;
    std::size_t attempts = 0;
    while (lexicon.size() < config.lexicon_size) {
      if (++attempts > config.lexicon_size * 100) {
        throw PreconditionError("cannot draw a lexicon of the requested size");
      }
      auto w = random_word();
      if (seen.insert(w).second) lexicon.push_back(std::move(w));
    }
  }

  std::vector<SentencePair> pairs;
  std::unordered_set<std::string> sources;
  std::size_t line_no = 0;
  std::size_t attempts = 0;
  while (sources.size() < config.group_count) {
    if (++attempts > config.group_count * 100 + 1000) {
      throw PreconditionError("cannot draw enough distinct synthetic sentences");
    }
    const auto words = config.min_words + static_cast<int>(rng.uniform(
                                              static_cast<std::uint64_t>(config.max_words - config.min_words + 1)));
    std::string sentence;
    for (int w = 0; w < words; ++w) {
      if (w > 0) sentence.push_back(' ');
      sentence += lexicon.empty() ? random_word() : lexicon[rng.uniform(lexicon.size())];
    }
    if (!sources.insert(sentence).second) continue;

    int k = 1;
    if (config.max_variants > 1 && !rng.bernoulli(config.singleton_fraction)) {
      k = 2 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(config.max_variants - 1)));
    }
    std::vector<std::string> variants = {rules.canonical(sentence)};
    std::unordered_set<std::string> distinct(variants.begin(), variants.end());
    for (int tries = 0; static_cast<int>(variants.size()) < k && tries < 50 * k; ++tries) {
      auto v = rules.sample(sentence, rng);
      if (distinct.insert(v).second) variants.push_back(std::move(v));
    }
    for (auto& v : variants) {
      pairs.push_back({sentence, std::move(v), Origin::kSynthetic, ++line_no});
    }
  }
  return pairs;
}

}  // namespace translit
