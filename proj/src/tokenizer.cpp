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

#include "translit/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "translit/common.hpp"
#include "translit/unicode.hpp"

namespace translit {

namespace {

const char* const kSpecialSymbols[Vocabulary::kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<unk>",
                                                               "<mask>"};

bool looks_like_lang_token(std::string_view s) {
  return s.size() > 4 && s.starts_with("__") && s.ends_with("__");
}

}  // namespace

std::string Vocabulary::lang_token(std::string_view lang) {
  return "__" + std::string(lang) + "__";
}

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!ids_.emplace(symbols_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate vocabulary symbol: " + symbols_[i]);
    }
  }
}

Vocabulary Vocabulary::build_from_texts(std::span<const std::string> texts,
                                        std::span<const std::string> langs) {
  if (texts.empty()) throw PreconditionError("cannot build a vocabulary from an empty corpus");
  std::set<char32_t> chars;
  for (const auto& t : texts) {
    for (char32_t cp : unicode::to_utf32(t)) chars.insert(cp);
  }
  Vocabulary v;
  v.symbols_.assign(std::begin(kSpecialSymbols), std::end(kSpecialSymbols));
  for (const auto& lang : langs) {
    if (std::find(v.langs_.begin(), v.langs_.end(), lang) != v.langs_.end()) continue;
    v.langs_.push_back(lang);
    v.symbols_.push_back(lang_token(lang));
  }
  for (char32_t cp : chars) v.symbols_.push_back(unicode::to_utf8(std::u32string(1, cp)));
  v.index();
  return v;
}

Vocabulary Vocabulary::build(std::span<const SentencePair> corpus,
                             std::span<const std::string> langs) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size() * 2);
  for (const auto& p : corpus) {
    texts.push_back(p.source);
    texts.push_back(p.target);
  }
  return build_from_texts(texts, langs);
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id < 0 || id >= size()) throw PreconditionError("token id out of range: " + std::to_string(id));
  return symbols_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::char_id(std::string_view ch) const {
  auto it = ids_.find(std::string(ch));
  if (it == ids_.end() || it->second < kNumSpecials + static_cast<int>(langs_.size())) return kUnk;
  return it->second;
}

TokenId Vocabulary::lang_id(std::string_view lang) const {
  auto it = ids_.find(lang_token(lang));
  if (it == ids_.end() || !has_lang(lang)) {
    throw PreconditionError("unknown language tag '" + std::string(lang) + "'");
  }
  return it->second;
}

bool Vocabulary::has_lang(std::string_view lang) const {
  return std::find(langs_.begin(), langs_.end(), lang) != langs_.end();
}

bool Vocabulary::is_lang(TokenId id) const {
  return id >= kNumSpecials && id < kNumSpecials + static_cast<int>(langs_.size());
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& s : symbols_) {
    out += s;
    out.push_back('\n');
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) throw FormatError("vocabulary file must end with a newline");
    v.symbols_.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (v.symbols_.size() < kNumSpecials) throw FormatError("vocabulary is missing special tokens");
  for (int i = 0; i < kNumSpecials; ++i) {
    if (v.symbols_[static_cast<std::size_t>(i)] != kSpecialSymbols[i]) {
      throw FormatError("special token " + std::to_string(i) + " must be " + kSpecialSymbols[i]);
    }
  }
  for (std::size_t i = kNumSpecials; i < v.symbols_.size() && looks_like_lang_token(v.symbols_[i]);
       ++i) {
    const auto& s = v.symbols_[i];
    v.langs_.push_back(s.substr(2, s.size() - 4));
  }
  for (std::size_t i = kNumSpecials + v.langs_.size(); i < v.symbols_.size(); ++i) {
    if (unicode::length(v.symbols_[i]) != 1) {
      throw FormatError("line " + std::to_string(i + 1) + ": expected a single character");
    }
  }
  v.index();
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << serialize();
}

int EncodedSequence::length() const {
  return static_cast<int>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

EncodedSequence encode(const Vocabulary& vocab, std::string_view text, std::string_view lang,
                       int max_len) {
  if (max_len < 2) throw PreconditionError("max_len must be at least 2");
  EncodedSequence seq;
  seq.lang = std::string(lang);
  seq.ids.reserve(static_cast<std::size_t>(max_len));
  seq.ids.push_back(vocab.lang_id(lang));
  for (const auto& ch : unicode::split_chars(text)) {
    if (static_cast<int>(seq.ids.size()) == max_len - 1) break;
    seq.ids.push_back(vocab.char_id(ch));
  }
  seq.ids.push_back(Vocabulary::kEos);
  seq.attention_mask.assign(seq.ids.size(), 1);
  seq.ids.resize(static_cast<std::size_t>(max_len), Vocabulary::kPad);
  seq.attention_mask.resize(static_cast<std::size_t>(max_len), 0);
  return seq;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id < 0 || id >= vocab.size()) {
      throw PreconditionError("token id out of range: " + std::to_string(id));
    }
    if (id == Vocabulary::kUnk) {
      out += kUnkGlyph;
    } else if (!vocab.is_special(id)) {
      out += vocab.symbol(id);
    }
  }
  return out;
}

}  // namespace translit
