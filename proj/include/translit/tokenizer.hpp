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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "translit/corpus.hpp"

namespace translit {

using TokenId = int;

inline constexpr std::string_view kRomanUrdu = "roman-ur";
inline constexpr std::string_view kUrdu = "ur";
inline constexpr int kDefaultMaxLen = 128;

/// Rendering of an out-of-vocabulary character after decoding.
inline constexpr std::string_view kUnkGlyph = "\xEF\xBF\xBD";  // U+FFFD

/// Character-level symbol table. Ids are dense: the five specials first
/// (PAD is 0), then one conditioning token per language, then characters
/// in code point order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kMask = 4;
  static constexpr int kNumSpecials = 5;

  Vocabulary() = default;

  static Vocabulary build(std::span<const SentencePair> corpus,
                          std::span<const std::string> langs);
  /// Builds from plain texts (both scripts may be mixed).
  static Vocabulary build_from_texts(std::span<const std::string> texts,
                                     std::span<const std::string> langs);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static Vocabulary parse(std::string_view text);
  std::string serialize() const;

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(TokenId id) const;
  /// Id of a character symbol, or kUnk.
  TokenId char_id(std::string_view ch) const;
  /// Id of the conditioning token for `lang`; throws PreconditionError if
  /// the language is not registered.
  TokenId lang_id(std::string_view lang) const;
  bool has_lang(std::string_view lang) const;
  bool is_lang(TokenId id) const;
  bool is_special(TokenId id) const { return id < kNumSpecials || is_lang(id); }
  const std::vector<std::string>& langs() const { return langs_; }

  static std::string lang_token(std::string_view lang);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_ && a.langs_ == b.langs_;
  }

 private:
  void index();

  std::vector<std::string> symbols_;
  std::vector<std::string> langs_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct EncodedSequence {
  std::vector<TokenId> ids;
  std::vector<int> attention_mask;
  std::string lang;

  /// Number of non-PAD positions.
  int length() const;
};

/// Layout [LANG, c1..ck, EOS, PAD...], truncated so the result has exactly
/// `max_len` positions and still ends its content with EOS.
EncodedSequence encode(const Vocabulary& vocab, std::string_view text, std::string_view lang,
                       int max_len = kDefaultMaxLen);

/// Concatenates character symbols; specials are dropped and UNK renders
/// as kUnkGlyph. Throws PreconditionError on out-of-range ids.
std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids);

}  // namespace translit
