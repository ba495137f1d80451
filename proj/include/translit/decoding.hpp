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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "translit/model.hpp"
#include "translit/tokenizer.hpp"
#include "translit/transformer.hpp"

namespace translit {

struct DecodeOptions {
  /// 1 selects greedy decoding.
  int beam_width = 1;
  /// Bound on decoder positions, the language token included.
  int max_len = kDefaultMaxLen;
  /// Sources decoded together in one engine pass.
  int batch_size = 64;
  /// Beam score is log-prob / length^alpha.
  double length_penalty = 1.0;
};

/// Logits for every position of `tgt_prefix` given `src`; padding removed.
TransformerEngine<float>::Mat forward(const ModelState& model, const EncodedSequence& src,
                                      const EncodedSequence& tgt_prefix, Mode mode,
                                      std::uint64_t dropout_seed = 0);

/// Greedy decoding from [target_lang]: argmax with ties to the lowest id,
/// stopping at EOS or once max_len positions are used. Returned ids exclude
/// the language token and EOS.
std::vector<std::vector<TokenId>> greedy_decode_ids(const ModelState& model,
                                                    std::span<const std::vector<TokenId>> sources,
                                                    TokenId target_lang, int max_len);

std::vector<TokenId> beam_search_ids(const ModelState& model, const std::vector<TokenId>& source,
                                     TokenId target_lang, const DecodeOptions& options);

std::string decode_greedy(const ModelState& model, const Vocabulary& vocab,
                          const EncodedSequence& src, std::string_view target_lang, int max_len);

/// Encodes each text under `source_lang`, decodes into `target_lang`.
std::vector<std::string> transliterate(const ModelState& model, const Vocabulary& vocab,
                                       std::span<const std::string> texts,
                                       std::string_view source_lang, std::string_view target_lang,
                                       const DecodeOptions& options = {});

}  // namespace translit
