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

#include "translit/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace translit {

namespace {

using Engine = TransformerEngine<float>;

TokenId argmax_lowest(const Engine::Mat& logits, Eigen::Index row) {
  TokenId best = 0;
  float best_value = logits(row, 0);
  for (Eigen::Index c = 1; c < logits.cols(); ++c) {
    if (logits(row, c) > best_value) {
      best_value = logits(row, c);
      best = static_cast<TokenId>(c);
    }
  }
  return best;
}

std::vector<double> log_softmax(const Engine::Mat& logits, Eigen::Index row) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(row, c)));
  double sum = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(logits(row, c) - mx);
  const double log_z = mx + std::log(sum);
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out[static_cast<std::size_t>(c)] = logits(row, c) - log_z;
  return out;
}

int checked_max_len(const ModelState& model, int max_len) {
  if (max_len < 1) throw PreconditionError("max_len must be positive");
  return std::min(max_len, model.config.max_len);
}

}  // namespace

Engine::Mat forward(const ModelState& model, const EncodedSequence& src,
                    const EncodedSequence& tgt_prefix, Mode mode, std::uint64_t dropout_seed) {
  SeqExample ex;
  ex.src = unpadded(src);
  ex.dec_in = unpadded(tgt_prefix);
  ex.labels.assign(ex.dec_in.size(), kIgnoreLabel);
  const Engine engine(model.config, model.layout, model.param_ptrs());
  return engine.forward(std::span(&ex, 1), mode, dropout_seed, nullptr);
}

std::vector<std::vector<TokenId>> greedy_decode_ids(const ModelState& model,
                                                    std::span<const std::vector<TokenId>> sources,
                                                    TokenId target_lang, int max_len) {
  max_len = checked_max_len(model, max_len);
  const Engine engine(model.config, model.layout, model.param_ptrs());
  auto states = engine.start_decoding(sources);
  std::vector<std::vector<TokenId>> out(sources.size());
  std::vector<std::size_t> live(sources.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;
  std::vector<TokenId> next(sources.size(), target_lang);
  // The language token takes the first of the max_len positions.
  for (int position = 1; position < max_len && !live.empty(); ++position) {
    std::vector<Engine::DecodeState*> ptrs;
    std::vector<TokenId> tokens;
    for (std::size_t i : live) {
      ptrs.push_back(&states[i]);
      tokens.push_back(next[i]);
    }
    const auto logits = engine.decode_step(ptrs, tokens);
    std::vector<std::size_t> still;
    for (std::size_t r = 0; r < live.size(); ++r) {
      const std::size_t i = live[r];
      const TokenId tok = argmax_lowest(logits, static_cast<Eigen::Index>(r));
      if (tok == Vocabulary::kEos) continue;
      out[i].push_back(tok);
      next[i] = tok;
      still.push_back(i);
    }
    live = std::move(still);
  }
  return out;
}

std::vector<TokenId> beam_search_ids(const ModelState& model, const std::vector<TokenId>& source,
                                     TokenId target_lang, const DecodeOptions& options) {
  if (options.beam_width < 1) throw PreconditionError("beam_width must be positive");
  const int max_len = checked_max_len(model, options.max_len);
  const Engine engine(model.config, model.layout, model.param_ptrs());

  struct Hypothesis {
    std::vector<TokenId> tokens;
    double log_prob = 0.0;
    Engine::DecodeState state;
  };
  auto normalized = [&](const std::vector<TokenId>& tokens, double log_prob) {
    const double len = static_cast<double>(tokens.size() + 1);
    return log_prob / std::pow(len, options.length_penalty);
  };

  std::vector<Hypothesis> beams(1);
  beams[0].state = std::move(engine.start_decoding(std::span(&source, 1))[0]);
  std::vector<TokenId> last = {target_lang};
  std::vector<std::pair<double, std::vector<TokenId>>> finished;

  for (int position = 1; position < max_len && !beams.empty(); ++position) {
    std::vector<Engine::DecodeState*> ptrs;
    for (auto& b : beams) ptrs.push_back(&b.state);
    const auto logits = engine.decode_step(ptrs, last);

    struct Candidate {
      double log_prob;
      std::size_t beam;
      TokenId token;
    };
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const auto lp = log_softmax(logits, static_cast<Eigen::Index>(b));
      for (std::size_t t = 0; t < lp.size(); ++t) {
        candidates.push_back({beams[b].log_prob + lp[t], b, static_cast<TokenId>(t)});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });

    std::vector<Hypothesis> next;
    last.clear();
    const bool final_position = position + 1 == max_len;
    for (const auto& c : candidates) {
      if (next.size() == static_cast<std::size_t>(options.beam_width)) break;
      const auto& parent = beams[c.beam];
      if (c.token == Vocabulary::kEos || final_position) {
        auto tokens = parent.tokens;
        if (c.token != Vocabulary::kEos) tokens.push_back(c.token);
        finished.emplace_back(normalized(tokens, c.log_prob), std::move(tokens));
        continue;
      }
      Hypothesis h{parent.tokens, c.log_prob, parent.state};
      h.tokens.push_back(c.token);
      last.push_back(c.token);
      next.push_back(std::move(h));
    }
    beams = std::move(next);
    if (finished.size() >= static_cast<std::size_t>(options.beam_width)) {
      const double best_done =
          std::max_element(finished.begin(), finished.end(),
                           [](const auto& a, const auto& b) { return a.first < b.first; })->first;
      bool open_better = false;
      for (const auto& b : beams) open_better |= normalized(b.tokens, b.log_prob) > best_done;
      if (!open_better) break;
    }
  }
  for (const auto& b : beams) finished.emplace_back(normalized(b.tokens, b.log_prob), b.tokens);
  if (finished.empty()) return {};
  return std::max_element(finished.begin(), finished.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; })
      ->second;
}

std::string decode_greedy(const ModelState& model, const Vocabulary& vocab,
                          const EncodedSequence& src, std::string_view target_lang, int max_len) {
  const std::vector<std::vector<TokenId>> sources = {unpadded(src)};
  const auto ids = greedy_decode_ids(model, sources, vocab.lang_id(target_lang), max_len);
  return decode(vocab, ids[0]);
}

std::vector<std::string> transliterate(const ModelState& model, const Vocabulary& vocab,
                                       std::span<const std::string> texts,
                                       std::string_view source_lang, std::string_view target_lang,
                                       const DecodeOptions& options) {
  if (options.batch_size < 1) throw PreconditionError("batch_size must be positive");
  const TokenId lang = vocab.lang_id(target_lang);
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size();
       start += static_cast<std::size_t>(options.batch_size)) {
    const std::size_t end = std::min(texts.size(), start + static_cast<std::size_t>(options.batch_size));
    std::vector<std::vector<TokenId>> sources;
    for (std::size_t i = start; i < end; ++i) {
      sources.push_back(unpadded(encode(vocab, texts[i], source_lang, model.config.max_len)));
    }
    if (options.beam_width == 1) {
      for (const auto& ids : greedy_decode_ids(model, sources, lang, options.max_len)) {
        out.push_back(decode(vocab, ids));
      }
    } else {
      for (const auto& src : sources) out.push_back(decode(vocab, beam_search_ids(model, src, lang, options)));
    }
  }
  return out;
}

}  // namespace translit
