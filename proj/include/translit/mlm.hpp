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
#include <vector>

#include "translit/corpus.hpp"
#include "translit/model.hpp"
#include "translit/tokenizer.hpp"
#include "translit/training.hpp"

namespace translit {

struct MaskingConfig {
  /// Fraction of maskable positions replaced by MASK. 0 disables masking.
  double mask_rate = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

/// True for positions that carry sentence content: every id except PAD,
/// BOS, EOS, MASK and the language tokens.
bool is_maskable(const Vocabulary& vocab, TokenId id);

struct MaskedSequence {
  EncodedSequence masked;
  /// Original id at masked positions, kIgnoreLabel elsewhere.
  std::vector<TokenId> labels;
};

/// Replaces exactly floor(rate * maskable) positions, drawn uniformly
/// without replacement, by MASK. Deterministic in `cfg.seed`.
MaskedSequence mask_tokens(const EncodedSequence& seq, const Vocabulary& vocab,
                           const MaskingConfig& cfg);

enum class MlmCorpusMode { kRomanOnly, kRomanPlusUrdu };

std::string_view to_string(MlmCorpusMode mode);
MlmCorpusMode parse_mlm_corpus_mode(std::string_view name);

struct MonolingualSentence {
  std::string text;
  std::string lang;
};

/// Monolingual samples from parallel pairs: the Roman side only, or both
/// sides as independent samples (2N for N pairs).
std::vector<MonolingualSentence> build_mlm_corpus(std::span<const SentencePair> pairs,
                                                  MlmCorpusMode mode);

struct PretrainConfig {
  MlmCorpusMode corpus_mode = MlmCorpusMode::kRomanPlusUrdu;
  int epochs = 4;
  int batch_size = 128;
  int grad_accum_steps = 4;
  double learning_rate = 1e-4;
  double warmup_ratio = 0.10;
  double weight_decay = 0.02;
  double max_grad_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  TrainLoopConfig loop() const;
};

struct PretrainResult {
  /// Mean reconstruction loss before training (eval mode, epoch-1 masks).
  double initial_loss = 0.0;
  /// Mean training loss per epoch, epochs 1..N.
  std::vector<double> epoch_loss;
  std::vector<std::filesystem::path> checkpoints;
};

/// Denoising pretraining: the encoder reads the masked sentence and the
/// decoder reconstructs the original one. The model must carry the MLM
/// freeze policy. With a non-empty `output_dir`, writes loss.csv
/// (epoch,split,loss) and one checkpoint per epoch tagged phase=mlm.
PretrainResult pretrain(ModelState& model, const Vocabulary& vocab,
                        std::span<const MonolingualSentence> corpus, const PretrainConfig& cfg,
                        const MaskingConfig& masking,
                        const std::filesystem::path& output_dir = {});

}  // namespace translit
