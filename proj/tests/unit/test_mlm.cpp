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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "translit/corpus.hpp"
#include "translit/mlm.hpp"

namespace fs = std::filesystem;

namespace translit {
namespace {

const std::vector<std::string> kLangs = {std::string(kRomanUrdu), std::string(kUrdu)};

Vocabulary letters_vocab() {
  std::vector<std::string> texts = {"abcdefghijklmnopqrstuvwxyz "};
  return Vocabulary::build_from_texts(texts, kLangs);
}

std::size_t count_masks(const EncodedSequence& s) {
  return static_cast<std::size_t>(std::count(s.ids.begin(), s.ids.end(), Vocabulary::kMask));
}

TEST(Masking, ExactCountOnHundredPositions) {
  const auto v = letters_vocab();
  const auto seq = encode(v, std::string(100, 'k'), kRomanUrdu, 128);
  const auto m = mask_tokens(seq, v, {.mask_rate = 0.15, .seed = 4});
  EXPECT_EQ(count_masks(m.masked), 15u);
  std::size_t labelled = 0;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (m.labels[i] == kIgnoreLabel) {
      EXPECT_EQ(m.masked.ids[i], seq.ids[i]);
    } else {
      ++labelled;
      EXPECT_EQ(m.masked.ids[i], Vocabulary::kMask);
      EXPECT_EQ(m.labels[i], seq.ids[i]);
    }
  }
  EXPECT_EQ(labelled, 15u);
  EXPECT_EQ(m.masked.attention_mask, seq.attention_mask);
}

TEST(Masking, OnlySpecialsGivesNoMasks) {
  const auto v = letters_vocab();
  const auto seq = encode(v, "", kUrdu, 16);
  const auto m = mask_tokens(seq, v, {.mask_rate = 0.5, .seed = 1});
  EXPECT_EQ(m.masked.ids, seq.ids);
  for (auto l : m.labels) EXPECT_EQ(l, kIgnoreLabel);
}

TEST(Masking, NeverMasksSpecialsAndIsDeterministic) {
  const auto v = letters_vocab();
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const auto n = rng.uniform(60);
    for (std::uint64_t i = 0; i < n; ++i) text += static_cast<char>('a' + rng.uniform(26));
    const auto seq = encode(v, text, kRomanUrdu, 48);
    const MaskingConfig cfg{.mask_rate = 0.15, .seed = rng.next_u64()};
    const auto m = mask_tokens(seq, v, cfg);
    std::size_t maskable = 0;
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      if (is_maskable(v, seq.ids[i])) {
        ++maskable;
      } else {
        EXPECT_EQ(m.masked.ids[i], seq.ids[i]);
      }
    }
    EXPECT_EQ(count_masks(m.masked), static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(maskable) + 1e-9)));
    EXPECT_EQ(mask_tokens(seq, v, cfg).masked.ids, m.masked.ids);
  }
}

TEST(Masking, SevenPositionsUniform) {
  const auto v = letters_vocab();
  const auto seq = encode(v, "abcdefg", kRomanUrdu, 16);
  std::vector<int> hits(seq.ids.size(), 0);
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) {
    const auto m = mask_tokens(seq, v, {.mask_rate = 0.15, .seed = static_cast<std::uint64_t>(s)});
    ASSERT_EQ(count_masks(m.masked), 1u);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += m.masked.ids[i] == Vocabulary::kMask;
  }
  EXPECT_EQ(hits[0], 0);  // language token
  EXPECT_EQ(hits[8], 0);  // EOS
  const double expected = trials / 7.0;
  double chi2 = 0.0;
  for (int i = 1; i <= 7; ++i) chi2 += (hits[i] - expected) * (hits[i] - expected) / expected;
  // Critical value of chi-square with 6 degrees of freedom at alpha 0.001.
  EXPECT_LT(chi2, 22.458);
}

TEST(Masking, RateValidation) {
  EXPECT_NO_THROW(MaskingConfig{.mask_rate = 0.0}.validate());
  EXPECT_THROW(MaskingConfig{.mask_rate = 1.0}.validate(), PreconditionError);
  EXPECT_THROW(MaskingConfig{.mask_rate = -0.1}.validate(), PreconditionError);
}

TEST(MlmCorpus, ModesAndSampleCount) {
  const auto pairs = generate_synthetic({.group_count = 40, .seed = 2});
  const auto roman = build_mlm_corpus(pairs, MlmCorpusMode::kRomanOnly);
  const auto both = build_mlm_corpus(pairs, MlmCorpusMode::kRomanPlusUrdu);
  EXPECT_EQ(roman.size(), pairs.size());
  EXPECT_EQ(both.size(), 2 * pairs.size());
  for (const auto& s : roman) EXPECT_EQ(s.lang, kRomanUrdu);
  EXPECT_EQ(std::count_if(both.begin(), both.end(), [](const auto& s) { return s.lang == kUrdu; }),
            static_cast<std::ptrdiff_t>(pairs.size()));
  EXPECT_EQ(parse_mlm_corpus_mode("roman_only"), MlmCorpusMode::kRomanOnly);
  EXPECT_EQ(to_string(MlmCorpusMode::kRomanPlusUrdu), "roman_plus_urdu");
}

struct Toy {
  Vocabulary vocab;
  std::vector<MonolingualSentence> corpus;
};

Toy toy_corpus(std::size_t groups, MlmCorpusMode mode, int max_words = 2) {
  SynthConfig sc{.group_count = groups, .max_variants = 1, .seed = 13, .min_words = 1, .max_words = max_words};
  const auto pairs = generate_synthetic(sc);
  return {Vocabulary::build(pairs, kLangs), build_mlm_corpus(pairs, mode)};
}

ModelConfig small_model(int vocab, int d_model = 32) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d_model;
  c.n_heads = 4;
  c.enc_layers = 3;
  c.dec_layers = 3;
  c.ffn_dim = 2 * d_model;
  c.max_len = 32;
  c.dropout_rate = 0.0;
  c.seed = 3;
  return c;
}

TEST(Pretrain, CopyTaskWithoutMasking) {
  const auto toy = toy_corpus(500, MlmCorpusMode::kRomanOnly, 1);
  ASSERT_EQ(toy.corpus.size(), 500u);
  auto m = init_model(small_model(toy.vocab.size(), 128));
  set_freeze(m, FreezePolicy::kMlm);
  PretrainConfig cfg{.epochs = 2, .batch_size = 1, .grad_accum_steps = 1, .learning_rate = 1e-3, .warmup_ratio = 0.02, .weight_decay = 0.0};
  const auto r = pretrain(m, toy.vocab, toy.corpus, cfg, {.mask_rate = 0.0});
  ASSERT_EQ(r.epoch_loss.size(), 2u);
  EXPECT_LT(r.epoch_loss.back(), 0.1);
}

TEST(Pretrain, LossHalvesAndFrozenTensorsHold) {
  const auto toy = toy_corpus(200, MlmCorpusMode::kRomanPlusUrdu);
  auto m = init_model(small_model(toy.vocab.size(), 64));
  set_freeze(m, FreezePolicy::kMlm);
  const auto before = m;
  const auto dir = fs::temp_directory_path() / ("translit_mlm_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  PretrainConfig cfg{.epochs = 4, .batch_size = 4, .grad_accum_steps = 1, .learning_rate = 2e-3, .warmup_ratio = 0.05};
  const auto r = pretrain(m, toy.vocab, toy.corpus, cfg, {.mask_rate = 0.15, .seed = 1}, dir);
  ASSERT_EQ(r.epoch_loss.size(), 4u);
  EXPECT_LT(r.epoch_loss.back(), 0.5 * r.initial_loss);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (m.frozen[i]) EXPECT_EQ(m.params[i].data, before.params[i].data) << m.layout.tensors[i].name;
  }

  ASSERT_EQ(r.checkpoints.size(), 4u);
  const auto last = load_checkpoint(r.checkpoints.back());
  EXPECT_EQ(last.tags.at("phase"), "mlm");
  EXPECT_EQ(last.tags.at("epoch"), "4");
  EXPECT_EQ(last.params[0].data, m.params[0].data);
  std::ifstream csv(dir / "loss.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "epoch,split,loss");
  EXPECT_TRUE(lines[1].starts_with("0,eval,"));
  EXPECT_TRUE(lines[5].starts_with("4,train,"));
  fs::remove_all(dir);
}

TEST(Pretrain, Deterministic) {
  const auto toy = toy_corpus(60, MlmCorpusMode::kRomanPlusUrdu);
  PretrainConfig cfg{.epochs = 1, .batch_size = 8, .grad_accum_steps = 2, .learning_rate = 1e-3, .seed = 9};
  auto run = [&] {
    auto m = init_model(small_model(toy.vocab.size()));
    set_freeze(m, FreezePolicy::kMlm);
    pretrain(m, toy.vocab, toy.corpus, cfg, {.seed = 2});
    return serialize_checkpoint(m);
  };
  EXPECT_EQ(run(), run());
}

TEST(Pretrain, Preconditions) {
  const auto toy = toy_corpus(20, MlmCorpusMode::kRomanOnly);
  auto m = init_model(small_model(toy.vocab.size()));
  EXPECT_THROW(pretrain(m, toy.vocab, toy.corpus, {}, {}), PreconditionError);
  set_freeze(m, FreezePolicy::kMlm);
  const std::vector<MonolingualSentence> empty;
  EXPECT_THROW(pretrain(m, toy.vocab, empty, {}, {}), PreconditionError);
}

}  // namespace
}  // namespace translit
