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

#include <cmath>

#include "translit/training.hpp"
#include "translit/transformer.hpp"

namespace translit {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 9;
  c.d_model = 8;
  c.n_heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.ffn_dim = 16;
  c.max_len = 16;
  c.dropout_rate = 0.1;
  c.seed = 7;
  return c;
}

std::vector<SeqExample> tiny_batch() {
  return {
      {{5, 7, 8, 2}, {6, 7, 7}, {7, 7, 2}},
      {{5, 8, 2}, {6, 8, 7, 8}, {8, 7, kIgnoreLabel, 2}},
  };
}

double summed_loss(const ModelState& m, const ParamBuffers<double>& params,
                   std::span<const SeqExample> batch, Mode mode, std::uint64_t seed) {
  auto grads = zero_like<double>(m);
  return accumulate_gradients<double>(m, params, batch, mode, seed, grads).sum;
}

void expect_gradients_match(Mode mode) {
  const ModelState m = init_model(tiny_config());
  auto params = copy_params<double>(m);
  const auto batch = tiny_batch();
  auto grads = zero_like<double>(m);
  accumulate_gradients<double>(m, params, batch, mode, 99, grads);

  Rng pick(3);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!m.layout.tensors[t].learnable) continue;
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t k = pick.uniform(params[t].size());
      const double saved = params[t][k];
      params[t][k] = saved + h;
      const double up = summed_loss(m, params, batch, mode, 99);
      params[t][k] = saved - h;
      const double down = summed_loss(m, params, batch, mode, 99);
      params[t][k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - grads[t][k]) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
      EXPECT_LT(err, 1e-6) << m.layout.tensors[t].name << "[" << k << "] numeric " << numeric
                           << " analytic " << grads[t][k];
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(TransformerGradients, MatchFiniteDifferencesInEval) { expect_gradients_match(Mode::kEval); }

TEST(TransformerGradients, MatchFiniteDifferencesWithDropout) {
  expect_gradients_match(Mode::kTrain);
}

TEST(TransformerForward, PackedBatchMatchesSingles) {
  const ModelState m = init_model(tiny_config());
  const auto batch = tiny_batch();
  TransformerEngine<float> engine(m.config, m.layout, m.param_ptrs());
  const auto packed = engine.forward(batch, Mode::kEval, 0, nullptr);
  Eigen::Index row = 0;
  for (const auto& ex : batch) {
    const auto single = engine.forward(std::span(&ex, 1), Mode::kEval, 0, nullptr);
    for (Eigen::Index r = 0; r < single.rows(); ++r, ++row) {
      for (Eigen::Index c = 0; c < single.cols(); ++c) {
        EXPECT_NEAR(single(r, c), packed(row, c), 1e-5);
      }
    }
  }
}

TEST(TransformerDecode, IncrementalMatchesFullForward) {
  const ModelState m = init_model(tiny_config());
  TransformerEngine<float> engine(m.config, m.layout, m.param_ptrs());
  const std::vector<std::vector<TokenId>> sources = {{5, 7, 8, 2}, {5, 8, 2}};
  const std::vector<TokenId> prefix = {6, 8, 7, 7, 8};
  auto states = engine.start_decoding(sources);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    SeqExample ex{sources[s], prefix, std::vector<TokenId>(prefix.size(), 2)};
    const auto full = engine.forward(std::span(&ex, 1), Mode::kEval, 0, nullptr);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      typename TransformerEngine<float>::DecodeState* st = &states[s];
      const TokenId tok = prefix[i];
      const auto step = engine.decode_step(std::span(&st, 1), std::span(&tok, 1));
      for (Eigen::Index c = 0; c < step.cols(); ++c) {
        EXPECT_NEAR(step(0, c), full(static_cast<Eigen::Index>(i), c), 1e-4);
      }
    }
  }
}

TEST(TransformerForward, DropoutIsSeededAndEvalIsDeterministic) {
  const ModelState m = init_model(tiny_config());
  const auto batch = tiny_batch();
  TransformerEngine<float> engine(m.config, m.layout, m.param_ptrs());
  const auto a = engine.forward(batch, Mode::kTrain, 5, nullptr);
  const auto b = engine.forward(batch, Mode::kTrain, 5, nullptr);
  const auto c = engine.forward(batch, Mode::kTrain, 6, nullptr);
  const auto e1 = engine.forward(batch, Mode::kEval, 5, nullptr);
  const auto e2 = engine.forward(batch, Mode::kEval, 6, nullptr);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(e1, e2);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab) {
  TransformerEngine<double>::Mat logits = TransformerEngine<double>::Mat::Zero(3, 9);
  const std::vector<TokenId> labels = {1, kIgnoreLabel, 4};
  const auto stats = cross_entropy<double>(logits, labels);
  EXPECT_EQ(stats.tokens, 2u);
  EXPECT_NEAR(stats.mean(), std::log(9.0), 1e-12);
}

TEST(LinearWarmupSchedule, WarmupPeakDecay) {
  const LinearWarmupSchedule s(1.0, 1000, 0.1);
  EXPECT_EQ(s.warmup_steps(), 100);
  EXPECT_NEAR(s.at(50), 0.5, 1e-12);
  EXPECT_NEAR(s.at(100), 1.0, 1e-12);
  EXPECT_NEAR(s.at(550), 0.5, 1e-12);
  EXPECT_NEAR(s.at(1000), 0.0, 1e-12);
  EXPECT_EQ(s.at(0), 0.0);
}

}  // namespace
}  // namespace translit
