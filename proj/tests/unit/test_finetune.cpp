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
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "translit/corpus.hpp"
#include "translit/finetune.hpp"

namespace translit {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kLangs = {std::string(kRomanUrdu), std::string(kUrdu)};

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("translit_ft_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

// Vocabulary of 9: five specials, two language tokens (5, 6), two characters (7, 8).
ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 9;
  c.d_model = 8;
  c.n_heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.ffn_dim = 16;
  c.max_len = 16;
  c.dropout_rate = 0.0;
  c.seed = 5;
  return c;
}

std::vector<SeqExample> random_examples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SeqExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    SeqExample ex;
    ex.src.push_back(5);
    ex.dec_in.push_back(6);
    const auto src_len = 1 + rng.uniform(6);
    for (std::size_t k = 0; k < src_len; ++k) ex.src.push_back(static_cast<TokenId>(7 + rng.uniform(2)));
    ex.src.push_back(Vocabulary::kEos);
    const auto tgt_len = 1 + rng.uniform(8);
    for (std::size_t k = 0; k < tgt_len; ++k) {
      const auto c = static_cast<TokenId>(7 + rng.uniform(2));
      ex.labels.push_back(c);
      ex.dec_in.push_back(c);
    }
    ex.labels.push_back(Vocabulary::kEos);
    out.push_back(std::move(ex));
  }
  return out;
}

ParamBuffers<double> token_weighted_gradients(const ModelState& m, std::span<const SeqExample> all,
                                              std::span<const std::size_t> cuts) {
  const auto params = copy_params<double>(m);
  auto grads = zero_like<double>(m);
  LossStats total;
  std::size_t start = 0;
  for (std::size_t cut : cuts) {
    total += accumulate_gradients<double>(m, params, all.subspan(start, cut - start), Mode::kTrain,
                                          17 + start, grads);
    start = cut;
  }
  scale_gradients(grads, 1.0 / static_cast<double>(total.tokens));
  return grads;
}

double relative_difference(const ParamBuffers<double>& a, const ParamBuffers<double>& b) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t k = 0; k < a[t].size(); ++k) {
      diff += (a[t][k] - b[t][k]) * (a[t][k] - b[t][k]);
      norm += b[t][k] * b[t][k];
    }
  }
  return std::sqrt(diff) / std::sqrt(norm);
}

TEST(GradientAccumulation, FourMicroBatchesOfSixteenMatchOneOfSixtyFour) {
  const auto m = init_model(tiny_config());
  const auto examples = random_examples(64, 1);
  const std::vector<std::size_t> whole = {64};
  const std::vector<std::size_t> quarters = {16, 32, 48, 64};
  const auto big = token_weighted_gradients(m, examples, whole);
  const auto accumulated = token_weighted_gradients(m, examples, quarters);
  // Key-projection biases have an exactly zero gradient (softmax is shift
  // invariant), so element errors are measured against the largest entry.
  double scale = 0.0;
  for (const auto& g : big) {
    for (double x : g) scale = std::max(scale, std::abs(x));
  }
  ASSERT_GT(scale, 0.0);
  for (std::size_t t = 0; t < big.size(); ++t) {
    for (std::size_t k = 0; k < big[t].size(); ++k) {
      EXPECT_LT(std::abs(big[t][k] - accumulated[t][k]) / scale, 1e-6) << m.layout.tensors[t].name;
    }
  }
  EXPECT_LT(relative_difference(accumulated, big), 1e-6);
}

TEST(GradientAccumulation, ArbitrarySplitsAgree) {
  const auto m = init_model(tiny_config());
  const auto examples = random_examples(40, 2);
  const std::vector<std::size_t> whole = {40};
  const auto big = token_weighted_gradients(m, examples, whole);
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i < 40; ++i) {
      if (rng.bernoulli(0.2)) cuts.push_back(i);
    }
    cuts.push_back(40);
    EXPECT_LT(relative_difference(token_weighted_gradients(m, examples, cuts), big), 1e-6);
  }
}

TEST(GradientAccumulation, UnweightedAveragingWouldDiffer) {
  // Sanity check that the split examples are unequal in token count, so the
  // agreement above is not an artefact of equal-size micro-batches.
  const auto examples = random_examples(64, 1);
  std::size_t first = 0, second = 0;
  for (std::size_t i = 0; i < 16; ++i) first += examples[i].labels.size();
  for (std::size_t i = 16; i < 32; ++i) second += examples[i].labels.size();
  EXPECT_NE(first, second);
}

TEST(FinetuneSchedule, WarmupThenLinearDecay) {
  const LinearWarmupSchedule s(2e-3, 1000, 0.10);
  EXPECT_NEAR(s.at(50), 0.5 * 2e-3, 1e-15);
  EXPECT_NEAR(s.at(100), 2e-3, 1e-15);
  EXPECT_NEAR(s.at(1), 2e-3 / 100, 1e-15);
  EXPECT_GE(s.at(1000), 0.0);
  double previous = 0.0;
  for (std::int64_t step = 1; step <= 100; ++step) {
    EXPECT_GT(s.at(step), previous);
    previous = s.at(step);
  }
  for (std::int64_t step = 101; step <= 1000; ++step) {
    EXPECT_LT(s.at(step), previous);
    previous = s.at(step);
  }
}

TEST(FinetuneSchedule, StepsPerEpochCountsOptimizerSteps) {
  TrainLoopConfig c;
  c.batch_size = 64;
  c.grad_accum_steps = 4;
  EXPECT_EQ(Trainer::steps_per_epoch(256, c), 1);
  EXPECT_EQ(Trainer::steps_per_epoch(257, c), 2);
  EXPECT_EQ(Trainer::steps_per_epoch(1, c), 1);
}

TEST(FinetuneConfig, Validation) {
  FinetuneConfig ok;
  EXPECT_NO_THROW(ok.validate());
  FinetuneConfig late = ok;
  late.phase1_checkpoint_epoch = 16;
  EXPECT_THROW(late.validate(), PreconditionError);
  FinetuneConfig eval_out_of_range = ok;
  eval_out_of_range.phase2_eval_epochs = {6};
  EXPECT_THROW(eval_out_of_range.validate(), PreconditionError);
  FinetuneConfig no_batch = ok;
  no_batch.batch_size = 0;
  EXPECT_THROW(no_batch.validate(), PreconditionError);
  EXPECT_EQ(parse_direction("ur2roman"), Direction::kUr2Roman);
  EXPECT_EQ(to_string(Direction::kRoman2Ur), "roman2ur");
  EXPECT_THROW(parse_direction("en2fr"), PreconditionError);
}

TEST(Direction, SelectsSidesAndLanguages) {
  const SentencePair p{"اب", "ab"};
  EXPECT_EQ(input_text(p, Direction::kRoman2Ur), "ab");
  EXPECT_EQ(output_text(p, Direction::kRoman2Ur), "اب");
  EXPECT_EQ(input_text(p, Direction::kUr2Roman), "اب");
  EXPECT_EQ(input_lang(Direction::kRoman2Ur), kRomanUrdu);
  EXPECT_EQ(output_lang(Direction::kRoman2Ur), kUrdu);
}

struct SmallTask {
  std::vector<SentencePair> train_a, train_b;
  std::vector<EvalSet> evals;
  Vocabulary vocab;
};

SmallTask small_task(std::size_t n_a, std::size_t n_b, int max_words) {
  SynthConfig a{.group_count = n_a + 100, .max_variants = 1, .seed = 11, .min_words = 1,
                .max_words = max_words, .singleton_fraction = 1.0};
  SynthConfig b = a;
  b.group_count = n_b + 100;
  b.seed = 12;
  b.domain = SynthDomain::kB;
  const auto pa = generate_synthetic(a);
  const auto pb = generate_synthetic(b);
  SmallTask t;
  t.train_a.assign(pa.begin(), pa.begin() + static_cast<std::ptrdiff_t>(n_a));
  t.train_b.assign(pb.begin(), pb.begin() + static_cast<std::ptrdiff_t>(n_b));
  t.evals = {{"A", {pa.begin() + static_cast<std::ptrdiff_t>(n_a), pa.end()}},
             {"B", {pb.begin() + static_cast<std::ptrdiff_t>(n_b), pb.end()}}};
  std::vector<SentencePair> all = pa;
  all.insert(all.end(), pb.begin(), pb.end());
  t.vocab = Vocabulary::build(all, kLangs);
  return t;
}

ModelConfig model_for(const Vocabulary& vocab, int d_model, std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.d_model = d_model;
  c.n_heads = 4;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.ffn_dim = 2 * d_model;
  c.max_len = 48;
  c.seed = seed;
  return c;
}

FinetuneConfig quick_config() {
  FinetuneConfig c;
  c.phase1_epochs = 3;
  c.phase1_checkpoint_epoch = 2;
  c.phase2_epochs = 2;
  c.phase2_eval_epochs = {2};
  c.batch_size = 16;
  c.grad_accum_steps = 1;
  c.learning_rate = 2e-3;
  c.seed = 4;
  return c;
}

TEST(TrainPhase, Preconditions) {
  const auto task = small_task(40, 10, 1);
  auto m = init_model(model_for(task.vocab, 16, 1));
  const auto cfg = quick_config();
  const std::vector<SentencePair> none;
  EXPECT_THROW(train_phase(m, task.vocab, none, cfg, Phase::kPhase1, 1, task.evals), PreconditionError);
  set_freeze(m, FreezePolicy::kMlm);
  EXPECT_THROW(train_phase(m, task.vocab, task.train_a, cfg, Phase::kPhase1, 1, task.evals),
               PreconditionError);
}

TEST(TrainPhase, OneRecordPerEpochAndRepeatableEvaluation) {
  const auto task = small_task(120, 10, 1);
  auto m = init_model(model_for(task.vocab, 16, 1));
  const auto dir = scratch_dir("phase");
  const auto rec = train_phase(m, task.vocab, task.train_a, quick_config(), Phase::kPhase1, 2,
                               task.evals, dir);
  ASSERT_EQ(rec.epochs.size(), 2u);
  for (int e = 1; e <= 2; ++e) {
    const auto& r = rec.at_epoch(e);
    ASSERT_TRUE(r.train_loss.has_value());
    EXPECT_TRUE(std::isfinite(*r.train_loss));
    EXPECT_EQ(r.char_bleu.size(), 2u);
    EXPECT_TRUE(fs::exists(r.checkpoint));
  }
  EXPECT_LT(*rec.at_epoch(2).train_loss, *rec.at_epoch(1).train_loss);
  const double again = evaluate_char_bleu(m, task.vocab, task.evals[0], Direction::kRoman2Ur);
  EXPECT_EQ(again, rec.at_epoch(2).char_bleu.at("A"));
  EXPECT_EQ(again, evaluate_char_bleu(m, task.vocab, task.evals[0], Direction::kRoman2Ur));
  EXPECT_TRUE(fs::exists(dir / "loss.csv"));
  EXPECT_TRUE(fs::exists(dir / "eval.csv"));
  std::ifstream in(dir / "record.json");
  const auto parsed = train_run_record_from_json(nlohmann::json::parse(in));
  EXPECT_EQ(parsed.epochs.size(), 2u);
  EXPECT_EQ(parsed.epochs[1].char_bleu, rec.epochs[1].char_bleu);
  fs::remove_all(dir);
}

TEST(RunSchedule, EpochZeroReproducesChosenCheckpointAndCheckpointsReload) {
  const auto task = small_task(150, 60, 1);
  const auto initial = init_model(model_for(task.vocab, 16, 2));
  const auto dir = scratch_dir("schedule");
  const auto cfg = quick_config();
  const auto r = run_schedule(initial, task.vocab, cfg, task.train_a, task.train_b, task.evals, dir);

  ASSERT_EQ(r.phase1.epochs.size(), 3u);
  ASSERT_EQ(r.phase2.epochs.size(), 3u);
  const auto& zero = r.phase2.at_epoch(0);
  EXPECT_FALSE(zero.train_loss.has_value());
  EXPECT_EQ(zero.char_bleu, r.phase1.at_epoch(cfg.phase1_checkpoint_epoch).char_bleu);
  EXPECT_EQ(zero.checkpoint, r.phase1.at_epoch(cfg.phase1_checkpoint_epoch).checkpoint);
  EXPECT_TRUE(r.phase2.at_epoch(2).reported);
  EXPECT_FALSE(r.phase2.at_epoch(1).reported);

  for (const auto* run : {&r.phase1, &r.phase2}) {
    for (const auto& e : run->epochs) {
      ASSERT_TRUE(fs::exists(e.checkpoint));
      const auto m = load_checkpoint(e.checkpoint);
      for (const auto& set : task.evals) {
        EXPECT_EQ(evaluate_char_bleu(m, task.vocab, set, cfg.direction), e.char_bleu.at(set.name))
            << e.checkpoint << " " << set.name;
      }
    }
  }
  std::ifstream in(dir / "record.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(train_run_record_from_json(j.at("phase2")).epochs.size(), 3u);
  fs::remove_all(dir);
}

TEST(RunSchedule, ZeroPhaseTwoEpochsKeepsPhaseOneCheckpoint) {
  const auto task = small_task(100, 20, 1);
  const auto initial = init_model(model_for(task.vocab, 16, 3));
  const auto dir = scratch_dir("zero");
  auto cfg = quick_config();
  cfg.phase2_epochs = 0;
  cfg.phase2_eval_epochs.clear();
  const auto r = run_schedule(initial, task.vocab, cfg, task.train_a, task.train_b, task.evals, dir);
  ASSERT_EQ(r.phase2.epochs.size(), 1u);
  const auto chosen = load_checkpoint(r.phase1.at_epoch(cfg.phase1_checkpoint_epoch).checkpoint);
  ASSERT_EQ(r.model.params.size(), chosen.params.size());
  for (std::size_t i = 0; i < chosen.params.size(); ++i) {
    EXPECT_EQ(r.model.params[i].data, chosen.params[i].data);
  }
  EXPECT_EQ(r.phase2.epochs[0].char_bleu, r.phase1.at_epoch(cfg.phase1_checkpoint_epoch).char_bleu);
  fs::remove_all(dir);
}

TEST(RunSchedule, MissingRunDirectoryIsRejected) {
  const auto task = small_task(40, 10, 1);
  const auto initial = init_model(model_for(task.vocab, 16, 3));
  EXPECT_THROW(run_schedule(initial, task.vocab, quick_config(), task.train_a, task.train_b,
                            task.evals, {}),
               PreconditionError);
}

TEST(RunSchedule, DomainShiftTradesRetentionForAdaptation) {
  const auto task = small_task(1000, 200, 2);
  const auto initial = init_model(model_for(task.vocab, 64, 1));
  const auto dir = scratch_dir("shift");
  FinetuneConfig cfg;
  cfg.phase1_epochs = 15;
  cfg.phase1_checkpoint_epoch = 15;
  cfg.phase2_epochs = 5;
  cfg.batch_size = 8;
  cfg.grad_accum_steps = 1;
  cfg.learning_rate = 5e-4;
  cfg.seed = 1;
  const auto r = run_schedule(initial, task.vocab, cfg, task.train_a, task.train_b, task.evals, dir);
  ASSERT_EQ(r.phase2.epochs.size(), 6u);
  int a_down = 0, b_up = 0;
  for (std::size_t i = 1; i < r.phase2.epochs.size(); ++i) {
    const auto& prev = r.phase2.epochs[i - 1].char_bleu;
    const auto& cur = r.phase2.epochs[i].char_bleu;
    a_down += cur.at("A") < prev.at("A");
    b_up += cur.at("B") > prev.at("B");
  }
  EXPECT_GE(a_down, 3);
  EXPECT_GE(b_up, 3);
  EXPECT_GT(r.phase2.at_epoch(5).char_bleu.at("B"), r.phase2.at_epoch(0).char_bleu.at("B"));
  EXPECT_LT(r.phase2.at_epoch(5).char_bleu.at("A"), r.phase2.at_epoch(0).char_bleu.at("A"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace translit
