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
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "translit/corpus.hpp"
#include "translit/decoding.hpp"
#include "translit/model.hpp"
#include "translit/tokenizer.hpp"
#include "translit/training.hpp"

namespace translit {

/// roman2ur reads the Roman side and writes Urdu script; ur2roman the
/// reverse. Sentence pairs keep Urdu in `source` and Roman in `target`.
enum class Direction { kRoman2Ur, kUr2Roman };

std::string_view to_string(Direction direction);
Direction parse_direction(std::string_view name);

std::string_view input_lang(Direction direction);
std::string_view output_lang(Direction direction);
const std::string& input_text(const SentencePair& pair, Direction direction);
const std::string& output_text(const SentencePair& pair, Direction direction);

struct FinetuneConfig {
  Direction direction = Direction::kRoman2Ur;
  int phase1_epochs = 15;
  int phase1_checkpoint_epoch = 5;
  int phase2_epochs = 5;
  std::vector<int> phase2_eval_epochs = {2, 5};
  int batch_size = 64;
  int grad_accum_steps = 4;
  double learning_rate = 1e-5;
  double warmup_ratio = 0.10;
  double weight_decay = 0.02;
  double max_grad_norm = 1.0;
  int eval_batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  TrainLoopConfig loop() const;
};

nlohmann::json to_json(const FinetuneConfig& cfg);

struct EvalSet {
  std::string name;
  std::vector<SentencePair> pairs;
};

enum class Phase { kPhase1, kPhase2 };

std::string_view to_string(Phase phase);

struct EpochRecord {
  int epoch = 0;
  /// Absent for the epoch-0 evaluation of a loaded checkpoint.
  std::optional<double> train_loss;
  std::map<std::string, double> char_bleu;
  std::string checkpoint;
  /// Epochs listed in phase2_eval_epochs.
  bool reported = false;
};

struct TrainRunRecord {
  Phase phase = Phase::kPhase1;
  Direction direction = Direction::kRoman2Ur;
  std::vector<EpochRecord> epochs;

  const EpochRecord& at_epoch(int epoch) const;
};

nlohmann::json to_json(const TrainRunRecord& record);
TrainRunRecord train_run_record_from_json(const nlohmann::json& j);

/// Greedy Char-BLEU of `model` on `set` in the configured direction.
double evaluate_char_bleu(const ModelState& model, const Vocabulary& vocab, const EvalSet& set,
                          Direction direction, int batch_size = 64);

/// Teacher-forced fine-tuning for `epochs` epochs with a fresh optimizer.
/// Evaluates every set after each epoch; with a non-empty `run_dir` also
/// writes epoch{N}.ckpt, loss.csv, eval.csv and record.json there. Throws
/// PreconditionError if any parameter is frozen or the data is empty.
TrainRunRecord train_phase(ModelState& model, const Vocabulary& vocab,
                           std::span<const SentencePair> pairs, const FinetuneConfig& cfg,
                           Phase phase, int epochs, std::span<const EvalSet> evals,
                           const std::filesystem::path& run_dir = {});

struct ScheduleResult {
  TrainRunRecord phase1;
  TrainRunRecord phase2;
  /// State after the last phase-2 epoch.
  ModelState model;
};

/// Phase 1 on `phase1_data`, then phase 2 on `phase2_data` starting from
/// the phase-1 checkpoint of epoch `phase1_checkpoint_epoch`. Phase 2
/// records an epoch-0 evaluation of that checkpoint.
ScheduleResult run_schedule(const ModelState& initial, const Vocabulary& vocab,
                            const FinetuneConfig& cfg, std::span<const SentencePair> phase1_data,
                            std::span<const SentencePair> phase2_data,
                            std::span<const EvalSet> evals, const std::filesystem::path& run_dir);

}  // namespace translit
