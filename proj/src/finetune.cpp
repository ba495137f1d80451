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

#include "translit/finetune.hpp"

#include <algorithm>
#include <fstream>

#include "translit/metrics.hpp"

namespace translit {

std::string_view to_string(Direction direction) {
  return direction == Direction::kRoman2Ur ? "roman2ur" : "ur2roman";
}

Direction parse_direction(std::string_view name) {
  if (name == "roman2ur") return Direction::kRoman2Ur;
  if (name == "ur2roman") return Direction::kUr2Roman;
  throw PreconditionError("unknown direction: " + std::string(name));
}

std::string_view input_lang(Direction direction) {
  return direction == Direction::kRoman2Ur ? kRomanUrdu : kUrdu;
}

std::string_view output_lang(Direction direction) {
  return direction == Direction::kRoman2Ur ? kUrdu : kRomanUrdu;
}

const std::string& input_text(const SentencePair& pair, Direction direction) {
  return direction == Direction::kRoman2Ur ? pair.target : pair.source;
}

const std::string& output_text(const SentencePair& pair, Direction direction) {
  return direction == Direction::kRoman2Ur ? pair.source : pair.target;
}

void FinetuneConfig::validate() const {
  if (phase1_epochs < 0 || phase2_epochs < 0) throw PreconditionError("epochs must be >= 0");
  if (phase1_checkpoint_epoch < 1 || phase1_checkpoint_epoch > phase1_epochs) {
    throw PreconditionError("phase1_checkpoint_epoch must lie in 1..phase1_epochs");
  }
  for (int e : phase2_eval_epochs) {
    if (e < 1 || e > phase2_epochs) throw PreconditionError("phase2_eval_epochs must lie in 1..phase2_epochs");
  }
  if (eval_batch_size < 1) throw PreconditionError("eval_batch_size must be positive");
  loop().validate();
}

TrainLoopConfig FinetuneConfig::loop() const {
  TrainLoopConfig t;
  t.batch_size = batch_size;
  t.grad_accum_steps = grad_accum_steps;
  t.optimizer.learning_rate = learning_rate;
  t.optimizer.weight_decay = weight_decay;
  t.warmup_ratio = warmup_ratio;
  t.max_grad_norm = max_grad_norm;
  return t;
}

nlohmann::json to_json(const FinetuneConfig& cfg) {
  return {{"direction", to_string(cfg.direction)},
          {"phase1_epochs", cfg.phase1_epochs},
          {"phase1_checkpoint_epoch", cfg.phase1_checkpoint_epoch},
          {"phase2_epochs", cfg.phase2_epochs},
          {"phase2_eval_epochs", cfg.phase2_eval_epochs},
          {"batch_size", cfg.batch_size},
          {"grad_accum_steps", cfg.grad_accum_steps},
          {"learning_rate", cfg.learning_rate},
          {"warmup_ratio", cfg.warmup_ratio},
          {"weight_decay", cfg.weight_decay},
          {"max_grad_norm", cfg.max_grad_norm},
          {"eval_batch_size", cfg.eval_batch_size},
          {"seed", cfg.seed}};
}

std::string_view to_string(Phase phase) { return phase == Phase::kPhase1 ? "phase1" : "phase2"; }

const EpochRecord& TrainRunRecord::at_epoch(int epoch) const {
  for (const auto& e : epochs) {
    if (e.epoch == epoch) return e;
  }
  throw PreconditionError("no record for epoch " + std::to_string(epoch));
}

nlohmann::json to_json(const TrainRunRecord& record) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : record.epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"char_bleu", e.char_bleu},
                        {"checkpoint", e.checkpoint},
                        {"reported", e.reported}};
    j["train_loss"] = e.train_loss ? nlohmann::json(*e.train_loss) : nlohmann::json(nullptr);
    epochs.push_back(std::move(j));
  }
  return {{"phase", to_string(record.phase)},
          {"direction", to_string(record.direction)},
          {"epochs", std::move(epochs)}};
}

TrainRunRecord train_run_record_from_json(const nlohmann::json& j) {
  try {
    TrainRunRecord r;
    r.phase = j.at("phase").get<std::string>() == "phase1" ? Phase::kPhase1 : Phase::kPhase2;
    r.direction = parse_direction(j.at("direction").get<std::string>());
    for (const auto& e : j.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<int>();
      if (!e.at("train_loss").is_null()) rec.train_loss = e.at("train_loss").get<double>();
      rec.char_bleu = e.at("char_bleu").get<std::map<std::string, double>>();
      rec.checkpoint = e.at("checkpoint").get<std::string>();
      rec.reported = e.value("reported", false);
      r.epochs.push_back(std::move(rec));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed run record: ") + e.what());
  }
}

double evaluate_char_bleu(const ModelState& model, const Vocabulary& vocab, const EvalSet& set,
                          Direction direction, int batch_size) {
  if (set.pairs.empty()) throw PreconditionError("empty eval set " + set.name);
  std::vector<std::string> inputs, refs;
  for (const auto& p : set.pairs) {
    inputs.push_back(input_text(p, direction));
    refs.push_back(output_text(p, direction));
  }
  DecodeOptions opts;
  opts.max_len = model.config.max_len;
  opts.batch_size = batch_size;
  const auto hyps = transliterate(model, vocab, inputs, input_lang(direction), output_lang(direction), opts);
  return char_bleu(hyps, single_references(refs)).score;
}

namespace {

std::vector<SeqExample> supervised_examples(const Vocabulary& vocab,
                                            std::span<const SentencePair> pairs,
                                            Direction direction, int max_len) {
  std::vector<SeqExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back(make_example(encode(vocab, input_text(p, direction), input_lang(direction), max_len),
                               encode(vocab, output_text(p, direction), output_lang(direction), max_len)));
  }
  return out;
}

class PhaseWriter {
 public:
  explicit PhaseWriter(const std::filesystem::path& dir) : dir_(dir) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_);
    loss_.open(dir_ / "loss.csv");
    eval_.open(dir_ / "eval.csv");
    if (!loss_ || !eval_) throw IoError("cannot write run files in " + dir_.string());
    loss_ << "epoch,split,loss\n";
    eval_ << "epoch,eval_set,char_bleu\n";
  }

  bool enabled() const { return !dir_.empty(); }
  std::filesystem::path checkpoint_path(int epoch) const {
    return dir_ / ("epoch" + std::to_string(epoch) + ".ckpt");
  }

  void write(const EpochRecord& e, const TrainRunRecord& record) {
    if (!enabled()) return;
    if (e.train_loss) loss_ << e.epoch << ",train," << format_number(*e.train_loss) << '\n';
    for (const auto& [name, score] : e.char_bleu) {
      eval_ << e.epoch << ',' << name << ',' << format_number(score) << '\n';
    }
    loss_.flush();
    eval_.flush();
    std::ofstream out(dir_ / "record.json");
    out << to_json(record).dump(2) << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::ofstream loss_;
  std::ofstream eval_;
};

EpochRecord evaluate_epoch(const ModelState& model, const Vocabulary& vocab,
                           std::span<const EvalSet> evals, const FinetuneConfig& cfg, int epoch) {
  EpochRecord rec;
  rec.epoch = epoch;
  for (const auto& set : evals) {
    rec.char_bleu[set.name] = evaluate_char_bleu(model, vocab, set, cfg.direction, cfg.eval_batch_size);
  }
  return rec;
}

}  // namespace

TrainRunRecord train_phase(ModelState& model, const Vocabulary& vocab,
                           std::span<const SentencePair> pairs, const FinetuneConfig& cfg,
                           Phase phase, int epochs, std::span<const EvalSet> evals,
                           const std::filesystem::path& run_dir) {
  if (pairs.empty()) throw PreconditionError("no fine-tuning data");
  if (model.frozen_tensor_count() != 0 || model.freeze_policy != FreezePolicy::kNone) {
    throw PreconditionError("fine-tuning requires all parameters unfrozen");
  }
  if (model.config.vocab_size != vocab.size()) throw PreconditionError("vocabulary size mismatch");
  cfg.loop().validate();

  const auto examples = supervised_examples(vocab, pairs, cfg.direction, model.config.max_len);
  model.rng = Rng(derive_seed(cfg.seed, phase == Phase::kPhase1 ? 1 : 2));
  model.reset_optimizer();
  const auto loop = cfg.loop();
  Trainer trainer(model, loop, Trainer::steps_per_epoch(examples.size(), loop) * epochs);

  TrainRunRecord record;
  record.phase = phase;
  record.direction = cfg.direction;
  PhaseWriter writer(run_dir);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double loss = trainer.run_epoch(examples).mean();
    EpochRecord rec = evaluate_epoch(model, vocab, evals, cfg, epoch);
    rec.train_loss = loss;
    rec.reported = phase == Phase::kPhase1 ||
                   std::find(cfg.phase2_eval_epochs.begin(), cfg.phase2_eval_epochs.end(), epoch) !=
                       cfg.phase2_eval_epochs.end();
    if (writer.enabled()) {
      model.tags["phase"] = std::string(to_string(phase));
      model.tags["epoch"] = std::to_string(epoch);
      model.tags["direction"] = std::string(to_string(cfg.direction));
      const auto path = writer.checkpoint_path(epoch);
      save_checkpoint(model, path);
      rec.checkpoint = path.string();
    }
    record.epochs.push_back(std::move(rec));
    writer.write(record.epochs.back(), record);
  }
  return record;
}

ScheduleResult run_schedule(const ModelState& initial, const Vocabulary& vocab,
                            const FinetuneConfig& cfg, std::span<const SentencePair> phase1_data,
                            std::span<const SentencePair> phase2_data,
                            std::span<const EvalSet> evals, const std::filesystem::path& run_dir) {
  cfg.validate();
  if (run_dir.empty()) throw PreconditionError("run_schedule needs a run directory");
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream out(run_dir / "config.json");
    out << to_json(cfg).dump(2) << '\n';
  }

  ModelState model = initial;
  set_freeze(model, FreezePolicy::kNone);
  model.tags.clear();
  ScheduleResult result;
  result.phase1 = train_phase(model, vocab, phase1_data, cfg, Phase::kPhase1, cfg.phase1_epochs,
                              evals, run_dir / "phase1");

  const auto& chosen = result.phase1.at_epoch(cfg.phase1_checkpoint_epoch);
  if (chosen.checkpoint.empty() || !std::filesystem::exists(chosen.checkpoint)) {
    throw IoError("missing phase-1 checkpoint for epoch " + std::to_string(cfg.phase1_checkpoint_epoch));
  }
  model = load_checkpoint(chosen.checkpoint);
  set_freeze(model, FreezePolicy::kNone);

  EpochRecord start = evaluate_epoch(model, vocab, evals, cfg, 0);
  start.checkpoint = chosen.checkpoint;
  start.reported = true;
  if (cfg.phase2_epochs > 0) {
    result.phase2 = train_phase(model, vocab, phase2_data, cfg, Phase::kPhase2, cfg.phase2_epochs,
                                evals, run_dir / "phase2");
  } else {
    result.phase2.phase = Phase::kPhase2;
    result.phase2.direction = cfg.direction;
  }
  result.phase2.epochs.insert(result.phase2.epochs.begin(), std::move(start));
  {
    std::filesystem::create_directories(run_dir / "phase2");
    std::ofstream out(run_dir / "phase2" / "record.json");
    out << to_json(result.phase2).dump(2) << '\n';
  }
  {
    std::ofstream out(run_dir / "record.json");
    out << nlohmann::json{{"phase1", to_json(result.phase1)}, {"phase2", to_json(result.phase2)}}.dump(2)
        << '\n';
  }
  result.model = std::move(model);
  return result;
}

}  // namespace translit
