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

#include "translit/mlm.hpp"

#include <cmath>
#include <fstream>

#include "translit/metrics.hpp"

namespace translit {

void MaskingConfig::validate() const {
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) throw PreconditionError("mask_rate must be in [0, 1)");
}

bool is_maskable(const Vocabulary& vocab, TokenId id) {
  if (id == Vocabulary::kUnk) return true;
  return !vocab.is_special(id);
}

MaskedSequence mask_tokens(const EncodedSequence& seq, const Vocabulary& vocab,
                           const MaskingConfig& cfg) {
  cfg.validate();
  MaskedSequence out{seq, std::vector<TokenId>(seq.ids.size(), kIgnoreLabel)};
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const bool live = i >= seq.attention_mask.size() || seq.attention_mask[i] == 1;
    if (live && is_maskable(vocab, seq.ids[i])) positions.push_back(i);
  }
  const auto count =
      static_cast<std::size_t>(std::floor(cfg.mask_rate * static_cast<double>(positions.size()) + 1e-9));
  Rng rng(cfg.seed);
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t j = k + rng.uniform(positions.size() - k);
    std::swap(positions[k], positions[j]);
    const std::size_t pos = positions[k];
    out.labels[pos] = seq.ids[pos];
    out.masked.ids[pos] = Vocabulary::kMask;
  }
  return out;
}

std::string_view to_string(MlmCorpusMode mode) {
  return mode == MlmCorpusMode::kRomanOnly ? "roman_only" : "roman_plus_urdu";
}

MlmCorpusMode parse_mlm_corpus_mode(std::string_view name) {
  if (name == "roman_only") return MlmCorpusMode::kRomanOnly;
  if (name == "roman_plus_urdu") return MlmCorpusMode::kRomanPlusUrdu;
  throw PreconditionError("unknown MLM corpus mode: " + std::string(name));
}

std::vector<MonolingualSentence> build_mlm_corpus(std::span<const SentencePair> pairs,
                                                  MlmCorpusMode mode) {
  std::vector<MonolingualSentence> out;
  out.reserve(pairs.size() * (mode == MlmCorpusMode::kRomanOnly ? 1 : 2));
  for (const auto& p : pairs) {
    out.push_back({p.target, std::string(kRomanUrdu)});
    if (mode == MlmCorpusMode::kRomanPlusUrdu) out.push_back({p.source, std::string(kUrdu)});
  }
  return out;
}

void PretrainConfig::validate() const {
  if (epochs < 1) throw PreconditionError("epochs must be >= 1");
  loop().validate();
}

TrainLoopConfig PretrainConfig::loop() const {
  TrainLoopConfig t;
  t.batch_size = batch_size;
  t.grad_accum_steps = grad_accum_steps;
  t.optimizer.learning_rate = learning_rate;
  t.optimizer.weight_decay = weight_decay;
  t.warmup_ratio = warmup_ratio;
  t.max_grad_norm = max_grad_norm;
  return t;
}

namespace {

std::vector<SeqExample> masked_examples(const Vocabulary& vocab,
                                        std::span<const EncodedSequence> encoded,
                                        const MaskingConfig& masking, std::uint64_t epoch) {
  std::vector<SeqExample> out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    MaskingConfig cfg = masking;
    cfg.seed = derive_seed(masking.seed, epoch * encoded.size() + i);
    const auto m = mask_tokens(encoded[i], vocab, cfg);
    out.push_back(make_example(m.masked, encoded[i]));
  }
  return out;
}

double eval_loss(const ModelState& model, std::span<const SeqExample> examples, int batch_size) {
  LossStats total;
  const TransformerEngine<float> engine(model.config, model.layout, model.param_ptrs());
  for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto n = std::min(examples.size() - start, static_cast<std::size_t>(batch_size));
    const auto batch = examples.subspan(start, n);
    const auto logits = engine.forward(batch, Mode::kEval, 0, nullptr);
    std::vector<TokenId> labels;
    for (const auto& ex : batch) labels.insert(labels.end(), ex.labels.begin(), ex.labels.end());
    total += cross_entropy<float>(logits, labels);
  }
  return total.mean();
}

}  // namespace

PretrainResult pretrain(ModelState& model, const Vocabulary& vocab,
                        std::span<const MonolingualSentence> corpus, const PretrainConfig& cfg,
                        const MaskingConfig& masking, const std::filesystem::path& output_dir) {
  cfg.validate();
  masking.validate();
  if (model.freeze_policy != FreezePolicy::kMlm) {
    throw PreconditionError("pretraining requires the mlm freeze policy");
  }
  if (corpus.empty()) throw PreconditionError("empty pretraining corpus");
  if (model.config.vocab_size != vocab.size()) throw PreconditionError("vocabulary size mismatch");

  std::vector<EncodedSequence> encoded;
  encoded.reserve(corpus.size());
  for (const auto& s : corpus) encoded.push_back(encode(vocab, s.text, s.lang, model.config.max_len));

  std::ofstream loss_csv;
  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    loss_csv.open(output_dir / "loss.csv");
    if (!loss_csv) throw IoError("cannot write " + (output_dir / "loss.csv").string());
    loss_csv << "epoch,split,loss\n";
  }

  model.rng = Rng(derive_seed(cfg.seed, 0x6d6c6dULL));
  model.reset_optimizer();
  const auto loop = cfg.loop();
  Trainer trainer(model, loop, Trainer::steps_per_epoch(encoded.size(), loop) * cfg.epochs);

  PretrainResult result;
  {
    const auto first = masked_examples(vocab, encoded, masking, 0);
    result.initial_loss = eval_loss(model, first, cfg.batch_size);
    if (loss_csv.is_open()) loss_csv << "0,eval," << format_number(result.initial_loss) << '\n';
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto examples = masked_examples(vocab, encoded, masking, static_cast<std::uint64_t>(epoch - 1));
    const double loss = trainer.run_epoch(examples).mean();
    result.epoch_loss.push_back(loss);
    if (loss_csv.is_open()) {
      loss_csv << epoch << ",train," << format_number(loss) << '\n' << std::flush;
      model.tags["phase"] = "mlm";
      model.tags["epoch"] = std::to_string(epoch);
      model.tags["corpus_mode"] = std::string(to_string(cfg.corpus_mode));
      const auto path = output_dir / ("mlm_epoch" + std::to_string(epoch) + ".ckpt");
      save_checkpoint(model, path);
      result.checkpoints.push_back(path);
    }
  }
  return result;
}

}  // namespace translit
