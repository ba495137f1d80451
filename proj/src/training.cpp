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

#include "translit/training.hpp"

#include <algorithm>
#include <cmath>

namespace translit {

template <typename T>
LossStats cross_entropy(const typename TransformerEngine<T>::Mat& logits,
                        std::span<const TokenId> labels,
                        typename TransformerEngine<T>::Mat* dlogits) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw PreconditionError("logits and labels disagree on length");
  }
  LossStats stats;
  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const TokenId label = labels[static_cast<std::size_t>(r)];
    if (label == kIgnoreLabel) continue;
    if (label < 0 || label >= logits.cols()) throw PreconditionError("label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(r, c)));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(static_cast<double>(logits(r, c)) - mx);
    const double log_z = mx + std::log(sum);
    stats.sum += log_z - static_cast<double>(logits(r, label));
    ++stats.tokens;
    if (dlogits) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        (*dlogits)(r, c) = static_cast<T>(std::exp(static_cast<double>(logits(r, c)) - log_z));
      }
      (*dlogits)(r, label) -= T(1);
    }
  }
  return stats;
}

template LossStats cross_entropy<float>(const TransformerEngine<float>::Mat&,
                                        std::span<const TokenId>, TransformerEngine<float>::Mat*);
template LossStats cross_entropy<double>(const TransformerEngine<double>::Mat&,
                                         std::span<const TokenId>, TransformerEngine<double>::Mat*);

LossStats loss(const TransformerEngine<float>::Mat& logits, const EncodedSequence& tgt) {
  const auto full = unpadded(tgt);
  if (full.size() < 2) throw PreconditionError("target needs a language token and EOS");
  std::vector<TokenId> labels(full.begin() + 1, full.end());
  if (static_cast<std::size_t>(logits.rows()) == full.size()) {
    // Logits over the whole target, EOS included: the last row has no label.
    const TransformerEngine<float>::Mat head = logits.topRows(logits.rows() - 1);
    return cross_entropy<float>(head, labels);
  }
  return cross_entropy<float>(logits, labels);
}

template <typename T>
ParamBuffers<T> copy_params(const ModelState& model) {
  ParamBuffers<T> out;
  out.reserve(model.params.size());
  for (const auto& t : model.params) out.emplace_back(t.data.begin(), t.data.end());
  return out;
}

template <typename T>
ParamBuffers<T> zero_like(const ModelState& model) {
  ParamBuffers<T> out;
  out.reserve(model.params.size());
  for (const auto& t : model.params) out.emplace_back(t.data.size(), T(0));
  return out;
}

namespace {

template <typename T, typename Params>
LossStats run_micro_batch(const ModelState& model, Params ptrs, std::span<const SeqExample> batch,
                          Mode mode, std::uint64_t seed, ParamBuffers<T>& grads) {
  if (batch.empty()) return {};
  TransformerEngine<T> engine(model.config, model.layout, std::move(ptrs));
  typename TransformerEngine<T>::Cache cache;
  const auto logits = engine.forward(batch, mode, seed, &cache);
  std::vector<TokenId> labels;
  for (const auto& ex : batch) {
    if (ex.labels.size() != ex.dec_in.size()) throw PreconditionError("labels must align with dec_in");
    labels.insert(labels.end(), ex.labels.begin(), ex.labels.end());
  }
  typename TransformerEngine<T>::Mat dlogits;
  const LossStats stats = cross_entropy<T>(logits, labels, &dlogits);
  std::vector<T*> gptrs;
  gptrs.reserve(grads.size());
  for (auto& g : grads) gptrs.push_back(g.data());
  engine.backward(cache, dlogits, gptrs);
  return stats;
}

}  // namespace

template <typename T>
LossStats accumulate_gradients(const ModelState& model, const ParamBuffers<T>& params,
                               std::span<const SeqExample> batch, Mode mode,
                               std::uint64_t dropout_seed, ParamBuffers<T>& grads) {
  std::vector<const T*> ptrs;
  ptrs.reserve(params.size());
  for (const auto& p : params) ptrs.push_back(p.data());
  return run_micro_batch<T>(model, std::move(ptrs), batch, mode, dropout_seed, grads);
}

LossStats accumulate_gradients(const ModelState& model, std::span<const SeqExample> batch,
                               Mode mode, std::uint64_t dropout_seed, Gradients& grads) {
  return run_micro_batch<float>(model, model.param_ptrs(), batch, mode, dropout_seed, grads);
}

template <typename T>
void scale_gradients(ParamBuffers<T>& grads, double factor) {
  for (auto& g : grads) {
    for (auto& x : g) x = static_cast<T>(x * factor);
  }
}

double gradient_norm(const ModelState& model, const Gradients& grads) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!model.layout.tensors[i].learnable || model.frozen[i]) continue;
    for (float g : grads[i]) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

template ParamBuffers<float> copy_params<float>(const ModelState&);
template ParamBuffers<double> copy_params<double>(const ModelState&);
template ParamBuffers<float> zero_like<float>(const ModelState&);
template ParamBuffers<double> zero_like<double>(const ModelState&);
template LossStats accumulate_gradients<float>(const ModelState&, const ParamBuffers<float>&,
                                               std::span<const SeqExample>, Mode, std::uint64_t,
                                               ParamBuffers<float>&);
template LossStats accumulate_gradients<double>(const ModelState&, const ParamBuffers<double>&,
                                                std::span<const SeqExample>, Mode, std::uint64_t,
                                                ParamBuffers<double>&);
template void scale_gradients<float>(ParamBuffers<float>&, double);
template void scale_gradients<double>(ParamBuffers<double>&, double);

LinearWarmupSchedule::LinearWarmupSchedule(double peak, std::int64_t total_steps,
                                           double warmup_ratio)
    : peak_(peak), total_(total_steps) {
  if (total_steps < 0) throw PreconditionError("total_steps must be non-negative");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) throw PreconditionError("warmup_ratio in [0, 1]");
  warmup_ = static_cast<std::int64_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9));
}

double LinearWarmupSchedule::at(std::int64_t step) const {
  if (step <= 0) return 0.0;
  if (step < warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
  if (total_ <= warmup_) return peak_;
  const double remaining = static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_);
  return peak_ * std::max(0.0, remaining);
}

void TrainLoopConfig::validate() const {
  if (batch_size < 1) throw PreconditionError("batch_size must be positive");
  if (grad_accum_steps < 1) throw PreconditionError("grad_accum_steps must be positive");
  if (!(optimizer.learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) throw PreconditionError("warmup_ratio in [0, 1]");
}

Trainer::Trainer(ModelState& model, const TrainLoopConfig& config, std::int64_t total_steps)
    : model_(model),
      config_(config),
      schedule_(config.optimizer.learning_rate, total_steps, config.warmup_ratio) {
  config_.validate();
}

std::int64_t Trainer::steps_per_epoch(std::size_t examples, const TrainLoopConfig& config) {
  const auto per_step =
      static_cast<std::size_t>(config.batch_size) * static_cast<std::size_t>(config.grad_accum_steps);
  return static_cast<std::int64_t>((examples + per_step - 1) / per_step);
}

LossStats Trainer::run_epoch(std::span<const SeqExample> examples) {
  if (examples.empty()) throw PreconditionError("no training examples");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  model_.rng.shuffle(order);

  const auto batch = static_cast<std::size_t>(config_.batch_size);
  const auto per_step = batch * static_cast<std::size_t>(config_.grad_accum_steps);
  LossStats epoch;
  Gradients grads = zero_gradients(model_);
  std::vector<SeqExample> micro;
  for (std::size_t start = 0; start < order.size(); start += per_step) {
    const std::size_t stop = std::min(order.size(), start + per_step);
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
    LossStats step_loss;
    for (std::size_t m = start; m < stop; m += batch) {
      micro.clear();
      for (std::size_t i = m; i < std::min(stop, m + batch); ++i) micro.push_back(examples[order[i]]);
      step_loss += accumulate_gradients(model_, micro, Mode::kTrain, model_.rng.next_u64(), grads);
    }
    epoch += step_loss;
    if (step_loss.tokens == 0) continue;
    scale_gradients(grads, 1.0 / static_cast<double>(step_loss.tokens));
    if (config_.max_grad_norm > 0.0) {
      const double norm = gradient_norm(model_, grads);
      if (norm > config_.max_grad_norm) scale_gradients(grads, config_.max_grad_norm / norm);
    }
    ++steps_;
    AdamWConfig opt = config_.optimizer;
    opt.learning_rate = schedule_.at(steps_);
    adamw_step(model_, grads, opt);
  }
  return epoch;
}

}  // namespace translit
