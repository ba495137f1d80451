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

#include <cstdint>
#include <span>
#include <vector>

#include "translit/model.hpp"
#include "translit/transformer.hpp"

namespace translit {

/// Summed token cross-entropy and the number of tokens it covers.
struct LossStats {
  double sum = 0.0;
  std::size_t tokens = 0;

  double mean() const { return tokens ? sum / static_cast<double>(tokens) : 0.0; }
  LossStats& operator+=(const LossStats& o) {
    sum += o.sum;
    tokens += o.tokens;
    return *this;
  }
};

/// Cross-entropy summed over rows whose label is not kIgnoreLabel, with
/// log-sum-exp accumulated in double. If `dlogits` is given it receives
/// d(sum)/d(logits), i.e. softmax minus one-hot on counted rows.
template <typename T>
LossStats cross_entropy(const typename TransformerEngine<T>::Mat& logits,
                        std::span<const TokenId> labels,
                        typename TransformerEngine<T>::Mat* dlogits = nullptr);

/// Cross-entropy of `logits` against the teacher-forcing labels of `tgt`,
/// PAD positions excluded. `logits` has one row per decoder input position,
/// or one per target position (as returned by forward) whose last row is
/// ignored. mean() gives the per-token loss.
LossStats loss(const TransformerEngine<float>::Mat& logits, const EncodedSequence& tgt);

template <typename T>
using ParamBuffers = std::vector<AlignedVector<T>>;

template <typename T>
ParamBuffers<T> copy_params(const ModelState& model);

template <typename T>
ParamBuffers<T> zero_like(const ModelState& model);

/// Forward + backward for one micro-batch. Adds the gradient of the
/// *summed* token loss into `grads` and returns the summed loss; callers
/// divide by the total token count once all micro-batches are in, which
/// makes accumulation exactly token-weighted.
template <typename T>
LossStats accumulate_gradients(const ModelState& model, const ParamBuffers<T>& params,
                               std::span<const SeqExample> batch, Mode mode,
                               std::uint64_t dropout_seed, ParamBuffers<T>& grads);

/// Float fast path reading parameters in place.
LossStats accumulate_gradients(const ModelState& model, std::span<const SeqExample> batch,
                               Mode mode, std::uint64_t dropout_seed, Gradients& grads);

template <typename T>
void scale_gradients(ParamBuffers<T>& grads, double factor);

/// Global L2 norm over learnable, unfrozen tensors.
double gradient_norm(const ModelState& model, const Gradients& grads);

/// Linear warmup to `peak` over the first `warmup_steps` optimizer steps,
/// then linear decay reaching 0 at `total_steps`.
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double peak, std::int64_t total_steps, double warmup_ratio);

  /// Learning rate used by optimizer step `step` (1-based; step 0 gives 0).
  double at(std::int64_t step) const;
  std::int64_t warmup_steps() const { return warmup_; }
  std::int64_t total_steps() const { return total_; }

 private:
  double peak_;
  std::int64_t total_;
  std::int64_t warmup_;
};

struct TrainLoopConfig {
  int batch_size = 64;
  int grad_accum_steps = 4;
  AdamWConfig optimizer;
  double warmup_ratio = 0.10;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double max_grad_norm = 1.0;

  void validate() const;
};

/// Epoch-level driver: shuffles with the model's RNG, packs micro-batches,
/// accumulates token-weighted gradients and applies one AdamW step per
/// `grad_accum_steps` micro-batches under a warmup/decay schedule.
class Trainer {
 public:
  Trainer(ModelState& model, const TrainLoopConfig& config, std::int64_t total_steps);

  /// Optimizer steps needed for one pass over `examples` examples.
  static std::int64_t steps_per_epoch(std::size_t examples, const TrainLoopConfig& config);

  /// One pass over `examples`; returns the token-weighted training loss.
  LossStats run_epoch(std::span<const SeqExample> examples);

  std::int64_t steps_taken() const { return steps_; }
  const LinearWarmupSchedule& schedule() const { return schedule_; }

 private:
  ModelState& model_;
  TrainLoopConfig config_;
  LinearWarmupSchedule schedule_;
  std::int64_t steps_ = 0;
};

}  // namespace translit
