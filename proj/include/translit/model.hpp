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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "translit/common.hpp"

namespace translit {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 128;
  int n_heads = 4;
  int enc_layers = 3;
  int dec_layers = 3;
  int ffn_dim = 256;
  int max_len = 128;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }
  /// Throws PreconditionError on inconsistent dimensions.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  /// False for fixed buffers (the sinusoidal position table).
  bool learnable = true;

  std::size_t numel() const;
};

struct AttentionIdx {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};
struct NormIdx {
  int gamma, beta;
};
struct FeedForwardIdx {
  int w1, b1, w2, b2;
};
struct EncoderLayerIdx {
  NormIdx norm1;
  AttentionIdx self_attn;
  NormIdx norm2;
  FeedForwardIdx ffn;
};
struct DecoderLayerIdx {
  NormIdx norm1;
  AttentionIdx self_attn;
  NormIdx norm2;
  AttentionIdx cross_attn;
  NormIdx norm3;
  FeedForwardIdx ffn;
};

/// Tensor names, shapes, and the index of every tensor the forward pass
/// reads. Names live in exactly one of the shared./encoder./decoder.
/// namespaces.
struct ParamLayout {
  std::vector<TensorSpec> tensors;
  int embed = -1;
  int positional = -1;
  std::vector<EncoderLayerIdx> encoder;
  NormIdx encoder_norm{};
  std::vector<DecoderLayerIdx> decoder;
  NormIdx decoder_norm{};
  int lm_head_w = -1;
  int lm_head_b = -1;

  static ParamLayout make(const ModelConfig& config);
  int find(std::string_view name) const;
};

/// Float storage aligned for vectorized kernels, so reductions do not
/// depend on where the allocator placed the buffer.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

struct Tensor {
  std::vector<int> shape;
  AlignedVector<float> data;
};

enum class FreezePolicy { kNone, kMlm };

std::string_view to_string(FreezePolicy policy);

/// Per-tensor adaptive moment state.
struct MomentState {
  AlignedVector<float> m;
  AlignedVector<float> v;
  std::int64_t steps = 0;
};

struct AdamWConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.02;
};

struct ModelState {
  ModelConfig config;
  ParamLayout layout;
  std::vector<Tensor> params;
  std::vector<bool> frozen;
  FreezePolicy freeze_policy = FreezePolicy::kNone;
  std::vector<MomentState> moments;
  std::int64_t step = 0;
  Rng rng;
  /// Free-form manifest tags (e.g. phase=mlm).
  std::map<std::string, std::string> tags;

  std::size_t learnable_parameter_count() const;
  std::size_t frozen_tensor_count() const;
  std::vector<const float*> param_ptrs() const;
  /// Drops optimizer moments (fresh optimizer for a new phase).
  void reset_optimizer();
};

/// Deterministic seeded initialization; freeze mask all-false.
ModelState init_model(const ModelConfig& config);

/// kMlm freezes embeddings, positional encodings, and encoder/decoder
/// layers 0-1; kNone clears all freezing.
void set_freeze(ModelState& model, FreezePolicy policy);

/// Gradients, one buffer per tensor in layout order.
using Gradients = std::vector<AlignedVector<float>>;

Gradients zero_gradients(const ModelState& model);

/// Element-wise AdamW update for one tensor at 1-based step `step`.
/// Arithmetic runs in double regardless of T.
template <typename T>
void adamw_update(std::span<T> param, std::span<T> m, std::span<T> v, std::span<const T> grad,
                  std::int64_t step, const AdamWConfig& opt) {
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad[k];
    const double mk = opt.beta1 * m[k] + (1.0 - opt.beta1) * g;
    const double vk = opt.beta2 * v[k] + (1.0 - opt.beta2) * g * g;
    m[k] = static_cast<T>(mk);
    v[k] = static_cast<T>(vk);
    const double update = (mk / bc1) / (std::sqrt(vk / bc2) + opt.epsilon);
    const double p = param[k];
    param[k] = static_cast<T>(p - opt.learning_rate * (update + opt.weight_decay * p));
  }
}

/// One AdamW step with decoupled weight decay over unfrozen learnable
/// tensors. Throws Error naming the tensor on a non-finite gradient.
void adamw_step(ModelState& model, const Gradients& grads, const AdamWConfig& opt);

/// Checkpoint errors.
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const ModelState& model);
ModelState parse_checkpoint(std::string_view bytes);

}  // namespace translit
