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

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "translit/model.hpp"
#include "translit/tokenizer.hpp"

namespace translit {

enum class Mode { kTrain, kEval };

inline constexpr TokenId kIgnoreLabel = -100;

/// One sequence pair with padding already stripped. Positions are the
/// indices 0..n-1 of each sequence.
struct SeqExample {
  std::vector<TokenId> src;
  std::vector<TokenId> dec_in;
  /// Next-token targets aligned with dec_in; kIgnoreLabel is skipped.
  std::vector<TokenId> labels;
};

/// Strips padding from an encoded sequence. The attention mask must be a
/// prefix of ones; throws PreconditionError otherwise.
std::vector<TokenId> unpadded(const EncodedSequence& seq);

/// Teacher forcing: decoder input [LANG, c1..ck], labels [c1..ck, EOS].
SeqExample make_example(const EncodedSequence& src, const EncodedSequence& tgt);

/// Encoder-decoder transformer with pre-norm residual blocks, sinusoidal
/// positions, and a shared token embedding scaled by sqrt(d_model).
/// Batches are packed: the rows of every activation matrix are the tokens
/// of all sequences back to back, and attention runs per sequence, which
/// is equivalent to masking padding.
///
/// Parameters are borrowed; the engine never owns or mutates them.
template <typename T>
class TransformerEngine {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  struct Segments {
    std::vector<int> offset;
    std::vector<int> length;
    int total = 0;
  };

  struct NormCache {
    Mat xhat;
    std::vector<T> inv_std;
  };

  struct AttentionCache {
    Mat q, k, v, o;
    std::vector<Mat> probs;  // per (segment, head)
  };

  struct EncoderLayerCache {
    NormCache norm1;
    Mat h1;
    AttentionCache attn;
    Mat drop1;
    NormCache norm2;
    Mat h2;
    Mat ffn_act;
    Mat drop2;
  };

  struct DecoderLayerCache {
    NormCache norm1;
    Mat h1;
    AttentionCache self_attn;
    Mat drop1;
    NormCache norm2;
    Mat h2;
    AttentionCache cross_attn;
    Mat drop2;
    NormCache norm3;
    Mat h3;
    Mat ffn_act;
    Mat drop3;
  };

  struct Cache {
    Segments enc_seg, dec_seg;
    std::vector<TokenId> enc_ids, dec_ids;
    std::vector<int> enc_pos, dec_pos;
    Mat enc_embed_drop, dec_embed_drop;
    std::vector<EncoderLayerCache> enc;
    NormCache enc_norm;
    Mat memory;
    std::vector<DecoderLayerCache> dec;
    NormCache dec_norm;
    Mat final_hidden;
  };

  /// Incremental decoding state of one sequence.
  struct DecodeState {
    std::vector<Mat> cross_k, cross_v;  // per layer, src_len x d
    std::vector<Mat> self_k, self_v;    // per layer, max_len x d
    int length = 0;
  };

  TransformerEngine(const ModelConfig& config, const ParamLayout& layout,
                    std::vector<const T*> params);

  const ModelConfig& config() const { return config_; }

  /// Logits for every decoder input position of every example, packed in
  /// batch order (rows = sum of dec_in lengths). Train mode applies
  /// dropout drawn from `dropout_seed`; eval mode is deterministic.
  Mat forward(std::span<const SeqExample> batch, Mode mode, std::uint64_t dropout_seed,
              Cache* cache) const;

  /// Accumulates d(loss)/d(param) into `grads` (one buffer per tensor,
  /// same layout as the parameters) given d(loss)/d(logits).
  void backward(const Cache& cache, const Mat& dlogits, std::span<T* const> grads) const;

  /// Runs the encoder (eval mode) and prepares one decode state per source.
  std::vector<DecodeState> start_decoding(std::span<const std::vector<TokenId>> sources) const;

  /// Feeds one token to each state and returns one logit row per state.
  Mat decode_step(std::span<DecodeState* const> states, std::span<const TokenId> tokens) const;

 private:
  const T* p(int idx) const { return params_[static_cast<std::size_t>(idx)]; }

  Mat embed(std::span<const TokenId> ids, std::span<const int> pos) const;
  Mat encoder_forward(const Segments& seg, std::span<const TokenId> ids, std::span<const int> pos,
                      Mode mode, Rng* rng, Cache* cache) const;
  Mat layer_norm(const Mat& x, const NormIdx& n, NormCache* cache) const;
  Mat layer_norm_backward(const Mat& dy, const NormCache& cache, const NormIdx& n,
                          std::span<T* const> grads) const;
  Mat linear(const Mat& x, int w, int b) const;
  Mat linear_backward(const Mat& x, const Mat& dy, int w, int b, std::span<T* const> grads) const;
  Mat attention(const Mat& hq, const Mat& hkv, const Segments& qs, const Segments& ks,
                const AttentionIdx& a, bool causal, AttentionCache* cache) const;
  void attention_backward(const Mat& hq, const Mat& hkv, const Segments& qs, const Segments& ks,
                          const AttentionIdx& a, const AttentionCache& cache, const Mat& dout,
                          std::span<T* const> grads, Mat* dhq, Mat* dhkv) const;
  Mat feed_forward(const Mat& h, const FeedForwardIdx& f, Mat* act) const;
  Mat feed_forward_backward(const Mat& h, const Mat& act, const Mat& dout,
                            const FeedForwardIdx& f, std::span<T* const> grads) const;
  void embed_backward(const Mat& dx, std::span<const TokenId> ids, std::span<const int> pos,
                      std::span<T* const> grads) const;
  Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, Mode mode, Rng* rng) const;

  ModelConfig config_;
  ParamLayout layout_;
  std::vector<const T*> params_;
};

extern template class TransformerEngine<float>;
extern template class TransformerEngine<double>;

}  // namespace translit
