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

#include "translit/transformer.hpp"

#include <cmath>
#include <limits>

namespace translit {

std::vector<TokenId> unpadded(const EncodedSequence& seq) {
  std::vector<TokenId> out;
  bool in_prefix = true;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const bool keep = i < seq.attention_mask.size() && seq.attention_mask[i] == 1;
    if (keep && !in_prefix) throw PreconditionError("attention mask must be a prefix of ones");
    if (!keep) {
      in_prefix = false;
      continue;
    }
    out.push_back(seq.ids[i]);
  }
  return out;
}

SeqExample make_example(const EncodedSequence& src, const EncodedSequence& tgt) {
  SeqExample ex;
  ex.src = unpadded(src);
  const auto full = unpadded(tgt);
  if (full.size() < 2) throw PreconditionError("target needs a language token and EOS");
  ex.dec_in.assign(full.begin(), full.end() - 1);
  ex.labels.assign(full.begin() + 1, full.end());
  return ex;
}

namespace {

constexpr double kNormEps = 1e-5;

template <typename Mat>
void check_ids(std::span<const TokenId> ids, int vocab) {
  for (TokenId id : ids) {
    if (id < 0 || id >= vocab) throw PreconditionError("token id out of range: " + std::to_string(id));
  }
}

}  // namespace

template <typename T>
TransformerEngine<T>::TransformerEngine(const ModelConfig& config, const ParamLayout& layout,
                                        std::vector<const T*> params)
    : config_(config), layout_(layout), params_(std::move(params)) {
  config_.validate();
  if (params_.size() != layout_.tensors.size()) {
    throw PreconditionError("parameter count does not match the model layout");
  }
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::embed(std::span<const TokenId> ids,
                                                               std::span<const int> pos) const {
  const int d = config_.d_model;
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Eigen::Map<const Mat> table(p(layout_.embed), config_.vocab_size, d);
  Eigen::Map<const Mat> positions(p(layout_.positional), config_.max_len, d);
  Mat x(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = table.row(ids[r]) * scale + positions.row(pos[r]);
  }
  return x;
}

template <typename T>
void TransformerEngine<T>::embed_backward(const Mat& dx, std::span<const TokenId> ids,
                                          std::span<const int> pos,
                                          std::span<T* const> grads) const {
  const int d = config_.d_model;
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Eigen::Map<Mat> dtable(grads[static_cast<std::size_t>(layout_.embed)], config_.vocab_size, d);
  Eigen::Map<Mat> dpos(grads[static_cast<std::size_t>(layout_.positional)], config_.max_len, d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    dtable.row(ids[r]) += dx.row(static_cast<Eigen::Index>(r)) * scale;
    dpos.row(pos[r]) += dx.row(static_cast<Eigen::Index>(r));
  }
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::dropout_mask(Eigen::Index rows,
                                                                      Eigen::Index cols, Mode mode,
                                                                      Rng* rng) const {
  if (mode != Mode::kTrain || config_.dropout_rate <= 0.0 || rng == nullptr) return Mat();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - config_.dropout_rate));
  Mat mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->bernoulli(config_.dropout_rate) ? T(0) : keep_scale;
  }
  return mask;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::layer_norm(const Mat& x, const NormIdx& n,
                                                                    NormCache* cache) const {
  const Eigen::Index d = x.cols();
  Eigen::Map<const RowVec> gamma(p(n.gamma), d);
  Eigen::Map<const RowVec> beta(p(n.beta), d);
  Mat xhat(x.rows(), d);
  std::vector<T> inv(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    xhat.row(r) = (x.row(r).array() - mean) * inv_std;
    inv[static_cast<std::size_t>(r)] = inv_std;
  }
  Mat y = (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::layer_norm_backward(
    const Mat& dy, const NormCache& cache, const NormIdx& n, std::span<T* const> grads) const {
  const Eigen::Index d = dy.cols();
  Eigen::Map<const RowVec> gamma(p(n.gamma), d);
  Eigen::Map<RowVec> dgamma(grads[static_cast<std::size_t>(n.gamma)], d);
  Eigen::Map<RowVec> dbeta(grads[static_cast<std::size_t>(n.beta)], d);
  dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * gamma.array();
  Mat dx(dy.rows(), d);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_dxhat = dxhat.row(r).mean();
    const T mean_dxhat_xhat = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = (dxhat.row(r).array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat) *
                cache.inv_std[static_cast<std::size_t>(r)];
  }
  return dx;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::linear(const Mat& x, int w, int b) const {
  const auto& shape = layout_.tensors[static_cast<std::size_t>(w)].shape;
  Eigen::Map<const Mat> weight(p(w), shape[0], shape[1]);
  Eigen::Map<const RowVec> bias(p(b), shape[1]);
  Mat y(x.rows(), shape[1]);
  y.noalias() = x * weight;
  y.rowwise() += bias;
  return y;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::linear_backward(
    const Mat& x, const Mat& dy, int w, int b, std::span<T* const> grads) const {
  const auto& shape = layout_.tensors[static_cast<std::size_t>(w)].shape;
  Eigen::Map<const Mat> weight(p(w), shape[0], shape[1]);
  Eigen::Map<Mat> dweight(grads[static_cast<std::size_t>(w)], shape[0], shape[1]);
  Eigen::Map<RowVec> dbias(grads[static_cast<std::size_t>(b)], shape[1]);
  dweight.noalias() += x.transpose() * dy;
  dbias += dy.colwise().sum();
  Mat dx(dy.rows(), shape[0]);
  dx.noalias() = dy * weight.transpose();
  return dx;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::attention(
    const Mat& hq, const Mat& hkv, const Segments& qs, const Segments& ks, const AttentionIdx& a,
    bool causal, AttentionCache* cache) const {
  const int heads = config_.n_heads;
  const int dh = config_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Mat q = linear(hq, a.wq, a.bq);
  Mat k = linear(hkv, a.wk, a.bk);
  Mat v = linear(hkv, a.wv, a.bv);
  Mat o = Mat::Zero(hq.rows(), config_.d_model);
  if (cache) cache->probs.clear();
  for (std::size_t s = 0; s < qs.offset.size(); ++s) {
    const int qo = qs.offset[s], ql = qs.length[s];
    const int ko = ks.offset[s], kl = ks.length[s];
    for (int h = 0; h < heads; ++h) {
      Mat scores(ql, kl);
      scores.noalias() = q.block(qo, h * dh, ql, dh) * k.block(ko, h * dh, kl, dh).transpose();
      scores *= scale;
      for (int i = 0; i < ql; ++i) {
        const int visible = causal ? i + 1 : kl;
        const T mx = scores.row(i).head(visible).maxCoeff();
        T sum = 0;
        for (int j = 0; j < kl; ++j) {
          const T e = j < visible ? std::exp(scores(i, j) - mx) : T(0);
          scores(i, j) = e;
          sum += e;
        }
        scores.row(i) /= sum;
      }
      o.block(qo, h * dh, ql, dh).noalias() = scores * v.block(ko, h * dh, kl, dh);
      if (cache) cache->probs.push_back(std::move(scores));
    }
  }
  Mat out = linear(o, a.wo, a.bo);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
  }
  return out;
}

template <typename T>
void TransformerEngine<T>::attention_backward(const Mat& hq, const Mat& hkv, const Segments& qs,
                                              const Segments& ks, const AttentionIdx& a,
                                              const AttentionCache& cache, const Mat& dout,
                                              std::span<T* const> grads, Mat* dhq,
                                              Mat* dhkv) const {
  const int heads = config_.n_heads;
  const int dh = config_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  const Mat d_o = linear_backward(cache.o, dout, a.wo, a.bo, grads);
  Mat dq = Mat::Zero(cache.q.rows(), cache.q.cols());
  Mat dk = Mat::Zero(cache.k.rows(), cache.k.cols());
  Mat dv = Mat::Zero(cache.v.rows(), cache.v.cols());
  std::size_t idx = 0;
  for (std::size_t s = 0; s < qs.offset.size(); ++s) {
    const int qo = qs.offset[s], ql = qs.length[s];
    const int ko = ks.offset[s], kl = ks.length[s];
    for (int h = 0; h < heads; ++h) {
      const Mat& probs = cache.probs[idx++];
      const auto dos = d_o.block(qo, h * dh, ql, dh);
      Mat dprobs(ql, kl);
      dprobs.noalias() = dos * cache.v.block(ko, h * dh, kl, dh).transpose();
      dv.block(ko, h * dh, kl, dh).noalias() += probs.transpose() * dos;
      Mat dscores(ql, kl);
      for (int i = 0; i < ql; ++i) {
        const T dot = (dprobs.row(i).array() * probs.row(i).array()).sum();
        dscores.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot) * scale;
      }
      dq.block(qo, h * dh, ql, dh).noalias() += dscores * cache.k.block(ko, h * dh, kl, dh);
      dk.block(ko, h * dh, kl, dh).noalias() += dscores.transpose() * cache.q.block(qo, h * dh, ql, dh);
    }
  }
  *dhq = linear_backward(hq, dq, a.wq, a.bq, grads);
  *dhkv = linear_backward(hkv, dk, a.wk, a.bk, grads);
  *dhkv += linear_backward(hkv, dv, a.wv, a.bv, grads);
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::feed_forward(const Mat& h,
                                                                      const FeedForwardIdx& f,
                                                                      Mat* act) const {
  Mat hidden = linear(h, f.w1, f.b1).cwiseMax(T(0));
  Mat out = linear(hidden, f.w2, f.b2);
  if (act) *act = std::move(hidden);
  return out;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::feed_forward_backward(
    const Mat& h, const Mat& act, const Mat& dout, const FeedForwardIdx& f,
    std::span<T* const> grads) const {
  Mat dact = linear_backward(act, dout, f.w2, f.b2, grads);
  dact = (act.array() > T(0)).select(dact, T(0));
  return linear_backward(h, dact, f.w1, f.b1, grads);
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::encoder_forward(
    const Segments& seg, std::span<const TokenId> ids, std::span<const int> pos, Mode mode,
    Rng* rng, Cache* cache) const {
  auto apply = [](Mat& x, const Mat& mask) {
    if (mask.size() > 0) x.array() *= mask.array();
  };
  Mat x = embed(ids, pos);
  Mat drop = dropout_mask(x.rows(), x.cols(), mode, rng);
  apply(x, drop);
  if (cache) {
    cache->enc_embed_drop = std::move(drop);
    cache->enc.resize(layout_.encoder.size());
  }
  for (std::size_t l = 0; l < layout_.encoder.size(); ++l) {
    const auto& L = layout_.encoder[l];
    EncoderLayerCache local;
    EncoderLayerCache& c = cache ? cache->enc[l] : local;
    c.h1 = layer_norm(x, L.norm1, cache ? &c.norm1 : nullptr);
    Mat a = attention(c.h1, c.h1, seg, seg, L.self_attn, false, cache ? &c.attn : nullptr);
    c.drop1 = dropout_mask(a.rows(), a.cols(), mode, rng);
    apply(a, c.drop1);
    x += a;
    c.h2 = layer_norm(x, L.norm2, cache ? &c.norm2 : nullptr);
    Mat f = feed_forward(c.h2, L.ffn, cache ? &c.ffn_act : nullptr);
    c.drop2 = dropout_mask(f.rows(), f.cols(), mode, rng);
    apply(f, c.drop2);
    x += f;
  }
  return layer_norm(x, layout_.encoder_norm, cache ? &cache->enc_norm : nullptr);
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::forward(std::span<const SeqExample> batch,
                                                                 Mode mode,
                                                                 std::uint64_t dropout_seed,
                                                                 Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache{};
  for (const auto& ex : batch) {
    if (ex.src.empty() || ex.dec_in.empty()) throw PreconditionError("empty sequence in batch");
    if (static_cast<int>(ex.src.size()) > config_.max_len ||
        static_cast<int>(ex.dec_in.size()) > config_.max_len) {
      throw PreconditionError("sequence longer than max_len");
    }
    check_ids<Mat>(ex.src, config_.vocab_size);
    check_ids<Mat>(ex.dec_in, config_.vocab_size);
    c.enc_seg.offset.push_back(c.enc_seg.total);
    c.enc_seg.length.push_back(static_cast<int>(ex.src.size()));
    c.enc_seg.total += static_cast<int>(ex.src.size());
    c.dec_seg.offset.push_back(c.dec_seg.total);
    c.dec_seg.length.push_back(static_cast<int>(ex.dec_in.size()));
    c.dec_seg.total += static_cast<int>(ex.dec_in.size());
    for (std::size_t i = 0; i < ex.src.size(); ++i) {
      c.enc_ids.push_back(ex.src[i]);
      c.enc_pos.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < ex.dec_in.size(); ++i) {
      c.dec_ids.push_back(ex.dec_in[i]);
      c.dec_pos.push_back(static_cast<int>(i));
    }
  }
  Rng rng(dropout_seed);
  Cache* keep = cache ? &c : nullptr;
  c.memory = encoder_forward(c.enc_seg, c.enc_ids, c.enc_pos, mode, &rng, keep);

  auto apply = [](Mat& x, const Mat& mask) {
    if (mask.size() > 0) x.array() *= mask.array();
  };
  Mat y = embed(c.dec_ids, c.dec_pos);
  c.dec_embed_drop = dropout_mask(y.rows(), y.cols(), mode, &rng);
  apply(y, c.dec_embed_drop);
  c.dec.resize(layout_.decoder.size());
  for (std::size_t l = 0; l < layout_.decoder.size(); ++l) {
    const auto& L = layout_.decoder[l];
    auto& lc = c.dec[l];
    lc.h1 = layer_norm(y, L.norm1, keep ? &lc.norm1 : nullptr);
    Mat a = attention(lc.h1, lc.h1, c.dec_seg, c.dec_seg, L.self_attn, true,
                      keep ? &lc.self_attn : nullptr);
    lc.drop1 = dropout_mask(a.rows(), a.cols(), mode, &rng);
    apply(a, lc.drop1);
    y += a;
    lc.h2 = layer_norm(y, L.norm2, keep ? &lc.norm2 : nullptr);
    Mat x = attention(lc.h2, c.memory, c.dec_seg, c.enc_seg, L.cross_attn, false,
                      keep ? &lc.cross_attn : nullptr);
    lc.drop2 = dropout_mask(x.rows(), x.cols(), mode, &rng);
    apply(x, lc.drop2);
    y += x;
    lc.h3 = layer_norm(y, L.norm3, keep ? &lc.norm3 : nullptr);
    Mat f = feed_forward(lc.h3, L.ffn, keep ? &lc.ffn_act : nullptr);
    lc.drop3 = dropout_mask(f.rows(), f.cols(), mode, &rng);
    apply(f, lc.drop3);
    y += f;
  }
  c.final_hidden = layer_norm(y, layout_.decoder_norm, keep ? &c.dec_norm : nullptr);
  Mat logits = linear(c.final_hidden, layout_.lm_head_w, layout_.lm_head_b);
  if (!cache) local = Cache{};
  return logits;
}

template <typename T>
void TransformerEngine<T>::backward(const Cache& c, const Mat& dlogits,
                                    std::span<T* const> grads) const {
  if (grads.size() != params_.size()) throw PreconditionError("gradient buffer count mismatch");
  auto apply = [](Mat& x, const Mat& mask) {
    if (mask.size() > 0) x.array() *= mask.array();
  };
  Mat dhidden = linear_backward(c.final_hidden, dlogits, layout_.lm_head_w, layout_.lm_head_b, grads);
  Mat dy = layer_norm_backward(dhidden, c.dec_norm, layout_.decoder_norm, grads);
  Mat dmemory = Mat::Zero(c.memory.rows(), c.memory.cols());
  for (std::size_t l = layout_.decoder.size(); l-- > 0;) {
    const auto& L = layout_.decoder[l];
    const auto& lc = c.dec[l];
    Mat df = dy;
    apply(df, lc.drop3);
    dy += layer_norm_backward(feed_forward_backward(lc.h3, lc.ffn_act, df, L.ffn, grads), lc.norm3,
                              L.norm3, grads);
    Mat dx = dy;
    apply(dx, lc.drop2);
    Mat dh2, dmem;
    attention_backward(lc.h2, c.memory, c.dec_seg, c.enc_seg, L.cross_attn, lc.cross_attn, dx,
                       grads, &dh2, &dmem);
    dmemory += dmem;
    dy += layer_norm_backward(dh2, lc.norm2, L.norm2, grads);
    Mat da = dy;
    apply(da, lc.drop1);
    Mat dq, dkv;
    attention_backward(lc.h1, lc.h1, c.dec_seg, c.dec_seg, L.self_attn, lc.self_attn, da, grads,
                       &dq, &dkv);
    dq += dkv;
    dy += layer_norm_backward(dq, lc.norm1, L.norm1, grads);
  }
  apply(dy, c.dec_embed_drop);
  embed_backward(dy, c.dec_ids, c.dec_pos, grads);

  Mat dx = layer_norm_backward(dmemory, c.enc_norm, layout_.encoder_norm, grads);
  for (std::size_t l = layout_.encoder.size(); l-- > 0;) {
    const auto& L = layout_.encoder[l];
    const auto& lc = c.enc[l];
    Mat df = dx;
    apply(df, lc.drop2);
    dx += layer_norm_backward(feed_forward_backward(lc.h2, lc.ffn_act, df, L.ffn, grads), lc.norm2,
                              L.norm2, grads);
    Mat da = dx;
    apply(da, lc.drop1);
    Mat dq, dkv;
    attention_backward(lc.h1, lc.h1, c.enc_seg, c.enc_seg, L.self_attn, lc.attn, da, grads, &dq,
                       &dkv);
    dq += dkv;
    dx += layer_norm_backward(dq, lc.norm1, L.norm1, grads);
  }
  apply(dx, c.enc_embed_drop);
  embed_backward(dx, c.enc_ids, c.enc_pos, grads);
}

template <typename T>
std::vector<typename TransformerEngine<T>::DecodeState> TransformerEngine<T>::start_decoding(
    std::span<const std::vector<TokenId>> sources) const {
  Segments seg;
  std::vector<TokenId> ids;
  std::vector<int> pos;
  for (const auto& src : sources) {
    if (src.empty() || static_cast<int>(src.size()) > config_.max_len) {
      throw PreconditionError("source length out of range");
    }
    check_ids<Mat>(src, config_.vocab_size);
    seg.offset.push_back(seg.total);
    seg.length.push_back(static_cast<int>(src.size()));
    seg.total += static_cast<int>(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      ids.push_back(src[i]);
      pos.push_back(static_cast<int>(i));
    }
  }
  std::vector<DecodeState> states(sources.size());
  if (sources.empty()) return states;
  const Mat memory = encoder_forward(seg, ids, pos, Mode::kEval, nullptr, nullptr);
  for (const auto& L : layout_.decoder) {
    const Mat k = linear(memory, L.cross_attn.wk, L.cross_attn.bk);
    const Mat v = linear(memory, L.cross_attn.wv, L.cross_attn.bv);
    for (std::size_t s = 0; s < states.size(); ++s) {
      states[s].cross_k.push_back(k.middleRows(seg.offset[s], seg.length[s]));
      states[s].cross_v.push_back(v.middleRows(seg.offset[s], seg.length[s]));
      states[s].self_k.push_back(Mat::Zero(config_.max_len, config_.d_model));
      states[s].self_v.push_back(Mat::Zero(config_.max_len, config_.d_model));
    }
  }
  return states;
}

template <typename T>
typename TransformerEngine<T>::Mat TransformerEngine<T>::decode_step(
    std::span<DecodeState* const> states, std::span<const TokenId> tokens) const {
  if (states.size() != tokens.size()) throw PreconditionError("one token per decode state");
  const int heads = config_.n_heads;
  const int dh = config_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<int> pos;
  for (auto* s : states) {
    if (s->length >= config_.max_len) throw PreconditionError("decode state is full");
    pos.push_back(s->length);
  }
  check_ids<Mat>(tokens, config_.vocab_size);
  const auto rows = static_cast<Eigen::Index>(states.size());

  // Attention of one query row over the first `n` rows of keys/values.
  auto attend = [&](const auto& q, const Mat& keys, const Mat& values, int n, auto out) {
    for (int h = 0; h < heads; ++h) {
      RowVec scores = (q.segment(h * dh, dh) * keys.block(0, h * dh, n, dh).transpose()) * scale;
      const T mx = scores.maxCoeff();
      scores = (scores.array() - mx).exp();
      scores /= scores.sum();
      out.segment(h * dh, dh) = scores * values.block(0, h * dh, n, dh);
    }
  };

  Mat y = embed(tokens, pos);
  for (std::size_t l = 0; l < layout_.decoder.size(); ++l) {
    const auto& L = layout_.decoder[l];
    {
      const Mat h = layer_norm(y, L.norm1, nullptr);
      const Mat q = linear(h, L.self_attn.wq, L.self_attn.bq);
      const Mat k = linear(h, L.self_attn.wk, L.self_attn.bk);
      const Mat v = linear(h, L.self_attn.wv, L.self_attn.bv);
      Mat o(rows, config_.d_model);
      for (Eigen::Index b = 0; b < rows; ++b) {
        auto& s = *states[static_cast<std::size_t>(b)];
        s.self_k[l].row(s.length) = k.row(b);
        s.self_v[l].row(s.length) = v.row(b);
        attend(q.row(b), s.self_k[l], s.self_v[l], s.length + 1, o.row(b));
      }
      y += linear(o, L.self_attn.wo, L.self_attn.bo);
    }
    {
      const Mat h = layer_norm(y, L.norm2, nullptr);
      const Mat q = linear(h, L.cross_attn.wq, L.cross_attn.bq);
      Mat o(rows, config_.d_model);
      for (Eigen::Index b = 0; b < rows; ++b) {
        const auto& s = *states[static_cast<std::size_t>(b)];
        attend(q.row(b), s.cross_k[l], s.cross_v[l], static_cast<int>(s.cross_k[l].rows()),
               o.row(b));
      }
      y += linear(o, L.cross_attn.wo, L.cross_attn.bo);
    }
    y += feed_forward(layer_norm(y, L.norm3, nullptr), L.ffn, nullptr);
  }
  for (auto* s : states) ++s->length;
  return linear(layer_norm(y, layout_.decoder_norm, nullptr), layout_.lm_head_w, layout_.lm_head_b);
}

template class TransformerEngine<float>;
template class TransformerEngine<double>;

}  // namespace translit
