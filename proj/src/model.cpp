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

#include "translit/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "translit/digest.hpp"

namespace translit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order");

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw PreconditionError("vocab_size must be positive");
  if (d_model <= 0 || n_heads <= 0) throw PreconditionError("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) {
    throw PreconditionError("d_model (" + std::to_string(d_model) +
                            ") is not divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
  if (enc_layers < 0 || dec_layers < 1) throw PreconditionError("need >= 1 decoder layer");
  if (ffn_dim <= 0 || max_len < 2) throw PreconditionError("ffn_dim and max_len must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw PreconditionError("dropout_rate in [0, 1)");
}

std::size_t TensorSpec::numel() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string_view to_string(FreezePolicy policy) {
  return policy == FreezePolicy::kMlm ? "mlm" : "none";
}

ParamLayout ParamLayout::make(const ModelConfig& c) {
  ParamLayout layout;
  auto add = [&](std::string name, std::vector<int> shape, bool learnable = true) {
    layout.tensors.push_back({std::move(name), std::move(shape), learnable});
    return static_cast<int>(layout.tensors.size() - 1);
  };
  const int d = c.d_model;
  auto norm = [&](const std::string& prefix) {
    return NormIdx{add(prefix + ".weight", {d}), add(prefix + ".bias", {d})};
  };
  auto attention = [&](const std::string& prefix) {
    AttentionIdx a{};
    a.wq = add(prefix + ".q_proj.weight", {d, d});
    a.bq = add(prefix + ".q_proj.bias", {d});
    a.wk = add(prefix + ".k_proj.weight", {d, d});
    a.bk = add(prefix + ".k_proj.bias", {d});
    a.wv = add(prefix + ".v_proj.weight", {d, d});
    a.bv = add(prefix + ".v_proj.bias", {d});
    a.wo = add(prefix + ".out_proj.weight", {d, d});
    a.bo = add(prefix + ".out_proj.bias", {d});
    return a;
  };
  auto ffn = [&](const std::string& prefix) {
    return FeedForwardIdx{add(prefix + ".fc1.weight", {d, c.ffn_dim}),
                          add(prefix + ".fc1.bias", {c.ffn_dim}),
                          add(prefix + ".fc2.weight", {c.ffn_dim, d}), add(prefix + ".fc2.bias", {d})};
  };

  layout.embed = add("shared.embed_tokens", {c.vocab_size, d});
  layout.positional = add("shared.embed_positions", {c.max_len, d}, false);
  for (int l = 0; l < c.enc_layers; ++l) {
    const std::string p = "encoder.layers." + std::to_string(l);
    EncoderLayerIdx e{};
    e.norm1 = norm(p + ".self_attn_layer_norm");
    e.self_attn = attention(p + ".self_attn");
    e.norm2 = norm(p + ".final_layer_norm");
    e.ffn = ffn(p);
    layout.encoder.push_back(e);
  }
  layout.encoder_norm = norm("encoder.layer_norm");
  for (int l = 0; l < c.dec_layers; ++l) {
    const std::string p = "decoder.layers." + std::to_string(l);
    DecoderLayerIdx e{};
    e.norm1 = norm(p + ".self_attn_layer_norm");
    e.self_attn = attention(p + ".self_attn");
    e.norm2 = norm(p + ".encoder_attn_layer_norm");
    e.cross_attn = attention(p + ".encoder_attn");
    e.norm3 = norm(p + ".final_layer_norm");
    e.ffn = ffn(p);
    layout.decoder.push_back(e);
  }
  layout.decoder_norm = norm("decoder.layer_norm");
  layout.lm_head_w = add("decoder.lm_head.weight", {d, c.vocab_size});
  layout.lm_head_b = add("decoder.lm_head.bias", {c.vocab_size});
  return layout;
}

int ParamLayout::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t ModelState::learnable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : layout.tensors) {
    if (t.learnable) n += t.numel();
  }
  return n;
}

std::size_t ModelState::frozen_tensor_count() const {
  std::size_t n = 0;
  for (bool f : frozen) n += f ? 1 : 0;
  return n;
}

std::vector<const float*> ModelState::param_ptrs() const {
  std::vector<const float*> out;
  out.reserve(params.size());
  for (const auto& t : params) out.push_back(t.data.data());
  return out;
}

void ModelState::reset_optimizer() {
  moments.assign(params.size(), MomentState{});
}

ModelState init_model(const ModelConfig& config) {
  config.validate();
  ModelState m;
  m.config = config;
  m.layout = ParamLayout::make(config);
  m.rng = Rng(derive_seed(config.seed, 0x7261696eULL));
  Rng init_rng(derive_seed(config.seed, 0x696e6974ULL));
  const int d = config.d_model;
  for (std::size_t i = 0; i < m.layout.tensors.size(); ++i) {
    const auto& spec = m.layout.tensors[i];
    Tensor t{spec.shape, AlignedVector<float>(spec.numel(), 0.0f)};
    const bool is_norm_weight = spec.name.ends_with("layer_norm.weight");
    if (static_cast<int>(i) == m.layout.positional) {
      for (int pos = 0; pos < config.max_len; ++pos) {
        for (int k = 0; k < d; k += 2) {
          const double freq = std::pow(10000.0, -static_cast<double>(k) / d);
          t.data[static_cast<std::size_t>(pos * d + k)] = static_cast<float>(std::sin(pos * freq));
          if (k + 1 < d) {
            t.data[static_cast<std::size_t>(pos * d + k + 1)] =
                static_cast<float>(std::cos(pos * freq));
          }
        }
      }
    } else if (static_cast<int>(i) == m.layout.embed) {
      const double limit = std::sqrt(3.0 / d);
      for (auto& x : t.data) x = static_cast<float>((2.0 * init_rng.uniform_real() - 1.0) * limit);
    } else if (is_norm_weight) {
      std::fill(t.data.begin(), t.data.end(), 1.0f);
    } else if (spec.shape.size() == 2) {
      const double limit = std::sqrt(6.0 / (spec.shape[0] + spec.shape[1]));
      for (auto& x : t.data) x = static_cast<float>((2.0 * init_rng.uniform_real() - 1.0) * limit);
    }
    m.params.push_back(std::move(t));
  }
  m.frozen.assign(m.params.size(), false);
  m.reset_optimizer();
  return m;
}

void set_freeze(ModelState& model, FreezePolicy policy) {
  std::fill(model.frozen.begin(), model.frozen.end(), false);
  model.freeze_policy = policy;
  if (policy == FreezePolicy::kNone) return;
  if (model.config.enc_layers < 2 || model.config.dec_layers < 2) {
    model.freeze_policy = FreezePolicy::kNone;
    throw PreconditionError("mlm freeze policy needs >= 2 encoder and >= 2 decoder layers");
  }
  static const char* const kPrefixes[] = {"shared.", "encoder.layers.0.", "encoder.layers.1.",
                                          "decoder.layers.0.", "decoder.layers.1."};
  for (std::size_t i = 0; i < model.layout.tensors.size(); ++i) {
    for (const char* prefix : kPrefixes) {
      if (model.layout.tensors[i].name.starts_with(prefix)) model.frozen[i] = true;
    }
  }
}

Gradients zero_gradients(const ModelState& model) {
  Gradients g;
  g.reserve(model.params.size());
  for (const auto& t : model.params) g.emplace_back(t.data.size(), 0.0f);
  return g;
}

void adamw_step(ModelState& model, const Gradients& grads, const AdamWConfig& opt) {
  if (grads.size() != model.params.size()) throw PreconditionError("gradient count mismatch");
  if (model.moments.size() != model.params.size()) model.reset_optimizer();
  auto updated = [&](std::size_t i) {
    return model.layout.tensors[i].learnable && !model.frozen[i];
  };
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != model.params[i].data.size()) {
      throw PreconditionError("gradient shape mismatch for " + model.layout.tensors[i].name);
    }
    if (!updated(i)) continue;
    for (float g : grads[i]) {
      if (!std::isfinite(g)) {
        throw Error("non-finite gradient in " + model.layout.tensors[i].name);
      }
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!updated(i)) continue;
    auto& mom = model.moments[i];
    auto& p = model.params[i].data;
    if (mom.m.empty()) {
      mom.m.assign(p.size(), 0.0f);
      mom.v.assign(p.size(), 0.0f);
    }
    ++mom.steps;
    adamw_update<float>(p, mom.m, mom.v, grads[i], mom.steps, opt);
  }
  ++model.step;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr std::string_view kMagic = "translit-checkpoint";

std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> shape;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, 'x')) shape.push_back(std::stoi(part));
  return shape;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string serialize_checkpoint(const ModelState& model) {
  const auto& c = model.config;
  std::ostringstream head;
  head << kMagic << '\n';
  head << "format_version=" << kCheckpointVersion << '\n';
  head << "config.vocab_size=" << c.vocab_size << '\n';
  head << "config.d_model=" << c.d_model << '\n';
  head << "config.n_heads=" << c.n_heads << '\n';
  head << "config.enc_layers=" << c.enc_layers << '\n';
  head << "config.dec_layers=" << c.dec_layers << '\n';
  head << "config.ffn_dim=" << c.ffn_dim << '\n';
  head << "config.max_len=" << c.max_len << '\n';
  head << "config.dropout_rate=" << format_double(c.dropout_rate) << '\n';
  head << "config.seed=" << c.seed << '\n';
  head << "step=" << model.step << '\n';
  head << "freeze_policy=" << to_string(model.freeze_policy) << '\n';
  head << "rng_state=" << model.rng.state() << '\n';
  for (const auto& [k, v] : model.tags) head << "tag." << k << '=' << v << '\n';
  std::size_t payload_bytes = 0;
  for (const auto& t : model.params) payload_bytes += t.data.size() * sizeof(float);
  head << "tensor_count=" << model.params.size() << '\n';
  head << "payload_bytes=" << payload_bytes << '\n';
  std::size_t offset = 0;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    head << model.layout.tensors[i].name << ' ' << shape_string(model.params[i].shape)
         << " f32le " << offset << '\n';
    offset += model.params[i].data.size() * sizeof(float);
  }
  head << '\n';

  std::string payload(payload_bytes, '\0');
  offset = 0;
  for (const auto& t : model.params) {
    std::memcpy(payload.data() + offset, t.data.data(), t.data.size() * sizeof(float));
    offset += t.data.size() * sizeof(float);
  }
  const std::uint64_t sum = checksum64(payload);
  std::string out = head.str();
  out += payload;
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((sum >> (8 * i)) & 0xFF));
  return out;
}

ModelState parse_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError("truncated checkpoint manifest");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw FormatError("not a translit checkpoint");
  std::map<std::string, std::string> kv;
  std::vector<std::string> table;
  for (std::string_view line = next_line(); !line.empty(); line = next_line()) {
    const std::size_t eq = line.find('=');
    if (eq != std::string_view::npos && table.empty()) {
      kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    } else {
      table.emplace_back(line);
    }
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint manifest lacks " + key);
    return it->second;
  };
  const int version = std::stoi(get("format_version"));
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint format version " + std::to_string(version) +
                       " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  c.vocab_size = std::stoi(get("config.vocab_size"));
  c.d_model = std::stoi(get("config.d_model"));
  c.n_heads = std::stoi(get("config.n_heads"));
  c.enc_layers = std::stoi(get("config.enc_layers"));
  c.dec_layers = std::stoi(get("config.dec_layers"));
  c.ffn_dim = std::stoi(get("config.ffn_dim"));
  c.max_len = std::stoi(get("config.max_len"));
  c.dropout_rate = std::stod(get("config.dropout_rate"));
  c.seed = std::stoull(get("config.seed"));

  ModelState m = init_model(c);
  m.step = std::stoll(get("step"));
  m.rng.set_state(get("rng_state"));
  for (const auto& [k, v] : kv) {
    if (k.starts_with("tag.")) m.tags[k.substr(4)] = v;
  }
  const std::size_t payload_bytes = std::stoull(get("payload_bytes"));
  if (table.size() != m.params.size() || std::stoull(get("tensor_count")) != m.params.size()) {
    throw FormatError("checkpoint tensor table does not match its config");
  }
  if (bytes.size() - pos < payload_bytes + 8) throw FormatError("truncated checkpoint payload");
  const std::string_view payload = bytes.substr(pos, payload_bytes);
  std::uint64_t stored = 0;
  for (int i = 7; i >= 0; --i) {
    stored = (stored << 8) | static_cast<unsigned char>(bytes[pos + payload_bytes + static_cast<std::size_t>(i)]);
  }
  if (stored != checksum64(payload)) throw ChecksumError("checkpoint payload checksum mismatch");

  for (std::size_t i = 0; i < table.size(); ++i) {
    std::istringstream row(table[i]);
    std::string name, shape, dtype;
    std::size_t offset = 0;
    row >> name >> shape >> dtype >> offset;
    if (name != m.layout.tensors[i].name || parse_shape(shape) != m.params[i].shape ||
        dtype != "f32le") {
      throw FormatError("unexpected tensor entry: " + table[i]);
    }
    const std::size_t n = m.params[i].data.size() * sizeof(float);
    if (offset + n > payload_bytes) throw FormatError("tensor extends past payload: " + name);
    std::memcpy(m.params[i].data.data(), payload.data() + offset, n);
  }
  set_freeze(m, get("freeze_policy") == "mlm" ? FreezePolicy::kMlm : FreezePolicy::kNone);
  return m;
}

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace translit
