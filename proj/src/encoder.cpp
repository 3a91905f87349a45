// Copyright 2026 The PureToy Authors.
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

#include "puretoy/encoder.hpp"

#include <cmath>

#include "puretoy/errors.hpp"

namespace puretoy {

namespace {
constexpr double kInitStd = 0.02;
}

void EncoderConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 ||
      max_position == 0) {
    throw ConfigError("encoder: all extents must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("encoder: d_model " + std::to_string(d_model) +
                      " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
}

MarkedInput MarkedInput::sequential(std::vector<std::int32_t> tokens) {
  MarkedInput in;
  const std::size_t t = tokens.size();
  in.token_ids = std::move(tokens);
  in.position_ids.resize(t);
  for (std::size_t i = 0; i < t; ++i) in.position_ids[i] = static_cast<std::int32_t>(i);
  in.attention_mask.assign(t * t, 1);
  in.text_len = t;
  return in;
}

void MarkedInput::validate(const EncoderConfig& config) const {
  const std::size_t t = size();
  if (position_ids.size() != t) {
    throw InputError("marked input: " + std::to_string(position_ids.size()) +
                     " position ids for " + std::to_string(t) + " tokens");
  }
  if (attention_mask.size() != t * t) throw InputError("marked input: mask is not T x T");
  if (text_len > t) throw InputError("marked input: text_len exceeds sequence length");
  for (std::size_t i = 0; i < t; ++i) {
    if (token_ids[i] < 0 || static_cast<std::size_t>(token_ids[i]) >= config.vocab_size) {
      throw InputError("marked input: token id " + std::to_string(token_ids[i]) + " at index " +
                       std::to_string(i) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
    if (position_ids[i] < 0 || static_cast<std::size_t>(position_ids[i]) >= config.max_position) {
      throw InputError("marked input: position id " + std::to_string(position_ids[i]) +
                       " at index " + std::to_string(i) + " outside max_position " +
                       std::to_string(config.max_position));
    }
    if (!allows(i, i)) {
      throw InputError("marked input: token " + std::to_string(i) + " cannot attend to itself");
    }
  }
}

std::vector<std::uint8_t> reachability_closure(std::span<const std::uint8_t> mask,
                                               std::size_t size, std::size_t n_layers) {
  if (mask.size() != size * size) throw ConfigError("reachability_closure: mask not square");
  std::vector<std::uint8_t> step(size * size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) step[i * size + j] = (i == j) || mask[i * size + j];

  std::vector<std::uint8_t> reach(size * size, 0);
  for (std::size_t i = 0; i < size; ++i) reach[i * size + i] = 1;
  for (std::size_t layer = 0; layer < n_layers; ++layer) {
    std::vector<std::uint8_t> next(size * size, 0);
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t k = 0; k < size; ++k) {
        if (!step[i * size + k]) continue;
        for (std::size_t j = 0; j < size; ++j)
          if (reach[k * size + j]) next[i * size + j] = 1;
      }
    reach = std::move(next);
  }
  return reach;
}

Encoder::Encoder(EncoderConfig config, std::string prefix)
    : config_(config), prefix_(std::move(prefix)) {
  config_.validate();
}

std::string Encoder::name(std::size_t layer, const char* leaf) const {
  return prefix_ + ".l" + std::to_string(layer) + "." + leaf;
}

void Encoder::init(ParameterStore& params, std::mt19937_64& rng) const {
  const std::size_t d = config_.d_model, f = config_.d_ff;
  params.add(prefix_ + ".tok_emb", normal_init({config_.vocab_size, d}, kInitStd, rng));
  params.add(prefix_ + ".pos_emb", normal_init({config_.max_position, d}, kInitStd, rng));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      params.add(name(l, w), normal_init({d, d}, kInitStd, rng));
      params.add(name(l, w) + "_b", Tensor::zeros({d}));
    }
    params.add(name(l, "ln1_g"), Tensor::full({d}, 1.0));
    params.add(name(l, "ln1_b"), Tensor::zeros({d}));
    params.add(name(l, "ff1"), normal_init({d, f}, kInitStd, rng));
    params.add(name(l, "ff1_b"), Tensor::zeros({f}));
    params.add(name(l, "ff2"), normal_init({f, d}, kInitStd, rng));
    params.add(name(l, "ff2_b"), Tensor::zeros({d}));
    params.add(name(l, "ln2_g"), Tensor::full({d}, 1.0));
    params.add(name(l, "ln2_b"), Tensor::zeros({d}));
  }
}

Tensor Encoder::encode(const MarkedInput& input, const ParameterStore& params,
                       std::mt19937_64* dropout_rng) const {
  input.validate(config_);
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;

  auto linear = [&](const Tensor& x, const std::string& w) {
    return add_row(matmul(x, params.get(w)), params.get(w + "_b"));
  };
  auto maybe_dropout = [&](const Tensor& x) {
    return use_dropout ? dropout(x, config_.dropout, *dropout_rng) : x;
  };

  Tensor h = add(gather_rows(params.get(prefix_ + ".tok_emb"), input.token_ids),
                 gather_rows(params.get(prefix_ + ".pos_emb"), input.position_ids));
  h = maybe_dropout(h);

  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const Tensor q = linear(h, name(l, "wq"));
    const Tensor k = linear(h, name(l, "wk"));
    const Tensor v = linear(h, name(l, "wv"));
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t b = hd * dh, e = b + dh;
      Tensor scores = scale(
          matmul_nt_masked(slice_cols(q, b, e), slice_cols(k, b, e), input.attention_mask),
          inv_sqrt);
      Tensor probs = masked_softmax(scores, input.attention_mask);
      head_out.push_back(matmul(probs, slice_cols(v, b, e)));
    }
    Tensor attn = maybe_dropout(linear(concat_cols(head_out), name(l, "wo")));
    h = layer_norm(add(h, attn), params.get(name(l, "ln1_g")), params.get(name(l, "ln1_b")));

    Tensor ff = linear(gelu(linear(h, name(l, "ff1"))), name(l, "ff2"));
    ff = maybe_dropout(ff);
    h = layer_norm(add(h, ff), params.get(name(l, "ln2_g")), params.get(name(l, "ln2_b")));
  }
  return h;
}

}  // namespace puretoy
