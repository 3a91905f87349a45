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

#pragma once

// Post-layernorm transformer encoder driven by explicit position ids and
// an explicit attention mask shared by all layers.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puretoy/tensor.hpp"

namespace puretoy {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 64;
  std::size_t max_position = 512;
  double dropout = 0.0;

  void validate() const;
};

// A token sequence ready for the encoder. The first text_len tokens are
// text; anything after them is a marker block.
struct MarkedInput {
  std::vector<std::int32_t> token_ids;
  std::vector<std::int32_t> position_ids;
  // size()*size() row-major; mask[i*T + j] != 0 means query i sees key j.
  std::vector<std::uint8_t> attention_mask;
  std::size_t text_len = 0;

  std::size_t size() const { return token_ids.size(); }
  bool allows(std::size_t query, std::size_t key) const {
    return attention_mask[query * size() + key] != 0;
  }

  // Positions 0..T-1 and a full mask.
  static MarkedInput sequential(std::vector<std::int32_t> tokens);

  // Throws InputError on inconsistent sizes, a missing diagonal, or ids
  // outside the configured tables.
  void validate(const EncoderConfig& config) const;
};

// Token ids of a context window around one target sentence.
struct TokenWindow {
  std::vector<std::int32_t> tokens;
  std::size_t target_offset = 0;
  std::size_t target_len = 0;
};

// (I | mask)^n_layers over the boolean semiring: entry (i, j) says input j
// can influence output i after that many masked layers.
std::vector<std::uint8_t> reachability_closure(std::span<const std::uint8_t> mask,
                                               std::size_t size, std::size_t n_layers);

class Encoder {
 public:
  Encoder(EncoderConfig config, std::string prefix);

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

  // Registers <prefix>.tok_emb, <prefix>.pos_emb and per-layer weights.
  void init(ParameterStore& params, std::mt19937_64& rng) const;

  // Returns T x d_model hidden states. dropout_rng enables dropout when the
  // configured rate is positive; pass nullptr for inference.
  Tensor encode(const MarkedInput& input, const ParameterStore& params,
                std::mt19937_64* dropout_rng = nullptr) const;

 private:
  std::string name(std::size_t layer, const char* leaf) const;

  EncoderConfig config_;
  std::string prefix_;
};

}  // namespace puretoy
