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

// Span enumeration and span-level entity classification.

#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "puretoy/encoder.hpp"
#include "puretoy/labels.hpp"
#include "puretoy/tensor.hpp"

namespace puretoy {

// Inclusive token range, sentence-local.
struct Span {
  std::int32_t start = 0;
  std::int32_t end = 0;
  std::int32_t sentence_index = 0;

  std::int32_t width() const { return end - start + 1; }
  auto operator<=>(const Span&) const = default;
};

// A span with a class index into an entity LabelSet (0 = null).
struct TypedSpan {
  Span span;
  std::int32_t label = 0;

  auto operator<=>(const TypedSpan&) const = default;
};

struct EntityModelConfig {
  std::size_t max_span_len = 8;
  std::size_t width_emb_dim = 150;
  std::size_t ffnn_hidden = 150;

  void validate() const;
};

// All spans of width <= max_len ordered by (start, end).
std::vector<Span> enumerate_spans(std::size_t sentence_len, std::size_t max_len,
                                  std::int32_t sentence_index = 0);

// Rows [x_start; x_end; width_emb[width-1]] for each span. Span indices are
// sentence-local and shifted by offset into hidden; every span must fit
// inside [offset, offset + text_len).
Tensor span_representations(const Tensor& hidden, std::span<const Span> spans,
                            std::size_t offset, std::size_t text_len,
                            const Tensor& width_embeddings);

class EntityModel {
 public:
  // encoder_prefix defaults to "<prefix>.enc"; pass another model's encoder
  // prefix to share weights.
  EntityModel(EncoderConfig encoder, EntityModelConfig config, LabelSet labels,
              std::string prefix = "ent", std::string encoder_prefix = "");

  // Registers the encoder (unless skip_encoder) and the span head.
  void init(ParameterStore& params, std::mt19937_64& rng, bool skip_encoder = false) const;
  // Adds the auxiliary relation classifier over [h_i; h_j; h_i*h_j].
  void init_aux_relation(ParameterStore& params, std::size_t relation_classes,
                         std::mt19937_64& rng) const;

  const Encoder& encoder() const { return encoder_; }
  const EntityModelConfig& config() const { return config_; }
  const LabelSet& labels() const { return labels_; }
  std::size_t span_repr_dim() const;

  Tensor encode(const TokenWindow& window, const ParameterStore& params,
                std::mt19937_64* dropout_rng = nullptr) const;
  Tensor span_reprs(const Tensor& hidden, const TokenWindow& window,
                    std::span<const Span> spans, const ParameterStore& params) const;
  // Logits [spans, |labels|+1] from precomputed span representations.
  Tensor classify(const Tensor& span_reprs, const ParameterStore& params) const;
  Tensor forward(const Tensor& hidden, const TokenWindow& window, std::span<const Span> spans,
                 const ParameterStore& params) const;

  // Relation logits for ordered span pairs from span representations.
  Tensor aux_relation_logits(const Tensor& span_reprs,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs,
                             const ParameterStore& params) const;

 private:
  std::string prefix_;
  Encoder encoder_;
  EntityModelConfig config_;
  LabelSet labels_;
};

// Sum of per-span cross-entropies.
Tensor entity_loss(const Tensor& logits, std::span<const std::int32_t> gold_labels);

// Row-wise argmax, ties to the lowest index.
std::vector<std::int32_t> argmax_rows(const Tensor& logits);

// Argmax per span, ties to the lowest class index; null predictions dropped.
std::vector<TypedSpan> predict_entities(const Tensor& logits, std::span<const Span> spans);

// Pruning score of each span: max logit over non-null classes.
std::vector<double> span_scores(const Tensor& logits);

// The ceil(lambda * n) best spans by span_scores, ordered by descending
// score then (start, end).
std::vector<Span> top_lambda_spans(const Tensor& logits, std::span<const Span> spans,
                                   double lambda, std::size_t n);

}  // namespace puretoy
