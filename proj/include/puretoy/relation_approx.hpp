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

// Batched approximation of the relation model. Each pair contributes four
// markers appended after the text; a marker shares the position id of its
// span boundary. Text tokens attend only to text, and a pair's markers
// attend to the text plus their own four markers, so text states do not
// depend on which pairs are batched together.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "puretoy/encoder.hpp"
#include "puretoy/relation_model.hpp"

namespace puretoy {

struct PairBatch {
  std::vector<RelationCandidate> pairs;
  MarkedInput input;
};

// Marker block k sits at text_len + 4k .. text_len + 4k + 3 in the order
// S, /S, O, /O.
MarkedInput build_approx_input(std::span<const std::int32_t> window_tokens,
                               std::size_t target_offset, std::size_t target_len,
                               std::span<const RelationCandidate> pairs, bool typed_markers,
                               const MarkerVocabulary& markers);

// Greedy [begin, end) ranges over pairs: a pair joins the current batch
// while text_len + 4 * (count + 1) <= token_budget. A text that leaves no
// room falls back to one pair per batch (with a warning).
std::vector<std::pair<std::size_t, std::size_t>> chunk_pair_ranges(std::size_t text_len,
                                                                   std::size_t num_pairs,
                                                                   std::size_t token_budget);

std::vector<PairBatch> chunk_pairs(const TokenWindow& window,
                                   std::span<const RelationCandidate> pairs,
                                   std::size_t token_budget, const RelationModel& model);

// One encoder pass for the whole batch; row k of the logits belongs to pair
// k. Uses the same classifier parameters as the full model.
RelationOutput approx_forward(const PairBatch& batch, const RelationModel& model,
                              const ParameterStore& params);

// Classifies every ordered pair of predicted entities with batched passes.
struct ApproxPrediction {
  std::vector<PredictedRelation> relations;
  std::size_t encoder_passes = 0;
};
ApproxPrediction predict_relations_approx(const TokenWindow& window,
                                          std::span<const TypedSpan> predicted_entities,
                                          const RelationModel& model,
                                          const ParameterStore& params,
                                          std::size_t token_budget);

}  // namespace puretoy
