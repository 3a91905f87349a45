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

#include "puretoy/relation_approx.hpp"

#include <spdlog/spdlog.h>

#include "puretoy/errors.hpp"

namespace puretoy {

MarkedInput build_approx_input(std::span<const std::int32_t> window_tokens,
                               std::size_t target_offset, std::size_t target_len,
                               std::span<const RelationCandidate> pairs, bool typed_markers,
                               const MarkerVocabulary& markers) {
  if (pairs.empty()) throw InputError("build_approx_input: no pairs");
  if (target_offset + target_len > window_tokens.size()) {
    throw InputError("build_approx_input: target sentence outside window");
  }
  const std::size_t n = window_tokens.size();
  const std::size_t t = n + 4 * pairs.size();

  MarkedInput in;
  in.text_len = n;
  in.token_ids.assign(window_tokens.begin(), window_tokens.end());
  in.position_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) in.position_ids[i] = static_cast<std::int32_t>(i);

  for (const auto& c : pairs) {
    for (const Span* sp : {&c.subject.span, &c.object.span}) {
      if (sp->start < 0 || sp->end < sp->start ||
          static_cast<std::size_t>(sp->end) >= target_len) {
        throw InputError("build_approx_input: span (" + std::to_string(sp->start) + "," +
                         std::to_string(sp->end) + ") outside target sentence of length " +
                         std::to_string(target_len));
      }
    }
    const auto off = static_cast<std::int32_t>(target_offset);
    in.token_ids.push_back(markers.marker(MarkerRole::kSubjectOpen, c.subject.label, typed_markers));
    in.token_ids.push_back(markers.marker(MarkerRole::kSubjectClose, c.subject.label, typed_markers));
    in.token_ids.push_back(markers.marker(MarkerRole::kObjectOpen, c.object.label, typed_markers));
    in.token_ids.push_back(markers.marker(MarkerRole::kObjectClose, c.object.label, typed_markers));
    in.position_ids.push_back(off + c.subject.span.start);
    in.position_ids.push_back(off + c.subject.span.end);
    in.position_ids.push_back(off + c.object.span.start);
    in.position_ids.push_back(off + c.object.span.end);
  }

  in.attention_mask.assign(t * t, 0);
  for (std::size_t i = 0; i < t; ++i) {
    std::uint8_t* row = in.attention_mask.data() + i * t;
    for (std::size_t j = 0; j < n; ++j) row[j] = 1;
    if (i >= n) {
      const std::size_t block = n + 4 * ((i - n) / 4);
      for (std::size_t j = block; j < block + 4; ++j) row[j] = 1;
    }
  }
  return in;
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_pair_ranges(std::size_t text_len,
                                                                   std::size_t num_pairs,
                                                                   std::size_t token_budget) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  if (num_pairs == 0) return ranges;
  if (text_len + 4 > token_budget) {
    spdlog::warn("text of {} tokens leaves no room for markers under budget {}; "
                 "using one pair per batch",
                 text_len, token_budget);
    for (std::size_t k = 0; k < num_pairs; ++k) ranges.emplace_back(k, k + 1);
    return ranges;
  }
  const std::size_t per_batch = (token_budget - text_len) / 4;
  for (std::size_t begin = 0; begin < num_pairs; begin += per_batch)
    ranges.emplace_back(begin, std::min(num_pairs, begin + per_batch));
  return ranges;
}

std::vector<PairBatch> chunk_pairs(const TokenWindow& window,
                                   std::span<const RelationCandidate> pairs,
                                   std::size_t token_budget, const RelationModel& model) {
  if (!uses_markers(model.mode())) {
    throw ConfigError("batched approximation needs a marker feature mode, got " +
                      std::string(to_string(model.mode())));
  }
  const bool typed = model.mode() == FeatureMode::kTypedMarkers;
  std::vector<PairBatch> batches;
  for (auto [b, e] : chunk_pair_ranges(window.tokens.size(), pairs.size(), token_budget)) {
    PairBatch batch;
    batch.pairs.assign(pairs.begin() + b, pairs.begin() + e);
    batch.input = build_approx_input(window.tokens, window.target_offset, window.target_len,
                                     batch.pairs, typed, model.markers());
    batches.push_back(std::move(batch));
  }
  return batches;
}

RelationOutput approx_forward(const PairBatch& batch, const RelationModel& model,
                              const ParameterStore& params) {
  const std::size_t n = batch.input.text_len;
  const std::size_t m = batch.pairs.size();
  if (batch.input.size() != n + 4 * m) {
    throw InputError("approx_forward: batch input does not match its pairs");
  }
  Tensor hidden = model.encoder().encode(batch.input, params);
  std::vector<std::size_t> srows(m), orows(m);
  for (std::size_t k = 0; k < m; ++k) {
    srows[k] = n + 4 * k;
    orows[k] = n + 4 * k + 2;
  }
  RelationOutput out = model.marker_head(hidden, srows, orows, batch.pairs, params);
  out.encoder_passes = 1;
  return out;
}

ApproxPrediction predict_relations_approx(const TokenWindow& window,
                                          std::span<const TypedSpan> predicted_entities,
                                          const RelationModel& model,
                                          const ParameterStore& params,
                                          std::size_t token_budget) {
  ApproxPrediction result;
  const auto candidates = ordered_pairs(predicted_entities);
  if (candidates.empty()) return result;
  NoGradGuard no_grad;
  for (const auto& batch : chunk_pairs(window, candidates, token_budget, model)) {
    const auto out = approx_forward(batch, model, params);
    result.encoder_passes += out.encoder_passes;
    for (auto& r : decode_relations(out.logits, batch.pairs)) result.relations.push_back(r);
  }
  return result;
}

}  // namespace puretoy
