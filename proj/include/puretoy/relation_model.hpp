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

// Per-pair relation model: typed marker insertion, span-pair
// representations for every input-feature variant, classification.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "puretoy/encoder.hpp"
#include "puretoy/entity_model.hpp"
#include "puretoy/labels.hpp"
#include "puretoy/tensor.hpp"

namespace puretoy {

enum class FeatureMode {
  kText,
  kTextEType,
  kMarkers,
  kMarkersEType,
  kMarkersELoss,
  kTypedMarkers,
};

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view name);  // throws ConfigError
bool uses_markers(FeatureMode mode);
bool uses_type_embeddings(FeatureMode mode);

enum class MarkerRole { kSubjectOpen = 0, kSubjectClose = 1, kObjectOpen = 2, kObjectClose = 3 };

// Marker token ids, appended after the text vocabulary:
//   typed   4 per entity type (S, /S, O, /O), in label order
//   null    4 more when null markers are enabled
//   untyped 4 (S, /S, O, /O)
class MarkerVocabulary {
 public:
  MarkerVocabulary() = default;
  MarkerVocabulary(std::size_t text_vocab_size, std::size_t num_entity_types, bool null_markers);

  // entity_label is a class index (1.. for named types, 0 for null).
  std::int32_t typed(MarkerRole role, std::int32_t entity_label) const;
  std::int32_t untyped(MarkerRole role) const;
  std::int32_t marker(MarkerRole role, std::int32_t entity_label, bool typed_markers) const;

  std::size_t typed_count() const { return 4 * (num_types_ + (null_markers_ ? 1 : 0)); }
  std::size_t count() const { return typed_count() + 4; }
  std::size_t total_vocab() const { return text_vocab_ + count(); }
  bool is_marker(std::int32_t id) const;
  bool null_markers() const { return null_markers_; }

 private:
  std::size_t text_vocab_ = 0;
  std::size_t num_types_ = 0;
  bool null_markers_ = false;
};

struct RelationCandidate {
  TypedSpan subject;
  TypedSpan object;
};

// Window with markers inserted around both spans, plus the indices of the
// subject and object opening markers.
struct MarkedPair {
  MarkedInput input;
  std::size_t subject_index = 0;
  std::size_t object_index = 0;
};

// Marker placement at shared boundaries: the outer span opens first and
// closes last; for identical spans S opens before O and /O closes before /S.
// Crossing spans follow the same index order and are allowed.
MarkedPair insert_typed_markers(std::span<const std::int32_t> window_tokens,
                                std::size_t target_offset, std::size_t target_len,
                                const RelationCandidate& candidate, bool typed_markers,
                                const MarkerVocabulary& markers);

struct RelationModelConfig {
  FeatureMode mode = FeatureMode::kTypedMarkers;
  std::size_t type_emb_dim = 150;
  // Span head sizes used by the TEXT variants and the entity-loss FFNN.
  std::size_t max_span_len = 8;
  std::size_t width_emb_dim = 150;
  std::size_t ffnn_hidden = 150;
  bool null_markers = false;
};

struct RelationOutput {
  Tensor logits;                 // [pairs, |relations|+1]
  Tensor subject_entity_logits;  // MARKERS_ELOSS only: [pairs, |entities|+1]
  Tensor object_entity_logits;
  std::size_t encoder_passes = 0;
};

struct PredictedRelation {
  TypedSpan subject;
  TypedSpan object;
  std::int32_t label = 0;
};

class RelationModel {
 public:
  RelationModel(EncoderConfig text_encoder, RelationModelConfig config, LabelSet entity_labels,
                LabelSet relation_labels, std::string prefix = "rel",
                std::string encoder_prefix = "");

  void init(ParameterStore& params, std::mt19937_64& rng, bool skip_encoder = false) const;

  const Encoder& encoder() const { return encoder_; }
  const MarkerVocabulary& markers() const { return markers_; }
  const RelationModelConfig& config() const { return config_; }
  FeatureMode mode() const { return config_.mode; }
  const LabelSet& entity_labels() const { return entity_labels_; }
  const LabelSet& relation_labels() const { return relation_labels_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t pair_repr_dim() const;

  // Full model. Marker variants run one encoder pass per candidate; TEXT
  // variants run one pass over the bare window and share it.
  RelationOutput forward(const TokenWindow& window, std::span<const RelationCandidate> candidates,
                         const ParameterStore& params,
                         std::mt19937_64* dropout_rng = nullptr) const;

  // Shared by the full and batched paths. subject_rows/object_rows index the
  // opening markers of each pair inside hidden.
  RelationOutput marker_head(const Tensor& hidden, std::span<const std::size_t> subject_rows,
                             std::span<const std::size_t> object_rows,
                             std::span<const RelationCandidate> candidates,
                             const ParameterStore& params) const;

  Tensor classify(const Tensor& pair_reprs, const ParameterStore& params) const;

 private:
  Tensor with_type_embeddings(Tensor base, std::span<const RelationCandidate> candidates,
                              const ParameterStore& params) const;

  std::string prefix_;
  RelationModelConfig config_;
  LabelSet entity_labels_;
  LabelSet relation_labels_;
  MarkerVocabulary markers_;
  Encoder encoder_;
};

// Sum of pair cross-entropies; MARKERS_ELOSS adds subject and object entity
// cross-entropies when entity targets are supplied.
Tensor relation_loss(const RelationOutput& output, std::span<const std::int32_t> labels,
                     std::span<const std::int32_t> subject_entity_targets = {},
                     std::span<const std::int32_t> object_entity_targets = {});

// Every ordered pair of distinct spans.
std::vector<RelationCandidate> ordered_pairs(std::span<const TypedSpan> entities);

// Keeps pairs whose argmax is not the null label (ties go to null).
std::vector<PredictedRelation> decode_relations(const Tensor& logits,
                                                std::span<const RelationCandidate> candidates);

// Classifies every ordered pair of predicted entities with the full model.
std::vector<PredictedRelation> predict_relations(const TokenWindow& window,
                                                 std::span<const TypedSpan> predicted_entities,
                                                 const RelationModel& model,
                                                 const ParameterStore& params);

}  // namespace puretoy
