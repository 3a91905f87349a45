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

// Optimizer, learning-rate schedule and the training procedures: entity
// model, relation model (gold / jackknifed / pruned-span candidates), and
// the shared-encoder joint variant.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "puretoy/corpus.hpp"
#include "puretoy/entity_model.hpp"
#include "puretoy/pipeline.hpp"
#include "puretoy/relation_model.hpp"

namespace puretoy {

enum class RelationSource { kGold, kJackknife, kPrunedTyped, kPrunedUntyped, kPrunedUntypedELoss };
RelationSource parse_relation_source(const std::string& name);
std::string to_string(RelationSource source);

struct TrainConfig {
  std::size_t epochs_entity = 100;
  std::size_t epochs_relation = 10;
  std::size_t batch_entity = 16;    // sentences per step
  std::size_t batch_relation = 32;  // pairs per step
  double lr_encoder = 1e-5;
  double lr_heads = 5e-4;
  double lr_relation = 2e-5;
  double warmup_ratio = 0.1;
  std::uint64_t seed = 1;
  bool shared_encoder = false;
  bool entity_aux_relation_loss = false;
  RelationSource relation_source = RelationSource::kGold;
  double prune_lambda = 0.4;
  std::size_t jackknife_k = 10;
  double max_grad_norm = 0.0;  // 0 disables clipping

  void validate() const;
};

// Everything needed to build the two models.
struct ModelSetup {
  EncoderConfig encoder;  // vocab_size is filled from the vocabulary
  EntityModelConfig entity;
  FeatureMode feature_mode = FeatureMode::kTypedMarkers;
  std::size_t type_emb_dim = 150;
  LabelSet entity_labels;
  LabelSet relation_labels;
  std::size_t window = 100;
  std::size_t token_budget = 250;
};

EntityModel make_entity_model(const ModelSetup& setup, std::size_t vocab_size);
// The relation source can force the marker encoding: pruned_typed uses typed
// markers with null-type markers, pruned_untyped uses untyped markers and
// pruned_untyped_eloss adds the entity loss.
RelationModel make_relation_model(const ModelSetup& setup, std::size_t vocab_size,
                                  RelationSource source = RelationSource::kGold);

// Linear warm-up from 0 to base_lr over warmup_ratio * total_steps, then
// linear decay to 0 at total_steps.
double lr_schedule(double step, double total_steps, double base_lr, double warmup_ratio);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8, no weight decay) with a
// per-parameter base learning rate and the schedule above.
class Adam {
 public:
  Adam(ParameterStore& params, std::function<double(const std::string&)> base_lr,
       std::size_t total_steps, double warmup_ratio, double max_grad_norm = 0.0);

  // Applies one update from the accumulated grads, then clears them.
  void step();
  std::size_t steps_taken() const { return step_; }

 private:
  struct Slot {
    std::vector<double> m, v;
    double base_lr = 0.0;
  };
  ParameterStore& params_;
  std::vector<Slot> slots_;
  std::size_t total_steps_;
  double warmup_ratio_;
  double max_grad_norm_;
  std::size_t step_ = 0;
};

struct HistoryEntry {
  std::size_t epoch = 0;
  std::string split;
  std::optional<double> loss;
  std::optional<double> ent_f1;
  std::optional<double> rel_f1;
  std::optional<double> relplus_f1;

  nlohmann::ordered_json to_json() const;
  bool operator==(const HistoryEntry&) const = default;
};

struct TrainResult {
  ParameterStore params;  // best dev checkpoint (last epoch when no dev set)
  std::vector<HistoryEntry> history;
  double best_dev = 0.0;
  std::size_t best_epoch = 0;
};

// Auxiliary relation loss for the entity model over ordered gold-entity
// pairs, using [h_i; h_j; h_i*h_j] span-pair features. Exactly 0 when
// disabled or when there are no pairs.
Tensor entity_aux_relation_loss(const EntityModel& model, const Tensor& span_reprs,
                                std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                std::span<const std::int32_t> labels,
                                const ParameterStore& params, bool enabled);

TrainResult train_entity(const std::vector<AnnotatedDocument>& train,
                         const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                         const ModelSetup& setup, const TrainConfig& config);

// One relation training example: an ordered candidate pair in a sentence.
struct RelationExample {
  std::size_t sentence = 0;  // index into the prepared training sentences
  RelationCandidate candidate;
  std::int32_t label = 0;
  std::int32_t subject_entity = 0;  // gold entity class, for the entity loss
  std::int32_t object_entity = 0;
};

// Candidate construction for each relation source. entity_params is the
// trained entity model for the pruned sources; jackknife trains its own
// fold models.
std::vector<RelationExample> build_relation_examples(
    const std::vector<AnnotatedDocument>& docs, const std::vector<PreparedSentence>& sentences,
    const Vocabulary& vocab, const ModelSetup& setup, const TrainConfig& config,
    const ParameterStore* entity_params);

TrainResult train_relation(const std::vector<AnnotatedDocument>& train,
                           const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                           const ModelSetup& setup, const TrainConfig& config,
                           const ParameterStore* entity_params = nullptr);

// Single encoder shared by both heads, trained on L_e + L_r.
TrainResult train_joint_shared(const std::vector<AnnotatedDocument>& train,
                               const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                               const ModelSetup& setup, const TrainConfig& config);

// Builds the joint models over a shared "joint.enc" encoder.
struct JointModels {
  EntityModel entity;
  RelationModel relation;
};
JointModels make_joint_models(const ModelSetup& setup, std::size_t vocab_size);

// Dev relation candidates: gold entities, or pruned spans for the pruned
// sources (which need entity_params).
SentenceSpans relation_candidates(const std::vector<PreparedSentence>& sentences,
                                  const ModelSetup& setup, const TrainConfig& config,
                                  std::size_t vocab_size, const ParameterStore* entity_params);

}  // namespace puretoy
