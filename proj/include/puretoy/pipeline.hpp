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

// Corpus-level glue: tokenized windows for every sentence, the entity ->
// relation prediction pipeline in full or batched mode, and the relation
// throughput benchmark.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "puretoy/corpus.hpp"
#include "puretoy/entity_model.hpp"
#include "puretoy/relation_approx.hpp"
#include "puretoy/relation_model.hpp"

namespace puretoy {

struct PreparedSentence {
  std::size_t doc = 0;
  std::size_t sentence = 0;
  TokenWindow window;
  std::vector<Span> spans;                 // all candidate spans
  std::vector<std::int32_t> span_labels;   // gold entity class per span
  std::vector<TypedSpan> gold_entities;
};

std::vector<PreparedSentence> prepare_sentences(const std::vector<AnnotatedDocument>& docs,
                                                const Vocabulary& vocab,
                                                const LabelSet& entity_labels,
                                                std::size_t window_size,
                                                std::size_t max_span_len);

// Gold relation class for an ordered span pair (0 when unrelated).
std::int32_t gold_relation_label(const AnnotatedDocument& doc, std::size_t sentence,
                                 const Span& subject, const Span& object,
                                 const LabelSet& relation_labels);

// Gold entity class of a span (0 when it is not a gold mention).
std::int32_t gold_entity_label(const AnnotatedDocument& doc, std::size_t sentence,
                               const Span& span, const LabelSet& entity_labels);

// Per-sentence spans, indexed like prepare_sentences output.
using SentenceSpans = std::vector<std::vector<TypedSpan>>;

struct EntityRun {
  SentenceSpans entities;  // argmax != null
  SentenceSpans pruned;    // top ceil(lambda*n) spans with argmax labels (may be null)
};

// prune_lambda <= 0 skips pruning.
EntityRun run_entity_model(const std::vector<PreparedSentence>& sentences,
                           const EntityModel& model, const ParameterStore& params,
                           double prune_lambda = 0.0);

enum class InferenceMode { kFull, kApprox };
InferenceMode parse_inference_mode(const std::string& name);
std::string to_string(InferenceMode mode);

struct RelationRun {
  std::vector<std::vector<PredictedRelation>> relations;  // per sentence
  std::size_t encoder_passes = 0;
  std::size_t pairs = 0;
};

// Classifies all ordered pairs of the given candidate spans per sentence.
// TEXT variants always share one pass per window, so approx == full there.
RelationRun run_relation_model(const std::vector<PreparedSentence>& sentences,
                               const SentenceSpans& candidates, const RelationModel& model,
                               const ParameterStore& params, InferenceMode mode,
                               std::size_t token_budget);

// Copies of docs with predicted_ner / predicted_relations filled in.
std::vector<AnnotatedDocument> attach_predictions(
    const std::vector<AnnotatedDocument>& docs, const std::vector<PreparedSentence>& sentences,
    const SentenceSpans& entities, const std::vector<std::vector<PredictedRelation>>& relations,
    const LabelSet& entity_labels, const LabelSet& relation_labels);

struct BenchResult {
  InferenceMode mode = InferenceMode::kFull;
  double sentences_per_sec = 0.0;
  std::size_t encoder_passes = 0;
  std::size_t pairs = 0;
  double wall_ms = 0.0;  // median over timed runs

  nlohmann::ordered_json to_json() const;
};

// Times run_relation_model over the candidates: one warm-up run, then
// `runs` timed runs (at least 3), reporting the median.
BenchResult benchmark_speed(const std::vector<PreparedSentence>& sentences,
                            const SentenceSpans& candidates, const RelationModel& model,
                            const ParameterStore& params, InferenceMode mode,
                            std::size_t token_budget, std::size_t runs = 3);

}  // namespace puretoy
