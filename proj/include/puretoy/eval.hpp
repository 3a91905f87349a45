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

// Micro-averaged precision / recall / F1 for entities (Ent), relations
// with correct argument boundaries (Rel), and relations that also need
// correct argument entity types (Rel+).

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "puretoy/corpus.hpp"

namespace puretoy {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_pred = 0;
  std::size_t num_gold = 0;
  std::size_t num_correct = 0;

  static PRF from_counts(std::size_t pred, std::size_t gold, std::size_t correct);
};

// Entity mention keyed by document and sentence.
struct ScoredEntity {
  std::size_t doc = 0;
  std::size_t sentence = 0;
  std::int32_t start = 0;
  std::int32_t end = 0;
  std::string type;

  auto operator<=>(const ScoredEntity&) const = default;
};

// Relation with the entity types of both arguments (predicted types for
// predictions, gold types for gold).
struct ScoredRelation {
  std::size_t doc = 0;
  std::size_t sentence = 0;
  std::int32_t start1 = 0;
  std::int32_t end1 = 0;
  std::int32_t start2 = 0;
  std::int32_t end2 = 0;
  std::string type;
  std::string type1;
  std::string type2;

  auto operator<=>(const ScoredRelation&) const = default;
};

// Exact (doc, sentence, start, end, type) match after deduplication.
PRF score_entities(const std::vector<ScoredEntity>& pred, const std::vector<ScoredEntity>& gold);

// Rel matches spans and relation type; strict (Rel+) also matches both
// argument entity types. Relation types in symmetric match in either
// argument order. Gold argument types are looked up in gold_entities.
PRF score_relations(const std::vector<ScoredRelation>& pred,
                    const std::vector<ScoredRelation>& gold_relations,
                    const std::vector<ScoredEntity>& gold_entities, bool strict,
                    const std::set<std::string>& symmetric = {});

struct MetricsReport {
  PRF ent;
  PRF rel;
  PRF relplus;

  // Flat object: ent_p, ent_r, ent_f1, ent_num_pred, ent_num_gold,
  // ent_num_correct, and the same for rel_ and relplus_.
  nlohmann::ordered_json to_json() const;
};

// Scores predicted_ner / predicted_relations against ner / relations.
// Argument types of predicted relations come from predicted_ner (null when
// the span was not predicted as an entity).
MetricsReport evaluate_documents(const std::vector<AnnotatedDocument>& predicted,
                                 const std::vector<AnnotatedDocument>& gold,
                                 const std::set<std::string>& symmetric = {});

// Flattening helpers.
std::vector<ScoredEntity> gold_entities(const std::vector<AnnotatedDocument>& docs);
std::vector<ScoredEntity> predicted_entities(const std::vector<AnnotatedDocument>& docs);
std::vector<ScoredRelation> gold_relations(const std::vector<AnnotatedDocument>& docs);
std::vector<ScoredRelation> predicted_relations(const std::vector<AnnotatedDocument>& docs);

}  // namespace puretoy
