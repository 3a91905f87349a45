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

// The puretoy command-line tool and the checkpoint-level helpers it is
// built from.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "puretoy/config.hpp"
#include "puretoy/corpus.hpp"
#include "puretoy/entity_model.hpp"
#include "puretoy/pipeline.hpp"
#include "puretoy/relation_model.hpp"

namespace puretoy {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitDivergence = 3,
  kExitProperty = 4,
};

// Config snapshot stored in checkpoints: the run config plus the model kind
// ("entity", "joint" or "relation") and the vocabulary.
nlohmann::json checkpoint_snapshot(const RunConfig& config, const std::string& kind,
                                   const Vocabulary& vocab);

struct LoadedEntityModel {
  EntityModel model;
  ParameterStore params;
  Vocabulary vocab;
  std::optional<RelationModel> joint_relation;  // set for shared-encoder checkpoints
};

struct LoadedRelationModel {
  RelationModel model;
  ParameterStore params;
  Vocabulary vocab;
};

// Both loaders check the tensor layout against the models the current
// config describes.
LoadedEntityModel load_entity_model(const std::string& path, const RunConfig& config);
LoadedRelationModel load_relation_model(const std::string& path, const RunConfig& config);

struct PipelineResult {
  std::vector<AnnotatedDocument> documents;  // with predicted fields
  std::size_t relation_encoder_passes = 0;
  std::size_t relation_pairs = 0;
};

// Entity model, then the relation model over all ordered pairs of predicted
// entities.
PipelineResult predict_documents(const std::vector<AnnotatedDocument>& docs,
                                 const EntityModel& entity_model,
                                 const ParameterStore& entity_params,
                                 const Vocabulary& entity_vocab,
                                 const RelationModel& relation_model,
                                 const ParameterStore& relation_params,
                                 const Vocabulary& relation_vocab, const RunConfig& config,
                                 InferenceMode mode);

// Agreement between two prediction files: |A & B| / |A | B| over entity
// mentions and over relations (1 when both are empty).
nlohmann::ordered_json compare_predictions(const std::vector<AnnotatedDocument>& a,
                                           const std::vector<AnnotatedDocument>& b);

// args excludes the program name. Reports go to out, logs to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

}  // namespace puretoy
