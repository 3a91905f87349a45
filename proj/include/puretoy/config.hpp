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

// Run configuration: one flat key space shared by the key=value config
// file, the --kebab-case flags and the canonical JSON snapshot.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "puretoy/corpus.hpp"
#include "puretoy/pipeline.hpp"
#include "puretoy/train.hpp"

namespace puretoy {

struct RunConfig {
  EncoderConfig encoder;
  EntityModelConfig entity;
  FeatureMode feature_mode = FeatureMode::kTypedMarkers;
  std::size_t type_emb_dim = 150;
  TrainConfig train;
  std::size_t window = 100;  // 0 = bare sentence
  std::size_t token_budget = 250;

  std::vector<std::string> entity_types{"Method", "Task", "Material"};
  std::vector<std::string> relation_types{"USED-FOR", "PART-OF"};
  std::vector<std::string> symmetric_relations;

  std::string train_path;
  std::string dev_path;
  std::string input_path;  // documents to predict / benchmark
  std::string gold_path;
  std::string pred_path;
  std::string output;
  std::string entity_checkpoint;
  std::string relation_checkpoint;

  InferenceMode mode = InferenceMode::kFull;

  std::size_t gen_docs = 200;
  std::uint64_t gen_seed = 1;
  std::size_t gen_min_sentences = 2;
  std::size_t gen_max_sentences = 4;
  std::size_t gen_min_entities = 1;
  std::size_t gen_max_entities = 3;

  std::size_t bench_runs = 3;
  std::size_t equivalence_cases = 200;
  std::uint64_t equivalence_seed = 1;
  std::string log_level = "info";

  // Sets one key from its textual form. Throws ConfigError for unknown keys
  // and unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Sorted-key JSON of every field.
  nlohmann::json to_json() const;
  // Strict inverse of to_json: unknown keys are rejected, missing keys keep
  // their defaults.
  static RunConfig from_json(const nlohmann::json& j);

  LabelSet entity_labels() const;
  LabelSet relation_labels() const;
  ModelSetup model_setup() const;
  GrammarConfig grammar() const;

  // All keys in snake_case, sorted.
  static std::vector<std::string> keys();
};

// Applies "key = value" lines; blank lines and # comments are ignored.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& config, const std::string& path);

std::string kebab_case(const std::string& key);

}  // namespace puretoy
