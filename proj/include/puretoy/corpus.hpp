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

// JSON-lines corpus I/O, vocabulary, context windows, synthetic data and
// jackknife folds.
//
// File format, one document per line (UTF-8):
//   {"doc_key": str,
//    "sentences": [[token, ...], ...],
//    "ner": [[[start, end, type], ...], ...],
//    "relations": [[[start1, end1, start2, end2, type], ...], ...]}
// Indices are inclusive and document-level. Prediction files add
// "predicted_ner" and "predicted_relations" with the same conventions.
// In memory all indices are sentence-local.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "puretoy/encoder.hpp"
#include "puretoy/labels.hpp"

namespace puretoy {

struct EntityAnnotation {
  std::int32_t start = 0;
  std::int32_t end = 0;
  std::string type;

  bool operator==(const EntityAnnotation&) const = default;
};

struct RelationAnnotation {
  std::int32_t start1 = 0;
  std::int32_t end1 = 0;
  std::int32_t start2 = 0;
  std::int32_t end2 = 0;
  std::string type;

  bool operator==(const RelationAnnotation&) const = default;
};

using SentenceEntities = std::vector<EntityAnnotation>;
using SentenceRelations = std::vector<RelationAnnotation>;

struct AnnotatedDocument {
  std::string doc_key;
  std::vector<std::vector<std::string>> sentences;
  std::vector<SentenceEntities> ner;
  std::vector<SentenceRelations> relations;
  std::optional<std::vector<SentenceEntities>> predicted_ner;
  std::optional<std::vector<SentenceRelations>> predicted_relations;

  std::size_t sentence_start(std::size_t sentence) const;
  std::size_t num_tokens() const;

  bool operator==(const AnnotatedDocument&) const = default;
};

struct LoadOptions {
  const LabelSet* entity_labels = nullptr;    // unchecked when null
  const LabelSet* relation_labels = nullptr;  // unchecked when null
  std::size_t max_span_len = 8;
};

struct LoadStats {
  std::size_t documents = 0;
  std::size_t dropped_entities = 0;
  std::size_t dropped_relations = 0;
};

// Throws DataError naming the line number and field.
std::vector<AnnotatedDocument> read_corpus(std::istream& in, const LoadOptions& options = {},
                                           LoadStats* stats = nullptr);
std::vector<AnnotatedDocument> load_corpus(const std::string& path,
                                           const LoadOptions& options = {},
                                           LoadStats* stats = nullptr);

// One line without the trailing newline.
std::string serialize_document(const AnnotatedDocument& doc);
void write_corpus(std::ostream& out, const std::vector<AnnotatedDocument>& docs);
void save_corpus(const std::string& path, const std::vector<AnnotatedDocument>& docs);

// ---- vocabulary -----------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary();
  // Closed vocabulary in first-occurrence order.
  static Vocabulary build(const std::vector<AnnotatedDocument>& docs);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::int32_t id(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::int32_t id) const;
  std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;
  std::size_t size() const { return tokens_.size(); }
  // Non-reserved tokens in id order.
  std::vector<std::string> tokens() const;

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// ---- context windows ------------------------------------------------------

struct ContextWindow {
  std::vector<std::string> tokens;
  std::size_t target_offset = 0;
  std::size_t target_len = 0;
};

// Adds floor((W-n)/2) tokens of left context and the rest on the right,
// truncated at document boundaries without compensation. W <= n yields the
// bare sentence (W < n, other than 0, logs a warning).
ContextWindow make_window(const AnnotatedDocument& doc, std::size_t sentence_index,
                          std::size_t window_size);
TokenWindow encode_window(const ContextWindow& window, const Vocabulary& vocab);

// ---- synthetic data -------------------------------------------------------

struct GrammarConfig {
  std::vector<std::string> entity_types{"Method", "Task", "Material"};
  std::vector<std::string> relation_types{"USED-FOR", "PART-OF"};
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 4;
  std::size_t min_entities = 1;
  std::size_t max_entities = 3;
  std::size_t heads_per_type = 6;
  double modifier_prob = 0.35;
  double trigger_prob = 0.7;
  // Share of mentions whose head word is common to all types. Such a
  // mention is always preceded by its type's cue word; other mentions get
  // the cue with probability cue_prob.
  double ambiguous_prob = 0.5;
  double cue_prob = 0.3;
};

// Templates: fillers, entity mentions ([cue] [modifier]* head, the cue
// outside the span), and a connector
// right after every entity except the last. The connector is either a
// relation trigger or a neutral word.
//
// Labelling rule for an ordered pair (i, j) of mentions in a sentence:
// relation r when i precedes j, no other mention lies between them, the
// tokens between them hold exactly one trigger word and it belongs to r,
// type(i) != r mod |types| and type(j) != (r + 1) mod |types|. Each
// relation thus rules out one subject type and one object type.
class SyntheticGrammar {
 public:
  explicit SyntheticGrammar(GrammarConfig config);

  const GrammarConfig& config() const { return config_; }
  std::vector<AnnotatedDocument> generate(std::uint64_t seed, std::size_t size) const;

  // Rule-based oracle applied to observable tokens and mention types.
  // Returns the relation type or an empty string.
  std::string relation_rule(const std::vector<std::string>& sentence,
                            const EntityAnnotation& subject,
                            const EntityAnnotation& object) const;

 private:
  GrammarConfig config_;
  std::vector<std::vector<std::string>> heads_;     // per entity type
  std::vector<std::string> shared_heads_;
  std::vector<std::string> cues_;                   // per entity type
  std::unordered_set<std::string> mention_heads_;
  std::vector<std::vector<std::string>> triggers_;  // per relation type
  std::unordered_map<std::string, std::size_t> head_type_;
  std::unordered_map<std::string, std::size_t> trigger_relation_;
};

std::vector<AnnotatedDocument> generate_synthetic(std::uint64_t seed, std::size_t size,
                                                  const GrammarConfig& grammar = {});

// ---- folds ----------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Fold i holds out documents whose index is congruent to i mod k.
std::vector<Fold> jackknife_folds(std::size_t num_documents, std::size_t k = 10);

}  // namespace puretoy
