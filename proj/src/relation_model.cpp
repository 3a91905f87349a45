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

#include "puretoy/relation_model.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <utility>

#include "puretoy/errors.hpp"

namespace puretoy {

namespace {
constexpr double kInitStd = 0.02;

constexpr std::array<std::pair<FeatureMode, std::string_view>, 6> kModeNames{{
    {FeatureMode::kText, "text"},
    {FeatureMode::kTextEType, "text_etype"},
    {FeatureMode::kMarkers, "markers"},
    {FeatureMode::kMarkersEType, "markers_etype"},
    {FeatureMode::kMarkersELoss, "markers_eloss"},
    {FeatureMode::kTypedMarkers, "typed_markers"},
}};
}  // namespace

std::string_view to_string(FeatureMode mode) {
  for (auto [m, name] : kModeNames)
    if (m == mode) return name;
  return "unknown";
}

FeatureMode parse_feature_mode(std::string_view name) {
  for (auto [m, n] : kModeNames)
    if (n == name) return m;
  throw ConfigError("unknown feature mode '" + std::string(name) + "'");
}

bool uses_markers(FeatureMode mode) {
  return mode != FeatureMode::kText && mode != FeatureMode::kTextEType;
}

bool uses_type_embeddings(FeatureMode mode) {
  return mode == FeatureMode::kTextEType || mode == FeatureMode::kMarkersEType;
}

// ---- markers --------------------------------------------------------------

MarkerVocabulary::MarkerVocabulary(std::size_t text_vocab_size, std::size_t num_entity_types,
                                   bool null_markers)
    : text_vocab_(text_vocab_size), num_types_(num_entity_types), null_markers_(null_markers) {}

std::int32_t MarkerVocabulary::typed(MarkerRole role, std::int32_t entity_label) const {
  const auto r = static_cast<std::size_t>(role);
  if (entity_label == 0) {
    if (!null_markers_) throw ConfigError("typed marker for the null label requires null markers");
    return static_cast<std::int32_t>(text_vocab_ + 4 * num_types_ + r);
  }
  if (entity_label < 0 || static_cast<std::size_t>(entity_label) > num_types_) {
    throw InputError("no marker for entity label " + std::to_string(entity_label));
  }
  return static_cast<std::int32_t>(text_vocab_ + 4 * (entity_label - 1) + r);
}

std::int32_t MarkerVocabulary::untyped(MarkerRole role) const {
  return static_cast<std::int32_t>(text_vocab_ + typed_count() + static_cast<std::size_t>(role));
}

std::int32_t MarkerVocabulary::marker(MarkerRole role, std::int32_t entity_label,
                                      bool typed_markers) const {
  return typed_markers ? typed(role, entity_label) : untyped(role);
}

bool MarkerVocabulary::is_marker(std::int32_t id) const {
  return id >= static_cast<std::int32_t>(text_vocab_) &&
         id < static_cast<std::int32_t>(total_vocab());
}

MarkedPair insert_typed_markers(std::span<const std::int32_t> window_tokens,
                                std::size_t target_offset, std::size_t target_len,
                                const RelationCandidate& candidate, bool typed_markers,
                                const MarkerVocabulary& markers) {
  const Span& s = candidate.subject.span;
  const Span& o = candidate.object.span;
  for (const Span* sp : {&s, &o}) {
    if (sp->start < 0 || sp->end < sp->start || static_cast<std::size_t>(sp->end) >= target_len ||
        target_offset + target_len > window_tokens.size()) {
      throw InputError("relation candidate span (" + std::to_string(sp->start) + "," +
                       std::to_string(sp->end) + ") outside target sentence of length " +
                       std::to_string(target_len));
    }
  }

  struct Boundary {
    bool subject;
    std::int32_t id;
    std::int32_t other_end;  // end for openings, start for closings
  };
  const std::size_t n = window_tokens.size();
  std::vector<std::vector<Boundary>> opens(n), closes(n);
  auto add = [&](const Span& sp, bool subject, std::int32_t label) {
    const std::size_t a = target_offset + sp.start, b = target_offset + sp.end;
    auto open_role = subject ? MarkerRole::kSubjectOpen : MarkerRole::kObjectOpen;
    auto close_role = subject ? MarkerRole::kSubjectClose : MarkerRole::kObjectClose;
    opens[a].push_back({subject, markers.marker(open_role, label, typed_markers), sp.end});
    closes[b].push_back({subject, markers.marker(close_role, label, typed_markers), sp.start});
  };
  add(s, true, candidate.subject.label);
  add(o, false, candidate.object.label);

  for (auto& v : opens) {
    std::sort(v.begin(), v.end(), [](const Boundary& x, const Boundary& y) {
      if (x.other_end != y.other_end) return x.other_end > y.other_end;
      return x.subject && !y.subject;
    });
  }
  for (auto& v : closes) {
    std::sort(v.begin(), v.end(), [](const Boundary& x, const Boundary& y) {
      if (x.other_end != y.other_end) return x.other_end > y.other_end;
      return !x.subject && y.subject;
    });
  }

  MarkedPair out;
  std::vector<std::int32_t> tokens;
  tokens.reserve(n + 4);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& b : opens[i]) {
      (b.subject ? out.subject_index : out.object_index) = tokens.size();
      tokens.push_back(b.id);
    }
    tokens.push_back(window_tokens[i]);
    for (const auto& b : closes[i]) tokens.push_back(b.id);
  }
  out.input = MarkedInput::sequential(std::move(tokens));
  return out;
}

// ---- model ----------------------------------------------------------------

namespace {

EncoderConfig with_markers(EncoderConfig config, const MarkerVocabulary& markers) {
  config.vocab_size = markers.total_vocab();
  return config;
}

}  // namespace

RelationModel::RelationModel(EncoderConfig text_encoder, RelationModelConfig config,
                             LabelSet entity_labels, LabelSet relation_labels, std::string prefix,
                             std::string encoder_prefix)
    : prefix_(prefix),
      config_(config),
      entity_labels_(std::move(entity_labels)),
      relation_labels_(std::move(relation_labels)),
      markers_(text_encoder.vocab_size, entity_labels_.num_types(), config.null_markers),
      encoder_(with_markers(text_encoder, markers_),
               encoder_prefix.empty() ? prefix + ".enc" : encoder_prefix) {}

std::size_t RelationModel::pair_repr_dim() const {
  const std::size_t d = encoder_.config().d_model;
  std::size_t dim = uses_markers(config_.mode) ? 2 * d : 3 * (2 * d + config_.width_emb_dim);
  if (uses_type_embeddings(config_.mode)) dim += 2 * config_.type_emb_dim;
  return dim;
}

void RelationModel::init(ParameterStore& params, std::mt19937_64& rng, bool skip_encoder) const {
  if (!skip_encoder) encoder_.init(params, rng);
  const std::size_t classes = relation_labels_.size();
  if (!uses_markers(config_.mode)) {
    params.add(prefix_ + ".width_emb",
               normal_init({config_.max_span_len, config_.width_emb_dim}, kInitStd, rng));
  }
  if (uses_type_embeddings(config_.mode)) {
    params.add(prefix_ + ".type_emb",
               normal_init({entity_labels_.size(), config_.type_emb_dim}, kInitStd, rng));
  }
  if (config_.mode == FeatureMode::kMarkersELoss) {
    const std::size_t d = encoder_.config().d_model, h = config_.ffnn_hidden;
    params.add(prefix_ + ".eloss1", normal_init({d, h}, kInitStd, rng));
    params.add(prefix_ + ".eloss1_b", Tensor::zeros({h}));
    params.add(prefix_ + ".eloss2", normal_init({h, entity_labels_.size()}, kInitStd, rng));
    params.add(prefix_ + ".eloss2_b", Tensor::zeros({entity_labels_.size()}));
  }
  params.add(prefix_ + ".cls", normal_init({pair_repr_dim(), classes}, kInitStd, rng));
  params.add(prefix_ + ".cls_b", Tensor::zeros({classes}));
}

Tensor RelationModel::classify(const Tensor& reprs, const ParameterStore& params) const {
  return add_row(matmul(reprs, params.get(prefix_ + ".cls")), params.get(prefix_ + ".cls_b"));
}

Tensor RelationModel::with_type_embeddings(Tensor base,
                                           std::span<const RelationCandidate> candidates,
                                           const ParameterStore& params) const {
  if (!uses_type_embeddings(config_.mode)) return base;
  std::vector<std::int32_t> subj, obj;
  for (const auto& c : candidates) {
    subj.push_back(c.subject.label);
    obj.push_back(c.object.label);
  }
  const Tensor& table = params.get(prefix_ + ".type_emb");
  return concat_cols({base, gather_rows(table, subj), gather_rows(table, obj)});
}

RelationOutput RelationModel::marker_head(const Tensor& hidden,
                                          std::span<const std::size_t> subject_rows,
                                          std::span<const std::size_t> object_rows,
                                          std::span<const RelationCandidate> candidates,
                                          const ParameterStore& params) const {
  std::vector<std::int32_t> srows(subject_rows.begin(), subject_rows.end());
  std::vector<std::int32_t> orows(object_rows.begin(), object_rows.end());
  Tensor hs = gather_rows(hidden, srows);
  Tensor ho = gather_rows(hidden, orows);
  RelationOutput out;
  out.logits = classify(with_type_embeddings(concat_cols({hs, ho}), candidates, params), params);
  if (config_.mode == FeatureMode::kMarkersELoss) {
    auto head = [&](const Tensor& x) {
      Tensor h = relu(add_row(matmul(x, params.get(prefix_ + ".eloss1")),
                              params.get(prefix_ + ".eloss1_b")));
      return add_row(matmul(h, params.get(prefix_ + ".eloss2")), params.get(prefix_ + ".eloss2_b"));
    };
    out.subject_entity_logits = head(hs);
    out.object_entity_logits = head(ho);
  }
  return out;
}

RelationOutput RelationModel::forward(const TokenWindow& window,
                                      std::span<const RelationCandidate> candidates,
                                      const ParameterStore& params,
                                      std::mt19937_64* dropout_rng) const {
  if (candidates.empty()) throw InputError("relation forward: no candidates");

  if (!uses_markers(config_.mode)) {
    Tensor hidden = encoder_.encode(MarkedInput::sequential(window.tokens), params, dropout_rng);
    // Representations for the distinct spans, then gathered per pair.
    std::vector<Span> spans;
    std::map<Span, std::int32_t> row_of;
    for (const auto& c : candidates)
      for (const Span& s : {c.subject.span, c.object.span})
        if (row_of.emplace(s, static_cast<std::int32_t>(spans.size())).second) spans.push_back(s);
    Tensor reprs = span_representations(hidden, spans, window.target_offset, window.target_len,
                                        params.get(prefix_ + ".width_emb"));
    std::vector<std::int32_t> subj, obj;
    for (const auto& c : candidates) {
      subj.push_back(row_of.at(c.subject.span));
      obj.push_back(row_of.at(c.object.span));
    }
    Tensor hi = gather_rows(reprs, subj);
    Tensor hj = gather_rows(reprs, obj);
    RelationOutput out;
    out.logits = classify(with_type_embeddings(concat_cols({hi, hj, mul(hi, hj)}), candidates,
                                               params),
                          params);
    out.encoder_passes = 1;
    return out;
  }

  const bool typed = config_.mode == FeatureMode::kTypedMarkers;
  std::vector<Tensor> subj_rows, obj_rows;
  for (const auto& c : candidates) {
    MarkedPair mp = insert_typed_markers(window.tokens, window.target_offset, window.target_len, c,
                                         typed, markers_);
    Tensor hidden = encoder_.encode(mp.input, params, dropout_rng);
    const std::int32_t si = static_cast<std::int32_t>(mp.subject_index);
    const std::int32_t oi = static_cast<std::int32_t>(mp.object_index);
    subj_rows.push_back(gather_rows(hidden, std::span<const std::int32_t>(&si, 1)));
    obj_rows.push_back(gather_rows(hidden, std::span<const std::int32_t>(&oi, 1)));
  }
  // Stack the per-pair marker rows so the head sees one [2m, d] block.
  std::vector<Tensor> stacked = subj_rows;
  stacked.insert(stacked.end(), obj_rows.begin(), obj_rows.end());
  Tensor block = concat_rows(stacked);
  const std::size_t m = candidates.size();
  std::vector<std::size_t> srows(m), orows(m);
  for (std::size_t k = 0; k < m; ++k) {
    srows[k] = k;
    orows[k] = m + k;
  }
  RelationOutput out = marker_head(block, srows, orows, candidates, params);
  out.encoder_passes = m;
  return out;
}

Tensor relation_loss(const RelationOutput& output, std::span<const std::int32_t> labels,
                     std::span<const std::int32_t> subject_entity_targets,
                     std::span<const std::int32_t> object_entity_targets) {
  if (labels.empty()) return Tensor::scalar(0.0);
  std::vector<Tensor> parts{cross_entropy(output.logits, labels)};
  if (output.subject_entity_logits.defined() && !subject_entity_targets.empty()) {
    parts.push_back(cross_entropy(output.subject_entity_logits, subject_entity_targets));
    parts.push_back(cross_entropy(output.object_entity_logits, object_entity_targets));
  }
  return parts.size() == 1 ? parts[0] : add_scalars(parts);
}

std::vector<RelationCandidate> ordered_pairs(std::span<const TypedSpan> entities) {
  std::vector<RelationCandidate> out;
  for (std::size_t i = 0; i < entities.size(); ++i)
    for (std::size_t j = 0; j < entities.size(); ++j)
      if (i != j && entities[i].span != entities[j].span) out.push_back({entities[i], entities[j]});
  return out;
}

std::vector<PredictedRelation> decode_relations(const Tensor& logits,
                                                std::span<const RelationCandidate> candidates) {
  std::vector<PredictedRelation> out;
  if (candidates.empty()) return out;
  const auto labels = argmax_rows(logits);
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (labels[k] != 0) out.push_back({candidates[k].subject, candidates[k].object, labels[k]});
  return out;
}

std::vector<PredictedRelation> predict_relations(const TokenWindow& window,
                                                 std::span<const TypedSpan> predicted_entities,
                                                 const RelationModel& model,
                                                 const ParameterStore& params) {
  const auto candidates = ordered_pairs(predicted_entities);
  if (candidates.empty()) return {};
  NoGradGuard no_grad;
  const auto output = model.forward(window, candidates, params);
  return decode_relations(output.logits, candidates);
}

}  // namespace puretoy
