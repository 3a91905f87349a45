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

#include "puretoy/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "puretoy/errors.hpp"

namespace puretoy {

std::vector<PreparedSentence> prepare_sentences(const std::vector<AnnotatedDocument>& docs,
                                                const Vocabulary& vocab,
                                                const LabelSet& entity_labels,
                                                std::size_t window_size,
                                                std::size_t max_span_len) {
  std::vector<PreparedSentence> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t s = 0; s < docs[d].sentences.size(); ++s) {
      PreparedSentence ps;
      ps.doc = d;
      ps.sentence = s;
      ps.window = encode_window(make_window(docs[d], s, window_size), vocab);
      ps.spans = enumerate_spans(docs[d].sentences[s].size(), max_span_len,
                                 static_cast<std::int32_t>(s));
      ps.span_labels.assign(ps.spans.size(), 0);
      for (const auto& e : docs[d].ner[s]) {
        const Span span{e.start, e.end, static_cast<std::int32_t>(s)};
        const auto label = entity_labels.index_of(e.type);
        ps.gold_entities.push_back({span, label});
        auto it = std::lower_bound(ps.spans.begin(), ps.spans.end(), span);
        if (it != ps.spans.end() && *it == span) ps.span_labels[it - ps.spans.begin()] = label;
      }
      out.push_back(std::move(ps));
    }
  }
  return out;
}

std::int32_t gold_relation_label(const AnnotatedDocument& doc, std::size_t sentence,
                                 const Span& subject, const Span& object,
                                 const LabelSet& relation_labels) {
  for (const auto& r : doc.relations[sentence]) {
    if (r.start1 == subject.start && r.end1 == subject.end && r.start2 == object.start &&
        r.end2 == object.end) {
      return relation_labels.index_of(r.type);
    }
  }
  return 0;
}

std::int32_t gold_entity_label(const AnnotatedDocument& doc, std::size_t sentence,
                               const Span& span, const LabelSet& entity_labels) {
  for (const auto& e : doc.ner[sentence])
    if (e.start == span.start && e.end == span.end) return entity_labels.index_of(e.type);
  return 0;
}

EntityRun run_entity_model(const std::vector<PreparedSentence>& sentences,
                           const EntityModel& model, const ParameterStore& params,
                           double prune_lambda) {
  NoGradGuard no_grad;
  EntityRun run;
  run.entities.resize(sentences.size());
  run.pruned.resize(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& ps = sentences[i];
    if (ps.spans.empty()) continue;
    Tensor hidden = model.encode(ps.window, params);
    Tensor logits = model.forward(hidden, ps.window, ps.spans, params);
    run.entities[i] = predict_entities(logits, ps.spans);
    if (prune_lambda > 0.0) {
      const auto labels = argmax_rows(logits);
      for (const Span& sp : top_lambda_spans(logits, ps.spans, prune_lambda, ps.window.target_len)) {
        const auto idx = std::lower_bound(ps.spans.begin(), ps.spans.end(), sp) - ps.spans.begin();
        run.pruned[i].push_back({sp, labels[idx]});
      }
    }
  }
  return run;
}

InferenceMode parse_inference_mode(const std::string& name) {
  if (name == "full") return InferenceMode::kFull;
  if (name == "approx") return InferenceMode::kApprox;
  throw ConfigError("unknown inference mode '" + name + "' (expected full or approx)");
}

std::string to_string(InferenceMode mode) {
  return mode == InferenceMode::kFull ? "full" : "approx";
}

RelationRun run_relation_model(const std::vector<PreparedSentence>& sentences,
                               const SentenceSpans& candidates, const RelationModel& model,
                               const ParameterStore& params, InferenceMode mode,
                               std::size_t token_budget) {
  if (candidates.size() != sentences.size()) {
    throw ConfigError("run_relation_model: candidate lists do not match sentences");
  }
  NoGradGuard no_grad;
  RelationRun run;
  run.relations.resize(sentences.size());
  const bool batched = mode == InferenceMode::kApprox && uses_markers(model.mode());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto pairs = ordered_pairs(candidates[i]);
    if (pairs.empty()) continue;
    run.pairs += pairs.size();
    if (batched) {
      auto pred = predict_relations_approx(sentences[i].window, candidates[i], model, params,
                                           token_budget);
      run.encoder_passes += pred.encoder_passes;
      run.relations[i] = std::move(pred.relations);
    } else {
      const auto out = model.forward(sentences[i].window, pairs, params);
      run.encoder_passes += out.encoder_passes;
      run.relations[i] = decode_relations(out.logits, pairs);
    }
  }
  return run;
}

std::vector<AnnotatedDocument> attach_predictions(
    const std::vector<AnnotatedDocument>& docs, const std::vector<PreparedSentence>& sentences,
    const SentenceSpans& entities, const std::vector<std::vector<PredictedRelation>>& relations,
    const LabelSet& entity_labels, const LabelSet& relation_labels) {
  std::vector<AnnotatedDocument> out = docs;
  for (auto& d : out) {
    d.predicted_ner = std::vector<SentenceEntities>(d.sentences.size());
    d.predicted_relations = std::vector<SentenceRelations>(d.sentences.size());
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& doc = out[sentences[i].doc];
    const std::size_t s = sentences[i].sentence;
    if (i < entities.size()) {
      for (const auto& e : entities[i]) {
        if (e.label == 0) continue;
        (*doc.predicted_ner)[s].push_back({e.span.start, e.span.end, entity_labels.name(e.label)});
      }
    }
    if (i < relations.size()) {
      for (const auto& r : relations[i]) {
        (*doc.predicted_relations)[s].push_back({r.subject.span.start, r.subject.span.end,
                                                 r.object.span.start, r.object.span.end,
                                                 relation_labels.name(r.label)});
      }
    }
  }
  return out;
}

nlohmann::ordered_json BenchResult::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = to_string(mode);
  j["sentences_per_sec"] = sentences_per_sec;
  j["encoder_passes"] = encoder_passes;
  j["pairs"] = pairs;
  j["wall_ms"] = wall_ms;
  return j;
}

BenchResult benchmark_speed(const std::vector<PreparedSentence>& sentences,
                            const SentenceSpans& candidates, const RelationModel& model,
                            const ParameterStore& params, InferenceMode mode,
                            std::size_t token_budget, std::size_t runs) {
  runs = std::max<std::size_t>(runs, 3);
  BenchResult result;
  result.mode = mode;
  const auto warm = run_relation_model(sentences, candidates, model, params, mode, token_budget);
  result.encoder_passes = warm.encoder_passes;
  result.pairs = warm.pairs;

  std::vector<double> times;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    run_relation_model(sentences, candidates, model, params, mode, token_budget);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  result.wall_ms = times[times.size() / 2];
  result.sentences_per_sec =
      result.wall_ms > 0.0 ? 1000.0 * static_cast<double>(sentences.size()) / result.wall_ms : 0.0;
  return result;
}

}  // namespace puretoy
