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

#include "puretoy/eval.hpp"

#include <map>
#include <tuple>

#include "puretoy/errors.hpp"

namespace puretoy {

PRF PRF::from_counts(std::size_t pred, std::size_t gold, std::size_t correct) {
  PRF r;
  r.num_pred = pred;
  r.num_gold = gold;
  r.num_correct = correct;
  r.precision = pred ? static_cast<double>(correct) / static_cast<double>(pred) : 0.0;
  r.recall = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

PRF score_entities(const std::vector<ScoredEntity>& pred, const std::vector<ScoredEntity>& gold) {
  const std::set<ScoredEntity> p(pred.begin(), pred.end());
  const std::set<ScoredEntity> g(gold.begin(), gold.end());
  std::size_t correct = 0;
  for (const auto& e : p) correct += g.count(e);
  return PRF::from_counts(p.size(), g.size(), correct);
}

namespace {

using SpanKey = std::tuple<std::size_t, std::size_t, std::int32_t, std::int32_t>;

ScoredRelation canonical(ScoredRelation r, const std::set<std::string>& symmetric) {
  if (symmetric.count(r.type) &&
      std::tie(r.start2, r.end2) < std::tie(r.start1, r.end1)) {
    std::swap(r.start1, r.start2);
    std::swap(r.end1, r.end2);
    std::swap(r.type1, r.type2);
  }
  return r;
}

}  // namespace

PRF score_relations(const std::vector<ScoredRelation>& pred,
                    const std::vector<ScoredRelation>& gold_relations,
                    const std::vector<ScoredEntity>& gold_entities, bool strict,
                    const std::set<std::string>& symmetric) {
  std::map<SpanKey, std::string> gold_type;
  for (const auto& e : gold_entities) gold_type[{e.doc, e.sentence, e.start, e.end}] = e.type;
  auto type_of = [&](std::size_t d, std::size_t s, std::int32_t a, std::int32_t b) {
    auto it = gold_type.find({d, s, a, b});
    return it == gold_type.end() ? std::string() : it->second;
  };

  // Non-strict matching ignores argument types, so they are blanked.
  auto key = [&](ScoredRelation r) {
    if (!strict) r.type1.clear(), r.type2.clear();
    return canonical(std::move(r), symmetric);
  };

  std::set<ScoredRelation> g;
  for (auto r : gold_relations) {
    r.type1 = type_of(r.doc, r.sentence, r.start1, r.end1);
    r.type2 = type_of(r.doc, r.sentence, r.start2, r.end2);
    g.insert(key(std::move(r)));
  }
  std::set<ScoredRelation> p;
  for (const auto& r : pred) p.insert(key(r));
  std::size_t correct = 0;
  for (const auto& r : p) correct += g.count(r);
  return PRF::from_counts(p.size(), g.size(), correct);
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  auto put = [&](const std::string& prefix, const PRF& m) {
    j[prefix + "_p"] = m.precision;
    j[prefix + "_r"] = m.recall;
    j[prefix + "_f1"] = m.f1;
    j[prefix + "_num_pred"] = m.num_pred;
    j[prefix + "_num_gold"] = m.num_gold;
    j[prefix + "_num_correct"] = m.num_correct;
  };
  put("ent", ent);
  put("rel", rel);
  put("relplus", relplus);
  return j;
}

std::vector<ScoredEntity> gold_entities(const std::vector<AnnotatedDocument>& docs) {
  std::vector<ScoredEntity> out;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (std::size_t s = 0; s < docs[d].ner.size(); ++s)
      for (const auto& e : docs[d].ner[s]) out.push_back({d, s, e.start, e.end, e.type});
  return out;
}

std::vector<ScoredEntity> predicted_entities(const std::vector<AnnotatedDocument>& docs) {
  std::vector<ScoredEntity> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!docs[d].predicted_ner) continue;
    for (std::size_t s = 0; s < docs[d].predicted_ner->size(); ++s)
      for (const auto& e : (*docs[d].predicted_ner)[s]) out.push_back({d, s, e.start, e.end, e.type});
  }
  return out;
}

std::vector<ScoredRelation> gold_relations(const std::vector<AnnotatedDocument>& docs) {
  std::vector<ScoredRelation> out;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (std::size_t s = 0; s < docs[d].relations.size(); ++s)
      for (const auto& r : docs[d].relations[s])
        out.push_back({d, s, r.start1, r.end1, r.start2, r.end2, r.type, {}, {}});
  return out;
}

std::vector<ScoredRelation> predicted_relations(const std::vector<AnnotatedDocument>& docs) {
  std::vector<ScoredRelation> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!docs[d].predicted_relations) continue;
    for (std::size_t s = 0; s < docs[d].predicted_relations->size(); ++s) {
      std::map<std::pair<std::int32_t, std::int32_t>, std::string> types;
      if (docs[d].predicted_ner && s < docs[d].predicted_ner->size()) {
        for (const auto& e : (*docs[d].predicted_ner)[s]) types[{e.start, e.end}] = e.type;
      }
      auto type_of = [&](std::int32_t a, std::int32_t b) {
        auto it = types.find({a, b});
        return it == types.end() ? std::string() : it->second;
      };
      for (const auto& r : (*docs[d].predicted_relations)[s]) {
        out.push_back({d, s, r.start1, r.end1, r.start2, r.end2, r.type, type_of(r.start1, r.end1),
                       type_of(r.start2, r.end2)});
      }
    }
  }
  return out;
}

MetricsReport evaluate_documents(const std::vector<AnnotatedDocument>& predicted,
                                 const std::vector<AnnotatedDocument>& gold,
                                 const std::set<std::string>& symmetric) {
  if (predicted.size() != gold.size()) {
    throw DataError("evaluate: " + std::to_string(predicted.size()) + " predicted documents vs " +
                    std::to_string(gold.size()) + " gold documents");
  }
  for (std::size_t d = 0; d < gold.size(); ++d) {
    if (predicted[d].doc_key != gold[d].doc_key ||
        predicted[d].sentences.size() != gold[d].sentences.size()) {
      throw DataError("evaluate: document " + std::to_string(d) + " ('" + gold[d].doc_key +
                      "') does not line up with the predictions");
    }
  }
  const auto ge = gold_entities(gold);
  const auto gr = gold_relations(gold);
  const auto pe = predicted_entities(predicted);
  const auto pr = predicted_relations(predicted);
  MetricsReport report;
  report.ent = score_entities(pe, ge);
  report.rel = score_relations(pr, gr, ge, false, symmetric);
  report.relplus = score_relations(pr, gr, ge, true, symmetric);
  return report;
}

}  // namespace puretoy
