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

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "puretoy/errors.hpp"
#include "puretoy/eval.hpp"
#include "support.hpp"

namespace puretoy {
namespace {

using testing::gold_type;
using testing::random_case;
using testing::RandomCase;

TEST(PRFTest, Definitions) {
  PRF r = PRF::from_counts(2, 4, 1);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.25);
  EXPECT_DOUBLE_EQ(r.f1, 1.0 / 3.0);
  r = PRF::from_counts(0, 3, 0);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(PRF::from_counts(0, 0, 0).f1, 0.0);
}

TEST(ScoreEntities, Examples) {
  std::vector<ScoredEntity> gold{{0, 0, 0, 0, "A"}, {0, 0, 2, 3, "B"}, {1, 0, 0, 1, "A"},
                                 {1, 1, 4, 4, "B"}};
  EXPECT_EQ(score_entities(gold, gold).f1, 1.0);
  EXPECT_EQ(score_entities({}, gold).f1, 0.0);
  std::vector<ScoredEntity> pred{{0, 0, 0, 0, "A"}, {0, 0, 2, 3, "A"}};
  PRF r = score_entities(pred, gold);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.25);
  EXPECT_DOUBLE_EQ(r.f1, 1.0 / 3.0);
  pred.push_back(pred[0]);  // duplicates are counted once
  EXPECT_EQ(score_entities(pred, gold).num_pred, 2u);
}

TEST(ScoreRelations, StrictNeedsArgumentTypes) {
  std::vector<ScoredEntity> ge{{0, 0, 0, 0, "Method"}, {0, 0, 3, 4, "Task"}};
  std::vector<ScoredRelation> gr{{0, 0, 0, 0, 3, 4, "USED-FOR", "", ""}};
  // Right spans and relation type, wrong subject entity type.
  std::vector<ScoredRelation> pred{{0, 0, 0, 0, 3, 4, "USED-FOR", "Task", "Task"}};
  EXPECT_EQ(score_relations(pred, gr, ge, false).f1, 1.0);
  EXPECT_EQ(score_relations(pred, gr, ge, true).f1, 0.0);
  pred[0].type1 = "Method";
  EXPECT_EQ(score_relations(pred, gr, ge, true).f1, 1.0);
  pred[0].type = "PART-OF";
  EXPECT_EQ(score_relations(pred, gr, ge, false).f1, 0.0);
}

TEST(ScoreRelations, SymmetricTypesMatchEitherDirection) {
  std::vector<ScoredEntity> ge{{0, 0, 0, 0, "A"}, {0, 0, 2, 2, "B"}};
  std::vector<ScoredRelation> gr{{0, 0, 0, 0, 2, 2, "CONJ", "", ""}};
  std::vector<ScoredRelation> rev{{0, 0, 2, 2, 0, 0, "CONJ", "B", "A"}};
  EXPECT_EQ(score_relations(rev, gr, ge, true).f1, 0.0);
  EXPECT_EQ(score_relations(rev, gr, ge, true, {"CONJ"}).f1, 1.0);
  // Both directions predicted: deduplicated to one prediction.
  std::vector<ScoredRelation> both{rev[0], {0, 0, 0, 0, 2, 2, "CONJ", "A", "B"}};
  PRF r = score_relations(both, gr, ge, true, {"CONJ"});
  EXPECT_EQ(r.num_pred, 1u);
  EXPECT_EQ(r.f1, 1.0);
}

void expect_same(const PRF& a, const PRF& b) {
  EXPECT_EQ(a.num_pred, b.num_pred);
  EXPECT_EQ(a.num_gold, b.num_gold);
  EXPECT_EQ(a.num_correct, b.num_correct);
  EXPECT_EQ(a.f1, b.f1);
}

TEST(ScoreRelations, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  std::size_t discriminating = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RandomCase c = random_case(rng);
    for (bool strict : {false, true}) {
      expect_same(score_relations(c.pred, c.gold, c.gold_entities, strict, c.symmetric),
                  testing::brute_force_relation_score(c.pred, c.gold, c.gold_entities, strict, c.symmetric));
    }
    discriminating += score_relations(c.pred, c.gold, c.gold_entities, false, c.symmetric)
                          .num_correct >
                      score_relations(c.pred, c.gold, c.gold_entities, true, c.symmetric)
                          .num_correct;
  }
  EXPECT_GT(discriminating, 5u);  // Rel and Rel+ really differ on some cases
}

TEST(ScoreEntities, MatchesBruteForceOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomCase c = random_case(rng);
    expect_same(score_entities(c.pred_entities, c.gold_entities),
                testing::brute_force_entity_score(c.pred_entities, c.gold_entities));
  }
}

TEST(ScoreRelations, PermutationInvariantAndMonotone) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    RandomCase c = random_case(rng);
    for (bool strict : {false, true}) {
      const PRF base = score_relations(c.pred, c.gold, c.gold_entities, strict, c.symmetric);
      auto shuffled = c.pred;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      expect_same(score_relations(shuffled, c.gold, c.gold_entities, strict, c.symmetric), base);

      if (!c.gold.empty()) {
        ScoredRelation good = c.gold[rng() % c.gold.size()];
        good.type1 = gold_type(c.gold_entities, good.doc, good.sentence, good.start1, good.end1);
        good.type2 = gold_type(c.gold_entities, good.doc, good.sentence, good.start2, good.end2);
        auto more = c.pred;
        more.push_back(good);
        EXPECT_GE(score_relations(more, c.gold, c.gold_entities, strict, c.symmetric).recall,
                  base.recall);
      }
      auto worse = c.pred;
      worse.push_back({9, 9, 0, 0, 1, 1, "R1", "A", "A"});
      EXPECT_LE(score_relations(worse, c.gold, c.gold_entities, strict, c.symmetric).precision,
                base.precision);
    }
  }
}

AnnotatedDocument annotated() {
  AnnotatedDocument d;
  d.doc_key = "d0";
  d.sentences = {{"a", "b", "c"}, {"d", "e"}};
  d.ner = {{{0, 0, "A"}, {2, 2, "B"}}, {{0, 1, "A"}}};
  d.relations = {{{0, 0, 2, 2, "R"}}, {}};
  return d;
}

TEST(EvaluateDocuments, IdenticalPredictionsScorePerfectly) {
  AnnotatedDocument gold = annotated();
  AnnotatedDocument pred = gold;
  pred.predicted_ner = gold.ner;
  pred.predicted_relations = gold.relations;
  MetricsReport m = evaluate_documents({pred}, {gold});
  EXPECT_EQ(m.ent.f1, 1.0);
  EXPECT_EQ(m.rel.f1, 1.0);
  EXPECT_EQ(m.relplus.f1, 1.0);

  // Retyping one argument keeps Rel and breaks Rel+.
  (*pred.predicted_ner)[0][1].type = "A";
  m = evaluate_documents({pred}, {gold});
  EXPECT_EQ(m.rel.f1, 1.0);
  EXPECT_EQ(m.relplus.f1, 0.0);
  EXPECT_LT(m.ent.f1, 1.0);
}

TEST(EvaluateDocuments, MisalignedInputIsDataError) {
  AnnotatedDocument gold = annotated();
  AnnotatedDocument other = gold;
  other.doc_key = "x";
  EXPECT_THROW(evaluate_documents({other}, {gold}), DataError);
  EXPECT_THROW(evaluate_documents({}, {gold}), DataError);
}

TEST(MetricsReportTest, FlatJsonKeys) {
  MetricsReport m;
  m.ent = PRF::from_counts(2, 4, 1);
  const auto j = m.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> expect{
      "ent_p", "ent_r", "ent_f1", "ent_num_pred", "ent_num_gold", "ent_num_correct",
      "rel_p", "rel_r", "rel_f1", "rel_num_pred", "rel_num_gold", "rel_num_correct",
      "relplus_p", "relplus_r", "relplus_f1", "relplus_num_pred", "relplus_num_gold",
      "relplus_num_correct"};
  EXPECT_EQ(keys, expect);
  EXPECT_DOUBLE_EQ(j["ent_f1"].get<double>(), 1.0 / 3.0);
  EXPECT_EQ(j["ent_num_gold"].get<int>(), 4);
}

}  // namespace
}  // namespace puretoy
