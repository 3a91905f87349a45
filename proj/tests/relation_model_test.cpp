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
#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "puretoy/errors.hpp"
#include "puretoy/relation_model.hpp"
#include "support.hpp"

namespace puretoy {
namespace {

const LabelSet kEntities({"Method", "Task", "Material"});
const LabelSet kRelations({"USED-FOR", "PART-OF"});

RelationModelConfig head_config(FeatureMode mode) {
  RelationModelConfig c;
  c.mode = mode;
  c.type_emb_dim = 5;
  c.width_emb_dim = 6;
  c.ffnn_hidden = 7;
  return c;
}

struct Fixture {
  explicit Fixture(FeatureMode mode, std::uint64_t seed = 1, LabelSet relations = kRelations)
      : model(testing::tiny_encoder(30), head_config(mode), kEntities, std::move(relations)) {
    std::mt19937_64 rng(seed);
    model.init(params, rng);
    testing::randomize(params, seed + 70);
  }
  RelationModel model;
  ParameterStore params;
};

TypedSpan ts(std::int32_t s, std::int32_t e, std::int32_t label) { return {{s, e, 0}, label}; }

std::vector<std::int32_t> strip_markers(const std::vector<std::int32_t>& tokens,
                                        const MarkerVocabulary& mv) {
  std::vector<std::int32_t> out;
  for (auto t : tokens)
    if (!mv.is_marker(t)) out.push_back(t);
  return out;
}

TEST(MarkerVocabularyTest, CountsAndDisjointIds) {
  MarkerVocabulary mv(30, 3, false);
  EXPECT_EQ(mv.typed_count(), 12u);
  EXPECT_EQ(MarkerVocabulary(30, 3, true).typed_count(), 16u);
  EXPECT_EQ(mv.total_vocab(), 30u + 12u + 4u);
  std::set<std::int32_t> ids;
  for (int role = 0; role < 4; ++role) {
    for (std::int32_t e = 1; e <= 3; ++e) ids.insert(mv.typed(MarkerRole(role), e));
    ids.insert(mv.untyped(MarkerRole(role)));
  }
  EXPECT_EQ(ids.size(), 16u);
  for (auto id : ids) {
    EXPECT_GE(id, 30);
    EXPECT_TRUE(mv.is_marker(id));
  }
  EXPECT_FALSE(mv.is_marker(29));
  EXPECT_THROW(mv.typed(MarkerRole::kSubjectOpen, 0), ConfigError);
  MarkerVocabulary with_null(30, 3, true);
  EXPECT_NO_THROW(with_null.typed(MarkerRole::kSubjectOpen, 0));
}

TEST(InsertTypedMarkers, SixTokenSentence) {
  // Subject is the first token, object the last, both Methods.
  std::vector<std::int32_t> toks;
  for (std::int32_t i = 0; i < 6; ++i) toks.push_back(2 + i);
  MarkerVocabulary mv(30, 3, false);
  const std::int32_t method = kEntities.index_of("Method");
  MarkedPair mp = insert_typed_markers(toks, 0, toks.size(), {ts(0, 0, method), ts(5, 5, method)},
                                       true, mv);
  const auto S = mv.typed(MarkerRole::kSubjectOpen, method);
  const auto Sc = mv.typed(MarkerRole::kSubjectClose, method);
  const auto O = mv.typed(MarkerRole::kObjectOpen, method);
  const auto Oc = mv.typed(MarkerRole::kObjectClose, method);
  EXPECT_EQ(mp.input.token_ids, (std::vector<std::int32_t>{S, 2, Sc, 3, 4, 5, 6, O, 7, Oc}));
  EXPECT_EQ(mp.subject_index, 0u);
  EXPECT_EQ(mp.object_index, 7u);
  EXPECT_EQ(mp.input.size(), toks.size() + 4);
  for (std::size_t i = 0; i < mp.input.size(); ++i)
    EXPECT_EQ(mp.input.position_ids[i], static_cast<std::int32_t>(i));
  EXPECT_TRUE(std::all_of(mp.input.attention_mask.begin(), mp.input.attention_mask.end(),
                          [](auto m) { return m == 1; }));

  MarkedPair untyped = insert_typed_markers(toks, 0, toks.size(),
                                            {ts(0, 0, method), ts(5, 5, method)}, false, mv);
  EXPECT_EQ(untyped.input.token_ids[0], mv.untyped(MarkerRole::kSubjectOpen));
  EXPECT_EQ(untyped.input.token_ids[9], mv.untyped(MarkerRole::kObjectClose));
}

TEST(InsertTypedMarkers, WidthOneSubjectAtStart) {
  MarkerVocabulary mv(30, 3, false);
  std::vector<std::int32_t> toks{5, 6, 7, 8};
  MarkedPair mp = insert_typed_markers(toks, 0, 4, {ts(0, 0, 1), ts(2, 3, 2)}, true, mv);
  EXPECT_EQ(mp.input.token_ids[0], mv.typed(MarkerRole::kSubjectOpen, 1));
  EXPECT_EQ(mp.input.token_ids[2], mv.typed(MarkerRole::kSubjectClose, 1));
}

TEST(InsertTypedMarkers, RespectsWindowOffset) {
  MarkerVocabulary mv(30, 3, false);
  std::vector<std::int32_t> toks{9, 9, 5, 6, 7, 9};
  MarkedPair mp = insert_typed_markers(toks, 2, 3, {ts(2, 2, 1), ts(0, 0, 3)}, true, mv);
  EXPECT_EQ(mp.input.token_ids,
            (std::vector<std::int32_t>{9, 9, mv.typed(MarkerRole::kObjectOpen, 3), 5,
                                       mv.typed(MarkerRole::kObjectClose, 3), 6,
                                       mv.typed(MarkerRole::kSubjectOpen, 1), 7,
                                       mv.typed(MarkerRole::kSubjectClose, 1), 9}));
  EXPECT_EQ(mp.subject_index, 6u);
  EXPECT_EQ(mp.object_index, 2u);
  EXPECT_THROW(insert_typed_markers(toks, 2, 3, {ts(0, 3, 1), ts(0, 0, 2)}, true, mv),
               InputError);
}

// Random span pairs, including nested, identical and boundary-sharing ones.
TEST(InsertTypedMarkers, NestedSpansAreWellBracketedAndRoundTrip) {
  MarkerVocabulary mv(30, 3, false);
  std::mt19937_64 rng(21);
  int nested = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::int32_t n = 1 + static_cast<std::int32_t>(rng() % 12);
    auto random_span = [&] {
      std::int32_t a = static_cast<std::int32_t>(rng() % n), b = static_cast<std::int32_t>(rng() % n);
      return Span{std::min(a, b), std::max(a, b), 0};
    };
    Span s = random_span(), o = random_span();
    const bool crossing = (s.start < o.start && o.start <= s.end && s.end < o.end) ||
                          (o.start < s.start && s.start <= o.end && o.end < s.end);
    const bool overlapping = s.start <= o.end && o.start <= s.end;
    std::vector<std::int32_t> toks(n);
    for (auto& t : toks) t = 2 + static_cast<std::int32_t>(rng() % 28);
    const std::int32_t ls = 1 + static_cast<std::int32_t>(rng() % 3);
    const std::int32_t lo = 1 + static_cast<std::int32_t>(rng() % 3);
    for (bool typed : {true, false}) {
      MarkedPair mp = insert_typed_markers(toks, 0, n, {{s, ls}, {o, lo}}, typed, mv);
      const auto& out = mp.input.token_ids;
      ASSERT_EQ(out.size(), toks.size() + 4);
      EXPECT_EQ(strip_markers(out, mv), toks);
      EXPECT_EQ(out[mp.subject_index], mv.marker(MarkerRole::kSubjectOpen, ls, typed));
      EXPECT_EQ(out[mp.object_index], mv.marker(MarkerRole::kObjectOpen, lo, typed));
      if (!crossing) {
        const std::vector<std::int32_t> openers{mv.marker(MarkerRole::kSubjectOpen, ls, typed),
                                                mv.marker(MarkerRole::kObjectOpen, lo, typed)};
        const std::vector<std::int32_t> closers{mv.marker(MarkerRole::kSubjectClose, ls, typed),
                                                mv.marker(MarkerRole::kObjectClose, lo, typed)};
        if (openers[0] != openers[1]) {
          EXPECT_TRUE(testing::well_nested(out, openers, closers))
              << "s=(" << s.start << "," << s.end << ") o=(" << o.start << "," << o.end << ")";
        }
        if (overlapping) ++nested;
      }
      if (!overlapping) {
        // Each marker sits next to its span's boundary token.
        const std::size_t after_s_open = mp.subject_index + 1;
        EXPECT_EQ(out[after_s_open], toks[s.start]);
        EXPECT_EQ(out[mp.object_index + 1], toks[o.start]);
      }
    }
  }
  EXPECT_GT(nested, 100);
}

TEST(InsertTypedMarkers, IdenticalSpansOpenSubjectFirst) {
  MarkerVocabulary mv(30, 3, false);
  std::vector<std::int32_t> toks{5, 6, 7};
  MarkedPair mp = insert_typed_markers(toks, 0, 3, {ts(1, 1, 1), ts(1, 1, 2)}, true, mv);
  EXPECT_EQ(mp.input.token_ids,
            (std::vector<std::int32_t>{5, mv.typed(MarkerRole::kSubjectOpen, 1),
                                       mv.typed(MarkerRole::kObjectOpen, 2), 6,
                                       mv.typed(MarkerRole::kObjectClose, 2),
                                       mv.typed(MarkerRole::kSubjectClose, 1), 7}));
}

TEST(PairRepresentation, Dimensions) {
  EncoderConfig enc = testing::tiny_encoder(30, 32);
  enc.n_heads = 4;
  RelationModelConfig c;
  c.mode = FeatureMode::kTypedMarkers;
  EXPECT_EQ(RelationModel(enc, c, kEntities, kRelations).pair_repr_dim(), 64u);
  c.mode = FeatureMode::kMarkersEType;
  EXPECT_EQ(RelationModel(enc, c, kEntities, kRelations).pair_repr_dim(), 364u);
  c.mode = FeatureMode::kText;
  EXPECT_EQ(RelationModel(enc, c, kEntities, kRelations).pair_repr_dim(), 3u * (64 + 150));
}

TEST(PairRepresentation, TextVariantUsesElementwiseProduct) {
  Fixture f(FeatureMode::kText, 3);
  TokenWindow w{{3, 4, 5, 6, 7}, 0, 5};
  const RelationCandidate same{ts(1, 2, 1), ts(1, 2, 2)};
  Tensor logits = f.model.forward(w, std::span(&same, 1), f.params).logits;

  Tensor hidden = f.model.encoder().encode(MarkedInput::sequential(w.tokens), f.params);
  const Span sp{1, 2, 0};
  Tensor h = span_representations(hidden, std::span(&sp, 1), 0, 5, f.params.get("rel.width_emb"));
  Tensor expect = f.model.classify(concat_cols({h, h, mul(h, h)}), f.params);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(logits.at(0, c), expect.at(0, c), 1e-12);
}

TEST(RelationForward, LogitShapesForEveryMode) {
  const LabelSet seven({"a", "b", "c", "d", "e", "f", "g"});
  TokenWindow w{{3, 4, 5, 6, 7, 8}, 0, 6};
  std::vector<RelationCandidate> cands{{ts(0, 1, 1), ts(3, 3, 2)}, {ts(3, 3, 2), ts(0, 1, 1)}};
  for (FeatureMode mode : {FeatureMode::kText, FeatureMode::kTextEType, FeatureMode::kMarkers,
                           FeatureMode::kMarkersEType, FeatureMode::kMarkersELoss,
                           FeatureMode::kTypedMarkers}) {
    Fixture f(mode, 2, seven);
    RelationOutput out = f.model.forward(w, cands, f.params);
    EXPECT_EQ(out.logits.shape(), (Shape{2, 8})) << to_string(mode);
    EXPECT_EQ(out.encoder_passes, uses_markers(mode) ? 2u : 1u);
    if (mode == FeatureMode::kMarkersELoss) {
      EXPECT_EQ(out.subject_entity_logits.shape(), (Shape{2, 4}));
      EXPECT_EQ(out.object_entity_logits.shape(), (Shape{2, 4}));
    } else {
      EXPECT_FALSE(out.subject_entity_logits.defined());
    }
    RelationOutput again = f.model.forward(w, cands, f.params);
    EXPECT_EQ(0, std::memcmp(out.logits.data().data(), again.logits.data().data(),
                             out.logits.numel() * sizeof(double)));
  }
}

TEST(RelationForward, ZeroHeadGivesUniformDistribution) {
  Fixture f(FeatureMode::kTypedMarkers);
  for (const char* name : {"rel.cls", "rel.cls_b"})
    for (double& v : f.params.get(name).mutable_data()) v = 0.0;
  TokenWindow w{{3, 4, 5, 6}, 0, 4};
  std::vector<RelationCandidate> cands{{ts(0, 0, 1), ts(2, 3, 3)}};
  Tensor p = softmax(f.model.forward(w, cands, f.params).logits);
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_TRUE(decode_relations(f.model.forward(w, cands, f.params).logits, cands).empty());
}

TEST(RelationForward, MarkerTypeReachesTheClassifier) {
  Fixture f(FeatureMode::kTypedMarkers, 5);
  TokenWindow w{{3, 4, 5, 6, 7}, 0, 5};
  std::vector<RelationCandidate> a{{ts(0, 0, 1), ts(3, 4, 2)}};
  std::vector<RelationCandidate> b{{ts(0, 0, 2), ts(3, 4, 2)}};
  Tensor la = f.model.forward(w, a, f.params).logits;
  Tensor lb = f.model.forward(w, b, f.params).logits;
  EXPECT_NE(0, std::memcmp(la.data().data(), lb.data().data(), la.numel() * sizeof(double)));
}

TEST(RelationForward, UnknownModeNameIsConfigError) {
  EXPECT_EQ(parse_feature_mode("typed_markers"), FeatureMode::kTypedMarkers);
  EXPECT_EQ(parse_feature_mode(to_string(FeatureMode::kMarkersELoss)), FeatureMode::kMarkersELoss);
  EXPECT_THROW(parse_feature_mode("TYPED"), ConfigError);
  EXPECT_THROW(Fixture(FeatureMode::kTypedMarkers).model.forward({{3, 4}, 0, 2}, {}, {}),
               InputError);
}

TEST(RelationLoss, PairEnumeration) {
  std::vector<TypedSpan> three{ts(0, 0, 1), ts(2, 3, 2), ts(5, 5, 1)};
  const auto pairs = ordered_pairs(three);
  EXPECT_EQ(pairs.size(), 6u);
  std::set<std::pair<Span, Span>> unique;
  for (const auto& p : pairs) {
    EXPECT_NE(p.subject.span, p.object.span);
    unique.insert({p.subject.span, p.object.span});
  }
  EXPECT_EQ(unique.size(), 6u);
  std::vector<TypedSpan> one{ts(1, 1, 1)};
  EXPECT_TRUE(ordered_pairs(one).empty());
  RelationOutput empty;
  EXPECT_EQ(relation_loss(empty, {}).item(), 0.0);
}

double scalar_ce(const Tensor& logits, const std::vector<std::int32_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits.at(i, c));
    total += std::log(z) - logits.at(i, labels[i]);
  }
  return total;
}

TEST(RelationLoss, MatchesScalarSumAndIsOrderInvariant) {
  for (FeatureMode mode : {FeatureMode::kTypedMarkers, FeatureMode::kText,
                           FeatureMode::kMarkersELoss}) {
    Fixture f(mode, 9);
    TokenWindow w{{3, 4, 5, 6, 7, 8, 9}, 0, 7};
    std::vector<TypedSpan> ents{ts(0, 0, 1), ts(2, 3, 2), ts(5, 6, 3)};
    auto cands = ordered_pairs(ents);
    std::vector<std::int32_t> labels{0, 1, 2, 0, 0, 1}, se, oe;
    for (const auto& c : cands) {
      se.push_back(c.subject.label);
      oe.push_back(c.object.label);
    }
    RelationOutput out = f.model.forward(w, cands, f.params);
    double expect = scalar_ce(out.logits, labels);
    if (mode == FeatureMode::kMarkersELoss)
      expect += scalar_ce(out.subject_entity_logits, se) + scalar_ce(out.object_entity_logits, oe);
    const double loss = relation_loss(out, labels, se, oe).item();
    EXPECT_NEAR(loss, expect, 1e-10);

    std::vector<std::size_t> perm{4, 1, 5, 0, 3, 2};
    std::vector<RelationCandidate> pc;
    std::vector<std::int32_t> pl, pse, poe;
    for (auto k : perm) {
      pc.push_back(cands[k]);
      pl.push_back(labels[k]);
      pse.push_back(se[k]);
      poe.push_back(oe[k]);
    }
    EXPECT_NEAR(relation_loss(f.model.forward(w, pc, f.params), pl, pse, poe).item(), loss,
                1e-12);
  }
}

TEST(PredictRelations, EmptyAndPairCount) {
  Fixture f(FeatureMode::kTypedMarkers, 4);
  TokenWindow w{{3, 4, 5, 6, 7, 8}, 0, 6};
  EXPECT_TRUE(predict_relations(w, {}, f.model, f.params).empty());
  std::vector<TypedSpan> ents{ts(0, 0, 1), ts(2, 3, 2), ts(5, 5, 3)};
  const auto cands = ordered_pairs(ents);
  EXPECT_EQ(f.model.forward(w, cands, f.params).encoder_passes, 6u);
  const auto pred = predict_relations(w, ents, f.model, f.params);
  const auto expect = decode_relations(f.model.forward(w, cands, f.params).logits, cands);
  ASSERT_EQ(pred.size(), expect.size());
  for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_EQ(pred[i].label, expect[i].label);
}

TEST(DecodeRelations, TiesGoToNull) {
  std::vector<RelationCandidate> c{{ts(0, 0, 1), ts(1, 1, 1)}, {ts(1, 1, 1), ts(0, 0, 1)}};
  auto out = decode_relations(Tensor::from({2, 3}, {1, 1, 0, 0, 2, 2}), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].label, 1);
  EXPECT_EQ(out[0].subject.span, (Span{1, 1, 0}));
}

}  // namespace
}  // namespace puretoy
