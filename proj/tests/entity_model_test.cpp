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
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "puretoy/entity_model.hpp"
#include "puretoy/errors.hpp"
#include "support.hpp"

namespace puretoy {
namespace {

LabelSet six_types() { return LabelSet({"A", "B", "C", "D", "E", "F"}); }

struct Fixture {
  Fixture(std::size_t d_model = 8, std::uint64_t seed = 1)
      : model(testing::tiny_encoder(30, d_model), small_head(), six_types()) {
    std::mt19937_64 rng(seed);
    model.init(params, rng);
    testing::randomize(params, seed + 50);
  }
  static EntityModelConfig small_head() {
    EntityModelConfig c;
    c.width_emb_dim = 6;
    c.ffnn_hidden = 10;
    return c;
  }
  EntityModel model;
  ParameterStore params;
};

TokenWindow window_of(std::vector<std::int32_t> tokens, std::size_t offset, std::size_t len) {
  return {std::move(tokens), offset, len};
}

TEST(EnumerateSpans, Examples) {
  EXPECT_EQ(enumerate_spans(5, 3).size(), 12u);
  EXPECT_EQ(enumerate_spans(10, 8).size(), 52u);
  EXPECT_EQ(enumerate_spans(2, 8).size(), 3u);
  EXPECT_TRUE(enumerate_spans(0, 8).empty());
}

TEST(EnumerateSpans, ClosedFormExhaustive) {
  for (std::size_t n = 0; n <= 50; ++n)
    for (std::size_t L = 1; L <= 10; ++L) {
      std::size_t expect = 0;
      for (std::size_t w = 1; w <= std::min(L, n); ++w) expect += n - w + 1;
      const auto spans = enumerate_spans(n, L, 3);
      ASSERT_EQ(spans.size(), expect) << n << " " << L;
      for (std::size_t i = 0; i < spans.size(); ++i) {
        EXPECT_LE(0, spans[i].start);
        EXPECT_LE(spans[i].start, spans[i].end);
        EXPECT_LE(static_cast<std::size_t>(spans[i].width()), L);
        EXPECT_EQ(spans[i].sentence_index, 3);
        if (i > 0) EXPECT_LT(spans[i - 1], spans[i]);
      }
    }
}

TEST(SpanRepresentation, LayoutAndWidth) {
  Fixture f;
  std::vector<std::int32_t> toks{3, 4, 5, 6, 7, 8, 9};
  TokenWindow w = window_of(toks, 2, 4);  // target tokens 2..5
  Tensor hidden = f.model.encode(w, f.params);
  std::vector<Span> spans{{1, 1}, {0, 3}};
  Tensor r = f.model.span_reprs(hidden, w, spans, f.params);
  EXPECT_EQ(r.cols(), 2 * 8 + 6u);
  EXPECT_EQ(r.cols(), f.model.span_repr_dim());
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(r.at(0, c), r.at(0, 8 + c));   // width-1: start == end
    EXPECT_EQ(r.at(0, c), hidden.at(3, c));  // offset applied
    EXPECT_EQ(r.at(1, 8 + c), hidden.at(5, c));
  }
  const Tensor& width = f.params.get("ent.width_emb");
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(r.at(0, 16 + c), width.at(0, c));
    EXPECT_EQ(r.at(1, 16 + c), width.at(3, c));
  }
}

TEST(SpanRepresentation, PaperSizedDimension) {
  EncoderConfig enc = testing::tiny_encoder(10, 32);
  enc.n_heads = 4;
  EntityModel m(enc, EntityModelConfig{}, six_types());
  EXPECT_EQ(m.span_repr_dim(), 214u);
}

TEST(SpanRepresentation, OutOfRangeIsInputError) {
  Fixture f;
  TokenWindow w = window_of({3, 4, 5, 6}, 1, 2);
  Tensor hidden = f.model.encode(w, f.params);
  std::vector<Span> bad{{1, 2}};
  EXPECT_THROW(f.model.span_reprs(hidden, w, bad, f.params), InputError);
}

TEST(SpanRepresentation, OrderOfEvaluationDoesNotMatter) {
  Fixture f;
  TokenWindow w = window_of({3, 4, 5, 6, 7, 8}, 0, 6);
  Tensor hidden = f.model.encode(w, f.params);
  std::vector<Span> ab{{0, 1}, {3, 5}}, ba{{3, 5}, {0, 1}};
  Tensor r1 = f.model.span_reprs(hidden, w, ab, f.params);
  Tensor r2 = f.model.span_reprs(hidden, w, ba, f.params);
  const std::size_t d = r1.cols();
  EXPECT_EQ(0, std::memcmp(r1.data().data(), r2.data().data() + d, d * sizeof(double)));
  EXPECT_EQ(0, std::memcmp(r1.data().data() + d, r2.data().data(), d * sizeof(double)));
}

TEST(EntityForward, ShapeZeroHeadAndDeterminism) {
  Fixture f;
  TokenWindow w = window_of({3, 4, 5, 6, 7}, 0, 5);
  const auto spans = enumerate_spans(5, 8);
  Tensor hidden = f.model.encode(w, f.params);
  Tensor logits = f.model.forward(hidden, w, spans, f.params);
  EXPECT_EQ(logits.shape(), (Shape{spans.size(), 7}));
  Tensor again = f.model.forward(f.model.encode(w, f.params), w, spans, f.params);
  EXPECT_EQ(0, std::memcmp(logits.data().data(), again.data().data(),
                           logits.numel() * sizeof(double)));

  for (const char* name : {"ent.out", "ent.out_b"})
    for (double& v : f.params.get(name).mutable_data()) v = 0.0;
  Tensor probs = softmax(f.model.forward(hidden, w, spans, f.params));
  for (double p : probs.data()) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
  EXPECT_TRUE(predict_entities(f.model.forward(hidden, w, spans, f.params), spans).empty());
}

TEST(EntityLoss, UniformLogitsOverNullSpans) {
  std::vector<std::int32_t> gold(12, 0);
  EXPECT_NEAR(entity_loss(Tensor::zeros({12, 7}), gold).item(), 12 * std::log(7.0), 1e-12);
  EXPECT_EQ(entity_loss(Tensor::zeros({0, 7}), {}).item(), 0.0);
}

TEST(EntityLoss, ConfidentCorrectLogitsApproachZero) {
  std::vector<std::int32_t> gold{2, 0, 5};
  double previous = INFINITY;
  for (double scale : {1.0, 10.0, 100.0}) {
    std::vector<double> v(3 * 7, 0.0);
    for (std::size_t i = 0; i < 3; ++i) v[i * 7 + gold[i]] = scale;
    const double loss = entity_loss(Tensor::from({3, 7}, v), gold).item();
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-30);
}

TEST(EntityLoss, MatchesScalarSum) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::uniform_int_distribution<std::int32_t> cls(0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + trial;
    std::vector<double> v(m * 7);
    for (double& x : v) x = nd(rng);
    std::vector<std::int32_t> gold(m);
    for (auto& g : gold) g = cls(rng);
    double expect = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < 7; ++c) z += std::exp(v[i * 7 + c]);
      expect += std::log(z) - v[i * 7 + gold[i]];
    }
    EXPECT_NEAR(entity_loss(Tensor::from({m, 7}, v), gold).item(), expect, 1e-10 * m);
  }
}

TEST(PredictEntities, TieRulesAndOverlap) {
  std::vector<Span> spans{{0, 0}, {0, 1}, {1, 1}};
  EXPECT_TRUE(predict_entities(Tensor::zeros({3, 4}), spans).empty());

  Tensor one = Tensor::from({3, 4}, {0, 0, 0, 0, 0, 0, 5, 0, 0, 0, 0, 0});
  auto pred = predict_entities(one, spans);
  ASSERT_EQ(pred.size(), 1u);
  EXPECT_EQ(pred[0].span, (Span{0, 1}));
  EXPECT_EQ(pred[0].label, 2);

  // Ties between named types go to the lower index.
  Tensor tie = Tensor::from({3, 4}, {0, 3, 3, 0, 0, 0, 5, 0, 0, 0, 0, 1});
  pred = predict_entities(tie, spans);
  ASSERT_EQ(pred.size(), 3u);
  EXPECT_EQ(pred[0].label, 1);
  // Overlapping spans (0,0) and (0,1) are both kept.
  EXPECT_EQ(pred[0].span, (Span{0, 0}));
  EXPECT_EQ(pred[1].span, (Span{0, 1}));
}

TEST(PredictEntities, InvariantToSpanOrder) {
  Fixture f(8, 4);
  TokenWindow w = window_of({3, 4, 5, 6, 7, 8}, 0, 6);
  Tensor hidden = f.model.encode(w, f.params);
  auto spans = enumerate_spans(6, 8);
  auto base = predict_entities(f.model.forward(hidden, w, spans, f.params), spans);
  ASSERT_FALSE(base.empty());  // randomized head predicts something
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(spans.begin(), spans.end(), rng);
    auto pred = predict_entities(f.model.forward(hidden, w, spans, f.params), spans);
    std::sort(pred.begin(), pred.end());
    EXPECT_EQ(pred, base);
  }
}

TEST(TopLambdaSpans, CountsAndOrder) {
  const auto spans = enumerate_spans(10, 8);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  std::vector<double> v(spans.size() * 4);
  for (double& x : v) x = nd(rng);
  Tensor logits = Tensor::from({spans.size(), 4}, v);
  const auto top = top_lambda_spans(logits, spans, 0.4, 10);
  EXPECT_EQ(top.size(), 4u);
  const auto scores = span_scores(logits);
  auto score_of = [&](const Span& s) {
    return scores[std::find(spans.begin(), spans.end(), s) - spans.begin()];
  };
  for (std::size_t i = 1; i < top.size(); ++i) EXPECT_GE(score_of(top[i - 1]), score_of(top[i]));
  // Nothing outside the selection scores higher than its weakest member.
  for (const auto& s : spans)
    if (std::find(top.begin(), top.end(), s) == top.end())
      EXPECT_LE(score_of(s), score_of(top.back()));

  const auto all = top_lambda_spans(logits, spans, 100.0, 10);
  EXPECT_EQ(std::set<Span>(all.begin(), all.end()), std::set<Span>(spans.begin(), spans.end()));
  EXPECT_THROW(top_lambda_spans(logits, spans, 0.0, 10), ConfigError);
}

TEST(TopLambdaSpans, EqualScoresFallBackToSpanOrder) {
  std::vector<Span> spans{{2, 2}, {0, 1}, {0, 0}};
  const auto top = top_lambda_spans(Tensor::zeros({3, 3}), spans, 1.0, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0], (Span{0, 0}));
  EXPECT_EQ(top[1], (Span{0, 1}));
}

TEST(EntityTraining, LossDecreasesMonotonicallyUnderGradientDescent) {
  Fixture f(8, 3);
  TokenWindow w = window_of({3, 4, 5, 6, 7, 8}, 0, 6);
  const auto spans = enumerate_spans(6, 8);
  std::vector<std::int32_t> gold(spans.size(), 0);
  gold[0] = 1;
  gold[7] = 4;
  gold[12] = 2;
  auto loss_fn = [&] {
    return entity_loss(f.model.forward(f.model.encode(w, f.params), w, spans, f.params), gold);
  };
  double previous = INFINITY;
  for (int step = 0; step < 50; ++step) {
    f.params.zero_grad();
    Tensor loss = loss_fn();
    EXPECT_LT(loss.item(), previous) << "step " << step;
    previous = loss.item();
    loss.backward();
    for (auto& [name, t] : f.params) {
      auto data = t.mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] -= 2e-3 * t.grad()[i];
    }
  }
}

}  // namespace
}  // namespace puretoy
