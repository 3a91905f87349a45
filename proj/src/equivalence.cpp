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

#include "puretoy/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "puretoy/relation_approx.hpp"
#include "puretoy/relation_model.hpp"

namespace puretoy {

namespace {

constexpr std::size_t kTextVocab = 40;
constexpr std::int32_t kMaxWidth = 8;

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Span random_span(std::mt19937_64& rng, std::int32_t len) {
  const auto start = static_cast<std::int32_t>(uniform(rng, 0, len - 1));
  const auto max_end = std::min(len - 1, start + kMaxWidth - 1);
  return {start, static_cast<std::int32_t>(uniform(rng, start, max_end)), 0};
}

// An inner span sharing a boundary with `outer` or strictly inside it.
Span nested_in(std::mt19937_64& rng, const Span& outer) {
  Span s = outer;
  switch (uniform(rng, 0, 2)) {
    case 0:
      s.end = static_cast<std::int32_t>(uniform(rng, outer.start, outer.end));
      break;
    case 1:
      s.start = static_cast<std::int32_t>(uniform(rng, outer.start, outer.end));
      break;
    default:
      s.start = static_cast<std::int32_t>(uniform(rng, outer.start, outer.end));
      s.end = static_cast<std::int32_t>(uniform(rng, s.start, outer.end));
      break;
  }
  return s;
}

bool overlaps(const Span& a, const Span& b) { return a.start <= b.end && b.start <= a.end; }

PairBatch make_batch(const TokenWindow& w, std::vector<RelationCandidate> pairs,
                     const RelationModel& model) {
  PairBatch b;
  b.input = build_approx_input(w.tokens, w.target_offset, w.target_len, pairs, true,
                               model.markers());
  b.pairs = std::move(pairs);
  return b;
}

}  // namespace

nlohmann::ordered_json EquivalenceReport::to_json() const {
  nlohmann::ordered_json j;
  j["cases"] = cases;
  j["nested_cases"] = nested_cases;
  j["max_text_abs_diff"] = max_text_abs_diff;
  j["max_logit_rel_diff"] = max_logit_rel_diff;
  j["permutation_mismatches"] = permutation_mismatches;
  j["text_ok"] = text_ok();
  j["batching_ok"] = batching_ok();
  j["permutation_ok"] = permutation_ok();
  j["passed"] = passed();
  return j;
}

EquivalenceReport run_equivalence_suite(const EquivalenceOptions& options) {
  EquivalenceReport report;
  report.text_tolerance = options.text_tolerance;
  report.logit_tolerance = options.logit_tolerance;

  const LabelSet entities({"A", "B", "C"});
  const LabelSet relations({"R1", "R2"});
  EncoderConfig enc = options.encoder;
  enc.vocab_size = kTextVocab;
  enc.dropout = 0.0;
  RelationModelConfig rc;
  rc.mode = FeatureMode::kTypedMarkers;
  const RelationModel model(enc, rc, entities, relations);
  std::mt19937_64 rng(options.seed);
  ParameterStore params;
  model.init(params, rng);

  NoGradGuard no_grad;
  for (std::size_t c = 0; c < options.cases; ++c) {
    TokenWindow w;
    const std::size_t n = uniform(rng, 2, std::max<std::size_t>(2, options.max_window));
    for (std::size_t i = 0; i < n; ++i)
      w.tokens.push_back(static_cast<std::int32_t>(uniform(rng, 2, kTextVocab - 1)));
    w.target_len = uniform(rng, 2, n);
    w.target_offset = uniform(rng, 0, n - w.target_len);
    const auto len = static_cast<std::int32_t>(w.target_len);

    std::vector<RelationCandidate> pairs(uniform(rng, 1, options.max_pairs));
    bool nested = false;
    for (auto& p : pairs) {
      p.subject.span = random_span(rng, len);
      do {
        p.object.span = uniform(rng, 0, 2) == 0 ? nested_in(rng, p.subject.span)
                                                : random_span(rng, len);
      } while (p.object.span == p.subject.span && len > 1 && uniform(rng, 0, 3) != 0);
      if (uniform(rng, 0, 1)) std::swap(p.subject.span, p.object.span);
      p.subject.label = static_cast<std::int32_t>(uniform(rng, 1, entities.num_types()));
      p.object.label = static_cast<std::int32_t>(uniform(rng, 1, entities.num_types()));
      nested = nested || overlaps(p.subject.span, p.object.span);
    }
    report.nested_cases += nested ? 1 : 0;

    // (a) text rows match the bare window.
    const PairBatch batch = make_batch(w, pairs, model);
    const Tensor bare = model.encoder().encode(MarkedInput::sequential(w.tokens), params);
    const Tensor with_markers = model.encoder().encode(batch.input, params);
    const std::size_t d = bare.cols();
    for (std::size_t i = 0; i < n * d; ++i) {
      report.max_text_abs_diff = std::max(report.max_text_abs_diff,
                                          std::abs(bare.data()[i] - with_markers.data()[i]));
    }

    // (b) batched logits match one-pair batches.
    const Tensor batched = approx_forward(batch, model, params).logits;
    const std::size_t k = batched.cols();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const Tensor single = approx_forward(make_batch(w, {pairs[p]}, model), model, params).logits;
      for (std::size_t j = 0; j < k; ++j) {
        const double a = batched.at(p, j), b = single.at(0, j);
        report.max_logit_rel_diff =
            std::max(report.max_logit_rel_diff, std::abs(a - b) / std::max(1.0, std::abs(b)));
      }
    }

    // (c) permuting pairs permutes logit rows.
    std::vector<std::size_t> perm(pairs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<RelationCandidate> shuffled;
    for (std::size_t p : perm) shuffled.push_back(pairs[p]);
    const Tensor permuted = approx_forward(make_batch(w, shuffled, model), model, params).logits;
    for (std::size_t r = 0; r < perm.size(); ++r)
      for (std::size_t j = 0; j < k; ++j)
        if (permuted.at(r, j) != batched.at(perm[r], j)) {
          ++report.permutation_mismatches;
          break;
        }
    ++report.cases;
  }
  return report;
}

}  // namespace puretoy
