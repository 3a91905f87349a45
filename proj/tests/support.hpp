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

// Shared helpers for the unit and acceptance tests: small model configs,
// a scalar-loop encoder reference and a few brute-force oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "puretoy/encoder.hpp"
#include "puretoy/eval.hpp"
#include "puretoy/relation_model.hpp"
#include "puretoy/tensor.hpp"

namespace puretoy::testing {

inline EncoderConfig tiny_encoder(std::size_t vocab, std::size_t d_model = 8,
                                  std::size_t layers = 2) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = d_model;
  c.n_heads = 2;
  c.n_layers = layers;
  c.d_ff = 2 * d_model;
  c.max_position = 128;
  return c;
}

// Overwrites every parameter with N(0, stddev) draws so that heads and
// layer norms are not at their trivial initial values.
inline void randomize(ParameterStore& params, std::uint64_t seed, double stddev = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& [name, t] : params)
    for (double& v : t.mutable_data()) v = dist(rng);
}

inline std::vector<std::int32_t> random_tokens(std::size_t n, std::size_t vocab,
                                               std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int32_t> d(2, static_cast<std::int32_t>(vocab) - 1);
  std::vector<std::int32_t> out(n);
  for (auto& t : out) t = d(rng);
  return out;
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

// Textbook post-LN transformer encoder written with plain loops over the
// same parameter names as Encoder.
class ReferenceEncoder {
 public:
  ReferenceEncoder(const EncoderConfig& config, const ParameterStore& params, std::string prefix)
      : c_(config), p_(params), prefix_(std::move(prefix)) {}

  Matrix encode(const MarkedInput& in) const {
    const std::size_t t = in.size(), d = c_.d_model;
    Matrix h(t, std::vector<double>(d));
    const Tensor& tok = p_.get(prefix_ + ".tok_emb");
    const Tensor& pos = p_.get(prefix_ + ".pos_emb");
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < d; ++c)
        h[i][c] = tok.at(in.token_ids[i], c) + pos.at(in.position_ids[i], c);

    const std::size_t dh = d / c_.n_heads;
    for (std::size_t l = 0; l < c_.n_layers; ++l) {
      const Matrix q = affine(h, name(l, "wq"));
      const Matrix k = affine(h, name(l, "wk"));
      const Matrix v = affine(h, name(l, "wv"));
      Matrix ctx(t, std::vector<double>(d, 0.0));
      for (std::size_t hd = 0; hd < c_.n_heads; ++hd) {
        for (std::size_t i = 0; i < t; ++i) {
          std::vector<double> s(t, -INFINITY);
          double mx = -INFINITY;
          for (std::size_t j = 0; j < t; ++j) {
            if (!in.allows(i, j)) continue;
            double dot = 0.0;
            for (std::size_t x = 0; x < dh; ++x) dot += q[i][hd * dh + x] * k[j][hd * dh + x];
            s[j] = dot / std::sqrt(static_cast<double>(dh));
            mx = std::max(mx, s[j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j < t; ++j)
            if (in.allows(i, j)) z += std::exp(s[j] - mx);
          for (std::size_t j = 0; j < t; ++j) {
            if (!in.allows(i, j)) continue;
            const double a = std::exp(s[j] - mx) / z;
            for (std::size_t x = 0; x < dh; ++x) ctx[i][hd * dh + x] += a * v[j][hd * dh + x];
          }
        }
      }
      h = norm(add(h, affine(ctx, name(l, "wo"))), name(l, "ln1_g"), name(l, "ln1_b"));
      Matrix f = affine(h, name(l, "ff1"));
      for (auto& row : f)
        for (double& x : row)
          x = 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
      h = norm(add(h, affine(f, name(l, "ff2"))), name(l, "ln2_g"), name(l, "ln2_b"));
    }
    return h;
  }

 private:
  std::string name(std::size_t l, const char* leaf) const {
    return prefix_ + ".l" + std::to_string(l) + "." + leaf;
  }

  Matrix affine(const Matrix& x, const std::string& w) const {
    const Tensor& W = p_.get(w);
    const Tensor& b = p_.get(w + "_b");
    Matrix out(x.size(), std::vector<double>(W.cols()));
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < W.cols(); ++j) {
        double acc = b.data()[j];
        for (std::size_t k = 0; k < W.rows(); ++k) acc += x[i][k] * W.at(k, j);
        out[i][j] = acc;
      }
    return out;
  }

  static Matrix add(Matrix a, const Matrix& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    return a;
  }

  Matrix norm(Matrix x, const std::string& g, const std::string& b) const {
    const auto gamma = p_.get(g).data();
    const auto beta = p_.get(b).data();
    for (auto& row : x) {
      double mean = 0.0, var = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(row.size());
      for (double v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(row.size());
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * gamma[j] + beta[j];
    }
    return x;
  }

  EncoderConfig c_;
  const ParameterStore& p_;
  std::string prefix_;
};

// Checks that marker tokens form well-nested brackets: every closing marker
// matches the most recent unmatched opening marker of the same role pair.
inline bool well_nested(const std::vector<std::int32_t>& tokens,
                        const std::vector<std::int32_t>& openers,
                        const std::vector<std::int32_t>& closers) {
  std::vector<std::size_t> stack;
  for (std::int32_t t : tokens) {
    auto o = std::find(openers.begin(), openers.end(), t);
    if (o != openers.end()) {
      stack.push_back(static_cast<std::size_t>(o - openers.begin()));
      continue;
    }
    auto c = std::find(closers.begin(), closers.end(), t);
    if (c == closers.end()) continue;
    if (stack.empty() || stack.back() != static_cast<std::size_t>(c - closers.begin()))
      return false;
    stack.pop_back();
  }
  return stack.empty();
}

// ---- brute-force relation scoring ------------------------------------------

inline std::string gold_type(const std::vector<ScoredEntity>& ge, std::size_t d, std::size_t s,
                      std::int32_t a, std::int32_t b) {
  for (const auto& e : ge)
    if (e.doc == d && e.sentence == s && e.start == a && e.end == b) return e.type;
  return "";
}

inline bool same_relation(const ScoredRelation& x, const ScoredRelation& y, bool strict,
                   const std::set<std::string>& symmetric) {
  if (x.doc != y.doc || x.sentence != y.sentence || x.type != y.type) return false;
  const bool direct = x.start1 == y.start1 && x.end1 == y.end1 && x.start2 == y.start2 &&
                      x.end2 == y.end2 && (!strict || (x.type1 == y.type1 && x.type2 == y.type2));
  const bool swapped = symmetric.count(x.type) && x.start1 == y.start2 && x.end1 == y.end2 &&
                       x.start2 == y.start1 && x.end2 == y.end1 &&
                       (!strict || (x.type1 == y.type2 && x.type2 == y.type1));
  return direct || swapped;
}

// O(|pred| * |gold|) pairwise comparison with linear-scan deduplication.
inline PRF brute_force_relation_score(const std::vector<ScoredRelation>& pred,
                                      std::vector<ScoredRelation> gold,
                                      const std::vector<ScoredEntity>& ge, bool strict,
                                      const std::set<std::string>& sym) {
  for (auto& g : gold) {
    g.type1 = gold_type(ge, g.doc, g.sentence, g.start1, g.end1);
    g.type2 = gold_type(ge, g.doc, g.sentence, g.start2, g.end2);
  }
  auto unique = [&](const std::vector<ScoredRelation>& v) {
    std::vector<ScoredRelation> out;
    for (const auto& x : v) {
      bool dup = false;
      for (const auto& y : out) dup = dup || same_relation(x, y, strict, sym);
      if (!dup) out.push_back(x);
    }
    return out;
  };
  const auto up = unique(pred), ug = unique(gold);
  std::size_t correct = 0;
  for (const auto& p : up) {
    bool hit = false;
    for (const auto& g : ug) hit = hit || same_relation(p, g, strict, sym);
    correct += hit;
  }
  return PRF::from_counts(up.size(), ug.size(), correct);
}

inline PRF brute_force_entity_score(const std::vector<ScoredEntity>& pred,
                                    const std::vector<ScoredEntity>& gold) {
  auto unique = [](const std::vector<ScoredEntity>& v) {
    std::vector<ScoredEntity> out;
    for (const auto& x : v)
      if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    return out;
  };
  const auto up = unique(pred), ug = unique(gold);
  std::size_t correct = 0;
  for (const auto& p : up)
    for (const auto& g : ug) correct += p == g;
  return PRF::from_counts(up.size(), ug.size(), correct);
}

struct RandomCase {
  std::vector<ScoredEntity> gold_entities, pred_entities;
  std::vector<ScoredRelation> gold, pred;
  std::set<std::string> symmetric;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  const std::vector<std::pair<int, int>> spans{{0, 0}, {1, 2}, {3, 3}, {4, 6}};
  const std::vector<std::string> etypes{"A", "B"}, rtypes{"R1", "R2"};
  RandomCase c;
  if (rng() % 2) c.symmetric = {"R2"};
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t s = 0; s < 2; ++s)
      for (auto [a, b] : spans)
        if (rng() % 4 != 0) c.gold_entities.push_back({d, s, a, b, etypes[rng() % 2]});
  auto rel = [&](bool with_types) {
    auto [a1, b1] = spans[rng() % spans.size()];
    auto [a2, b2] = spans[rng() % spans.size()];
    ScoredRelation r{rng() % 2, rng() % 2, a1, b1, a2, b2, rtypes[rng() % 2], "", ""};
    if (with_types) {
      r.type1 = etypes[rng() % 2];
      r.type2 = etypes[rng() % 2];
    }
    return r;
  };
  const std::size_t ng = rng() % 12, np = rng() % 12;
  for (std::size_t i = 0; i < ng; ++i) c.gold.push_back(rel(false));
  for (std::size_t i = 0; i < np; ++i) {
    // Half the predictions copy a gold relation, possibly reversed or retyped.
    if (!c.gold.empty() && rng() % 2) {
      ScoredRelation r = c.gold[rng() % c.gold.size()];
      r.type1 = gold_type(c.gold_entities, r.doc, r.sentence, r.start1, r.end1);
      r.type2 = gold_type(c.gold_entities, r.doc, r.sentence, r.start2, r.end2);
      if (rng() % 3 == 0) {
        std::swap(r.start1, r.start2);
        std::swap(r.end1, r.end2);
        std::swap(r.type1, r.type2);
      }
      if (rng() % 4 == 0) r.type1 = etypes[rng() % 2];
      c.pred.push_back(r);
    } else {
      c.pred.push_back(rel(true));
    }
  }
  for (const auto& e : c.gold_entities) {
    if (rng() % 3 == 0) continue;
    ScoredEntity p = e;
    if (rng() % 4 == 0) p.type = etypes[rng() % 2];
    c.pred_entities.push_back(p);
    if (rng() % 5 == 0) c.pred_entities.push_back(p);
  }
  for (std::size_t i = rng() % 4; i > 0; --i) {
    auto [a, b] = spans[rng() % spans.size()];
    c.pred_entities.push_back({rng() % 2, rng() % 2, a, b, etypes[rng() % 2]});
  }
  return c;
}

}  // namespace puretoy::testing
