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

#include "puretoy/entity_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "puretoy/errors.hpp"

namespace puretoy {

namespace {
constexpr double kInitStd = 0.02;
}

void EntityModelConfig::validate() const {
  if (max_span_len == 0 || width_emb_dim == 0 || ffnn_hidden == 0) {
    throw ConfigError("entity model: all sizes must be positive");
  }
}

std::vector<Span> enumerate_spans(std::size_t sentence_len, std::size_t max_len,
                                  std::int32_t sentence_index) {
  std::vector<Span> spans;
  for (std::size_t s = 0; s < sentence_len; ++s)
    for (std::size_t e = s; e < sentence_len && e - s + 1 <= max_len; ++e)
      spans.push_back({static_cast<std::int32_t>(s), static_cast<std::int32_t>(e), sentence_index});
  return spans;
}

Tensor span_representations(const Tensor& hidden, std::span<const Span> spans,
                            std::size_t offset, std::size_t text_len,
                            const Tensor& width_embeddings) {
  std::vector<std::int32_t> starts, ends, widths;
  starts.reserve(spans.size());
  ends.reserve(spans.size());
  widths.reserve(spans.size());
  const std::size_t max_width = width_embeddings.rows();
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= text_len ||
        offset + static_cast<std::size_t>(s.end) >= hidden.rows()) {
      throw InputError("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                       ") outside sentence of length " + std::to_string(text_len));
    }
    if (static_cast<std::size_t>(s.width()) > max_width) {
      throw InputError("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                       ") wider than max span length " + std::to_string(max_width));
    }
    starts.push_back(static_cast<std::int32_t>(offset) + s.start);
    ends.push_back(static_cast<std::int32_t>(offset) + s.end);
    widths.push_back(s.width() - 1);
  }
  return concat_cols({gather_rows(hidden, starts), gather_rows(hidden, ends),
                      gather_rows(width_embeddings, widths)});
}

EntityModel::EntityModel(EncoderConfig encoder, EntityModelConfig config, LabelSet labels,
                         std::string prefix, std::string encoder_prefix)
    : prefix_(prefix),
      encoder_(encoder, encoder_prefix.empty() ? prefix + ".enc" : encoder_prefix),
      config_(config),
      labels_(std::move(labels)) {
  config_.validate();
}

std::size_t EntityModel::span_repr_dim() const {
  return 2 * encoder_.config().d_model + config_.width_emb_dim;
}

void EntityModel::init(ParameterStore& params, std::mt19937_64& rng, bool skip_encoder) const {
  if (!skip_encoder) encoder_.init(params, rng);
  const std::size_t h = config_.ffnn_hidden;
  params.add(prefix_ + ".width_emb",
             normal_init({config_.max_span_len, config_.width_emb_dim}, kInitStd, rng));
  params.add(prefix_ + ".ffnn1", normal_init({span_repr_dim(), h}, kInitStd, rng));
  params.add(prefix_ + ".ffnn1_b", Tensor::zeros({h}));
  params.add(prefix_ + ".ffnn2", normal_init({h, h}, kInitStd, rng));
  params.add(prefix_ + ".ffnn2_b", Tensor::zeros({h}));
  params.add(prefix_ + ".out", normal_init({h, labels_.size()}, kInitStd, rng));
  params.add(prefix_ + ".out_b", Tensor::zeros({labels_.size()}));
}

void EntityModel::init_aux_relation(ParameterStore& params, std::size_t relation_classes,
                                    std::mt19937_64& rng) const {
  params.add(prefix_ + ".aux_rel", normal_init({3 * span_repr_dim(), relation_classes}, kInitStd, rng));
  params.add(prefix_ + ".aux_rel_b", Tensor::zeros({relation_classes}));
}

Tensor EntityModel::encode(const TokenWindow& window, const ParameterStore& params,
                           std::mt19937_64* dropout_rng) const {
  return encoder_.encode(MarkedInput::sequential(window.tokens), params, dropout_rng);
}

Tensor EntityModel::span_reprs(const Tensor& hidden, const TokenWindow& window,
                               std::span<const Span> spans, const ParameterStore& params) const {
  return span_representations(hidden, spans, window.target_offset, window.target_len,
                              params.get(prefix_ + ".width_emb"));
}

Tensor EntityModel::classify(const Tensor& reprs, const ParameterStore& params) const {
  auto linear = [&](const Tensor& x, const std::string& w) {
    return add_row(matmul(x, params.get(w)), params.get(w + "_b"));
  };
  Tensor h = relu(linear(reprs, prefix_ + ".ffnn1"));
  h = relu(linear(h, prefix_ + ".ffnn2"));
  return linear(h, prefix_ + ".out");
}

Tensor EntityModel::forward(const Tensor& hidden, const TokenWindow& window,
                            std::span<const Span> spans, const ParameterStore& params) const {
  return classify(span_reprs(hidden, window, spans, params), params);
}

Tensor EntityModel::aux_relation_logits(
    const Tensor& reprs, std::span<const std::pair<std::size_t, std::size_t>> pairs,
    const ParameterStore& params) const {
  std::vector<std::int32_t> subj, obj;
  for (auto [i, j] : pairs) {
    subj.push_back(static_cast<std::int32_t>(i));
    obj.push_back(static_cast<std::int32_t>(j));
  }
  Tensor hs = gather_rows(reprs, subj);
  Tensor ho = gather_rows(reprs, obj);
  Tensor pair = concat_cols({hs, ho, mul(hs, ho)});
  return add_row(matmul(pair, params.get(prefix_ + ".aux_rel")),
                 params.get(prefix_ + ".aux_rel_b"));
}

Tensor entity_loss(const Tensor& logits, std::span<const std::int32_t> gold_labels) {
  if (gold_labels.empty()) return Tensor::scalar(0.0);
  return cross_entropy(logits, gold_labels);
}

std::vector<std::int32_t> argmax_rows(const Tensor& logits) {
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<std::int32_t> out(m, 0);
  auto x = logits.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (x[i * n + j] > x[i * n + best]) best = j;
    out[i] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::vector<TypedSpan> predict_entities(const Tensor& logits, std::span<const Span> spans) {
  if (logits.rows() != spans.size() && !spans.empty()) {
    throw ConfigError("predict_entities: " + std::to_string(logits.rows()) + " logit rows for " +
                      std::to_string(spans.size()) + " spans");
  }
  std::vector<TypedSpan> out;
  if (spans.empty()) return out;
  const auto labels = argmax_rows(logits);
  for (std::size_t i = 0; i < spans.size(); ++i)
    if (labels[i] != 0) out.push_back({spans[i], labels[i]});
  return out;
}

std::vector<double> span_scores(const Tensor& logits) {
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> scores(m, -std::numeric_limits<double>::infinity());
  auto x = logits.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 1; j < n; ++j) scores[i] = std::max(scores[i], x[i * n + j]);
  return scores;
}

std::vector<Span> top_lambda_spans(const Tensor& logits, std::span<const Span> spans,
                                   double lambda, std::size_t n) {
  if (lambda <= 0.0) throw ConfigError("top_lambda_spans: lambda must be positive");
  if (spans.empty()) return {};
  const auto scores = span_scores(logits);
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return spans[a] < spans[b];
  });
  // The epsilon keeps products like 0.4 * 10 from rounding up to 5.
  const auto keep = static_cast<std::size_t>(
      std::ceil(lambda * static_cast<double>(n) - 1e-9));
  std::vector<Span> out;
  for (std::size_t i = 0; i < std::min(keep, order.size()); ++i) out.push_back(spans[order[i]]);
  return out;
}

}  // namespace puretoy
