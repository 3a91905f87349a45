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

#include "puretoy/train.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "puretoy/errors.hpp"
#include "puretoy/eval.hpp"

namespace puretoy {

namespace {

constexpr std::array<std::pair<RelationSource, const char*>, 5> kSourceNames{{
    {RelationSource::kGold, "gold"},
    {RelationSource::kJackknife, "jackknife"},
    {RelationSource::kPrunedTyped, "pruned_typed"},
    {RelationSource::kPrunedUntyped, "pruned_untyped"},
    {RelationSource::kPrunedUntypedELoss, "pruned_untyped_eloss"},
}};

bool is_pruned(RelationSource s) {
  return s == RelationSource::kPrunedTyped || s == RelationSource::kPrunedUntyped ||
         s == RelationSource::kPrunedUntypedELoss;
}

void check_finite(double loss, std::size_t epoch, const char* what) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(what) + " loss became non-finite in epoch " +
                          std::to_string(epoch));
  }
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::vector<ScoredEntity> scored(const std::vector<PreparedSentence>& sentences,
                                 const SentenceSpans& spans, const LabelSet& labels) {
  std::vector<ScoredEntity> out;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    for (const auto& e : spans[i])
      if (e.label != 0) {
        out.push_back({sentences[i].doc, sentences[i].sentence, e.span.start, e.span.end,
                       labels.name(e.label)});
      }
  return out;
}

double dev_entity_f1(const std::vector<PreparedSentence>& dev, const EntityModel& model,
                     const ParameterStore& params) {
  const auto run = run_entity_model(dev, model, params);
  SentenceSpans gold(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) gold[i] = dev[i].gold_entities;
  return score_entities(scored(dev, run.entities, model.labels()),
                        scored(dev, gold, model.labels()))
      .f1;
}

// Relation F1 on dev for the given candidates; argument types are the
// candidate labels.
std::pair<double, double> dev_relation_f1(const std::vector<AnnotatedDocument>& docs,
                                          const std::vector<PreparedSentence>& dev,
                                          const SentenceSpans& candidates,
                                          const RelationModel& model,
                                          const ParameterStore& params,
                                          std::size_t token_budget) {
  const auto run =
      run_relation_model(dev, candidates, model, params, InferenceMode::kFull, token_budget);
  const auto& el = model.entity_labels();
  auto type_name = [&](std::int32_t label) { return label ? el.name(label) : std::string(); };
  std::vector<ScoredRelation> pred;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    for (const auto& r : run.relations[i]) {
      pred.push_back({dev[i].doc, dev[i].sentence, r.subject.span.start, r.subject.span.end,
                      r.object.span.start, r.object.span.end,
                      model.relation_labels().name(r.label), type_name(r.subject.label),
                      type_name(r.object.label)});
    }
  }
  const auto ge = gold_entities(docs);
  const auto gr = gold_relations(docs);
  std::set<std::string> symmetric;
  for (const auto& s : model.relation_labels().symmetric_names()) symmetric.insert(s);
  return {score_relations(pred, gr, ge, false, symmetric).f1,
          score_relations(pred, gr, ge, true, symmetric).f1};
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

RelationSource parse_relation_source(const std::string& name) {
  for (auto [s, n] : kSourceNames)
    if (name == n) return s;
  throw ConfigError("unknown relation training source '" + name + "'");
}

std::string to_string(RelationSource source) {
  for (auto [s, n] : kSourceNames)
    if (s == source) return n;
  return "unknown";
}

void TrainConfig::validate() const {
  if (lr_encoder <= 0 || lr_heads <= 0 || lr_relation <= 0) {
    throw ConfigError("train: learning rates must be positive");
  }
  if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0)) {
    throw ConfigError("train: warmup_ratio must be in (0,1)");
  }
  if (batch_entity == 0 || batch_relation == 0) throw ConfigError("train: batch sizes must be positive");
  if (prune_lambda <= 0.0) throw ConfigError("train: prune_lambda must be positive");
  if (jackknife_k < 2) throw ConfigError("train: jackknife_k must be at least 2");
  if (max_grad_norm < 0.0) throw ConfigError("train: max_grad_norm must be >= 0");
}

EntityModel make_entity_model(const ModelSetup& setup, std::size_t vocab_size) {
  EncoderConfig enc = setup.encoder;
  enc.vocab_size = vocab_size;
  return EntityModel(enc, setup.entity, setup.entity_labels);
}

RelationModel make_relation_model(const ModelSetup& setup, std::size_t vocab_size,
                                  RelationSource source) {
  EncoderConfig enc = setup.encoder;
  enc.vocab_size = vocab_size;
  RelationModelConfig rc;
  rc.mode = setup.feature_mode;
  switch (source) {
    case RelationSource::kPrunedTyped:
      rc.mode = FeatureMode::kTypedMarkers;
      rc.null_markers = true;
      break;
    case RelationSource::kPrunedUntyped:
      rc.mode = FeatureMode::kMarkers;
      break;
    case RelationSource::kPrunedUntypedELoss:
      rc.mode = FeatureMode::kMarkersELoss;
      break;
    default:
      break;
  }
  rc.type_emb_dim = setup.type_emb_dim;
  rc.max_span_len = setup.entity.max_span_len;
  rc.width_emb_dim = setup.entity.width_emb_dim;
  rc.ffnn_hidden = setup.entity.ffnn_hidden;
  return RelationModel(enc, rc, setup.entity_labels, setup.relation_labels);
}

double lr_schedule(double step, double total_steps, double base_lr, double warmup_ratio) {
  if (total_steps <= 0.0) return 0.0;
  step = std::clamp(step, 0.0, total_steps);
  const double warmup = warmup_ratio * total_steps;
  if (step < warmup) return base_lr * step / warmup;
  if (total_steps <= warmup) return base_lr;
  return base_lr * (total_steps - step) / (total_steps - warmup);
}

// ---- Adam -----------------------------------------------------------------

Adam::Adam(ParameterStore& params, std::function<double(const std::string&)> base_lr,
           std::size_t total_steps, double warmup_ratio, double max_grad_norm)
    : params_(params),
      total_steps_(total_steps),
      warmup_ratio_(warmup_ratio),
      max_grad_norm_(max_grad_norm) {
  for (const auto& [name, t] : params_) {
    Slot s;
    s.m.assign(t.numel(), 0.0);
    s.v.assign(t.numel(), 0.0);
    s.base_lr = base_lr(name);
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double clip = 1.0;
  if (max_grad_norm_ > 0.0) {
    double sq = 0.0;
    for (const auto& [name, t] : params_)
      if (t.has_grad())
        for (double g : t.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm_) clip = max_grad_norm_ / norm;
  }
  const double t = static_cast<double>(++step_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  std::size_t k = 0;
  for (auto& [name, tensor] : params_) {
    Slot& s = slots_[k++];
    if (!tensor.has_grad()) continue;
    const double lr = lr_schedule(t - 1.0, static_cast<double>(total_steps_), s.base_lr,
                                  warmup_ratio_);
    auto w = tensor.mutable_data();
    auto g = tensor.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * gi;
      s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * gi * gi;
      w[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + kEps);
    }
  }
  params_.zero_grad();
}

nlohmann::ordered_json HistoryEntry::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["split"] = split;
  if (loss) j["loss"] = *loss;
  if (ent_f1) j["ent_f1"] = *ent_f1;
  if (rel_f1) j["rel_f1"] = *rel_f1;
  if (relplus_f1) j["relplus_f1"] = *relplus_f1;
  return j;
}

// ---- entity training ------------------------------------------------------

Tensor entity_aux_relation_loss(const EntityModel& model, const Tensor& span_reprs,
                                std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                std::span<const std::int32_t> labels,
                                const ParameterStore& params, bool enabled) {
  if (!enabled || pairs.empty()) return Tensor::scalar(0.0);
  return cross_entropy(model.aux_relation_logits(span_reprs, pairs, params), labels);
}

TrainResult train_entity(const std::vector<AnnotatedDocument>& train,
                         const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                         const ModelSetup& setup, const TrainConfig& config) {
  config.validate();
  const auto sentences = prepare_sentences(train, vocab, setup.entity_labels, setup.window,
                                           setup.entity.max_span_len);
  const auto dev_sentences = prepare_sentences(dev, vocab, setup.entity_labels, setup.window,
                                               setup.entity.max_span_len);
  const EntityModel model = make_entity_model(setup, vocab.size());

  TrainResult result;
  std::mt19937_64 rng(config.seed);
  model.init(result.params, rng);
  if (config.entity_aux_relation_loss) {
    model.init_aux_relation(result.params, setup.relation_labels.size(), rng);
  }
  ParameterStore& params = result.params;

  // Aux-loss pairs: ordered gold-entity pairs as row indices into spans.
  struct AuxPairs {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::int32_t> labels;
  };
  std::vector<AuxPairs> aux(sentences.size());
  if (config.entity_aux_relation_loss) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& ps = sentences[i];
      for (const auto& a : ps.gold_entities)
        for (const auto& b : ps.gold_entities) {
          if (a.span == b.span) continue;
          auto ia = std::lower_bound(ps.spans.begin(), ps.spans.end(), a.span) - ps.spans.begin();
          auto ib = std::lower_bound(ps.spans.begin(), ps.spans.end(), b.span) - ps.spans.begin();
          if (static_cast<std::size_t>(ia) >= ps.spans.size() || ps.spans[ia] != a.span ||
              static_cast<std::size_t>(ib) >= ps.spans.size() || ps.spans[ib] != b.span) {
            continue;
          }
          aux[i].pairs.emplace_back(ia, ib);
          aux[i].labels.push_back(gold_relation_label(train[ps.doc], ps.sentence, a.span, b.span,
                                                      setup.relation_labels));
        }
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    if (!sentences[i].spans.empty()) order.push_back(i);
  if (order.empty()) throw DataError("train_entity: no training sentences");

  const std::size_t steps_per_epoch = ceil_div(order.size(), config.batch_entity);
  const std::string enc_prefix = model.encoder().prefix() + ".";
  Adam opt(
      params,
      [&](const std::string& name) {
        return starts_with(name, enc_prefix) ? config.lr_encoder : config.lr_heads;
      },
      steps_per_epoch * config.epochs_entity, config.warmup_ratio, config.max_grad_norm);
  std::mt19937_64 dropout_rng(config.seed + 0x9e3779b97f4a7c15ULL);

  bool have_best = false;
  ParameterStore best;
  for (std::size_t epoch = 1; epoch <= config.epochs_entity; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_entity) {
      for (std::size_t k = b; k < std::min(order.size(), b + config.batch_entity); ++k) {
        const auto& ps = sentences[order[k]];
        Tensor hidden = model.encode(ps.window, params, &dropout_rng);
        Tensor reprs = model.span_reprs(hidden, ps.window, ps.spans, params);
        Tensor loss = entity_loss(model.classify(reprs, params), ps.span_labels);
        if (config.entity_aux_relation_loss && !aux[order[k]].pairs.empty()) {
          loss = add_scalars({loss, entity_aux_relation_loss(model, reprs, aux[order[k]].pairs,
                                                             aux[order[k]].labels, params, true)});
        }
        check_finite(loss.item(), epoch, "entity");
        loss.backward();
        epoch_loss += loss.item();
      }
      opt.step();
    }
    result.history.push_back(
        {epoch, "train", epoch_loss / static_cast<double>(order.size()), {}, {}, {}});
    if (!dev_sentences.empty()) {
      const double f1 = dev_entity_f1(dev_sentences, model, params);
      result.history.push_back({epoch, "dev", {}, f1, {}, {}});
      spdlog::debug("entity epoch {} loss {:.4f} dev ent_f1 {:.4f}", epoch,
                    epoch_loss / static_cast<double>(order.size()), f1);
      if (!have_best || f1 >= result.best_dev) {
        result.best_dev = f1;
        result.best_epoch = epoch;
        best = params.clone();
        have_best = true;
      }
    }
  }
  if (have_best) {
    result.params = std::move(best);
  } else {
    result.best_epoch = config.epochs_entity;
  }
  return result;
}

// ---- relation training ----------------------------------------------------

std::vector<RelationExample> build_relation_examples(
    const std::vector<AnnotatedDocument>& docs, const std::vector<PreparedSentence>& sentences,
    const Vocabulary& vocab, const ModelSetup& setup, const TrainConfig& config,
    const ParameterStore* entity_params) {
  SentenceSpans candidates(sentences.size());
  switch (config.relation_source) {
    case RelationSource::kGold:
      for (std::size_t i = 0; i < sentences.size(); ++i) candidates[i] = sentences[i].gold_entities;
      break;
    case RelationSource::kJackknife: {
      // Each fold's entity model predicts the documents it never saw.
      const EntityModel model = make_entity_model(setup, vocab.size());
      const auto folds = jackknife_folds(docs.size(), config.jackknife_k);
      for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<AnnotatedDocument> fold_train;
        for (std::size_t d : folds[f].train) fold_train.push_back(docs[d]);
        spdlog::info("jackknife fold {}/{}: training entity model on {} documents", f + 1,
                     folds.size(), fold_train.size());
        TrainConfig fold_config = config;
        fold_config.seed = config.seed + 7919 * (f + 1);
        const TrainResult fold_model = train_entity(fold_train, {}, vocab, setup, fold_config);
        std::vector<std::size_t> holdout_sentences;
        std::vector<PreparedSentence> subset;
        const std::set<std::size_t> held(folds[f].holdout.begin(), folds[f].holdout.end());
        for (std::size_t i = 0; i < sentences.size(); ++i)
          if (held.count(sentences[i].doc)) {
            holdout_sentences.push_back(i);
            subset.push_back(sentences[i]);
          }
        const auto run = run_entity_model(subset, model, fold_model.params);
        for (std::size_t k = 0; k < subset.size(); ++k)
          candidates[holdout_sentences[k]] = run.entities[k];
      }
      break;
    }
    default:
      candidates = relation_candidates(sentences, setup, config, vocab.size(), entity_params);
      break;
  }

  std::vector<RelationExample> examples;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& ps = sentences[i];
    const AnnotatedDocument& doc = docs[ps.doc];
    for (const auto& c : ordered_pairs(candidates[i])) {
      RelationExample ex;
      ex.sentence = i;
      ex.candidate = c;
      ex.label = gold_relation_label(doc, ps.sentence, c.subject.span, c.object.span,
                                     setup.relation_labels);
      ex.subject_entity = gold_entity_label(doc, ps.sentence, c.subject.span, setup.entity_labels);
      ex.object_entity = gold_entity_label(doc, ps.sentence, c.object.span, setup.entity_labels);
      examples.push_back(ex);
    }
  }
  return examples;
}

SentenceSpans relation_candidates(const std::vector<PreparedSentence>& sentences,
                                  const ModelSetup& setup, const TrainConfig& config,
                                  std::size_t vocab_size, const ParameterStore* entity_params) {
  SentenceSpans out(sentences.size());
  if (!is_pruned(config.relation_source)) {
    for (std::size_t i = 0; i < sentences.size(); ++i) out[i] = sentences[i].gold_entities;
    return out;
  }
  if (entity_params == nullptr) {
    throw ConfigError("relation source '" + to_string(config.relation_source) +
                      "' needs a trained entity model");
  }
  const EntityModel model = make_entity_model(setup, vocab_size);
  return run_entity_model(sentences, model, *entity_params, config.prune_lambda).pruned;
}

TrainResult train_relation(const std::vector<AnnotatedDocument>& train,
                           const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                           const ModelSetup& setup, const TrainConfig& config,
                           const ParameterStore* entity_params) {
  config.validate();
  const auto sentences = prepare_sentences(train, vocab, setup.entity_labels, setup.window,
                                           setup.entity.max_span_len);
  const auto dev_sentences = prepare_sentences(dev, vocab, setup.entity_labels, setup.window,
                                               setup.entity.max_span_len);
  const RelationModel model = make_relation_model(setup, vocab.size(), config.relation_source);
  const auto examples =
      build_relation_examples(train, sentences, vocab, setup, config, entity_params);
  if (examples.empty()) throw DataError("train_relation: no candidate pairs in the training data");
  const SentenceSpans dev_candidates =
      relation_candidates(dev_sentences, setup, config, vocab.size(), entity_params);

  TrainResult result;
  ParameterStore& params = result.params;
  std::mt19937_64 rng(config.seed + 1);
  model.init(params, rng);

  const std::size_t steps_per_epoch = ceil_div(examples.size(), config.batch_relation);
  Adam opt(
      params, [&](const std::string&) { return config.lr_relation; },
      steps_per_epoch * config.epochs_relation, config.warmup_ratio, config.max_grad_norm);
  std::mt19937_64 dropout_rng(config.seed + 0x51ed270b27ULL);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  bool have_best = false;
  ParameterStore best;
  for (std::size_t epoch = 1; epoch <= config.epochs_relation; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed * 1000003ULL + 7777 + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_relation) {
      // Pairs from the same sentence share one forward call.
      std::map<std::size_t, std::vector<std::size_t>> groups;
      for (std::size_t k = b; k < std::min(order.size(), b + config.batch_relation); ++k)
        groups[examples[order[k]].sentence].push_back(order[k]);
      for (const auto& [sent, members] : groups) {
        std::vector<RelationCandidate> cands;
        std::vector<std::int32_t> labels, subj, obj;
        for (std::size_t e : members) {
          cands.push_back(examples[e].candidate);
          labels.push_back(examples[e].label);
          subj.push_back(examples[e].subject_entity);
          obj.push_back(examples[e].object_entity);
        }
        const auto out = model.forward(sentences[sent].window, cands, params, &dropout_rng);
        Tensor loss = relation_loss(out, labels, subj, obj);
        check_finite(loss.item(), epoch, "relation");
        loss.backward();
        epoch_loss += loss.item();
      }
      opt.step();
    }
    result.history.push_back(
        {epoch, "train", epoch_loss / static_cast<double>(examples.size()), {}, {}, {}});
    if (!dev_sentences.empty()) {
      const auto [rel, relplus] = dev_relation_f1(dev, dev_sentences, dev_candidates, model,
                                                  params, setup.token_budget);
      result.history.push_back({epoch, "dev", {}, {}, rel, relplus});
      spdlog::debug("relation epoch {} dev rel_f1 {:.4f}", epoch, rel);
      if (!have_best || rel >= result.best_dev) {
        result.best_dev = rel;
        result.best_epoch = epoch;
        best = params.clone();
        have_best = true;
      }
    }
  }
  if (have_best) {
    result.params = std::move(best);
  } else {
    result.best_epoch = config.epochs_relation;
  }
  return result;
}

// ---- shared encoder -------------------------------------------------------

JointModels make_joint_models(const ModelSetup& setup, std::size_t vocab_size) {
  const RelationModel plain = make_relation_model(setup, vocab_size, RelationSource::kGold);
  EncoderConfig shared = setup.encoder;
  shared.vocab_size = plain.markers().total_vocab();
  EncoderConfig text = setup.encoder;
  text.vocab_size = vocab_size;
  return JointModels{
      EntityModel(shared, setup.entity, setup.entity_labels, "ent", "joint.enc"),
      RelationModel(text, plain.config(), setup.entity_labels, setup.relation_labels, "rel",
                    "joint.enc")};
}

TrainResult train_joint_shared(const std::vector<AnnotatedDocument>& train,
                               const std::vector<AnnotatedDocument>& dev, const Vocabulary& vocab,
                               const ModelSetup& setup, const TrainConfig& config) {
  config.validate();
  const auto sentences = prepare_sentences(train, vocab, setup.entity_labels, setup.window,
                                           setup.entity.max_span_len);
  const auto dev_sentences = prepare_sentences(dev, vocab, setup.entity_labels, setup.window,
                                               setup.entity.max_span_len);
  const JointModels models = make_joint_models(setup, vocab.size());

  TrainResult result;
  ParameterStore& params = result.params;
  std::mt19937_64 rng(config.seed);
  models.entity.init(params, rng);
  models.relation.init(params, rng, /*skip_encoder=*/true);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    if (!sentences[i].spans.empty()) order.push_back(i);
  if (order.empty()) throw DataError("train_joint_shared: no training sentences");

  const std::size_t steps_per_epoch = ceil_div(order.size(), config.batch_entity);
  Adam opt(
      params,
      [&](const std::string& name) {
        return starts_with(name, "joint.enc.") ? config.lr_encoder : config.lr_heads;
      },
      steps_per_epoch * config.epochs_entity, config.warmup_ratio, config.max_grad_norm);
  std::mt19937_64 dropout_rng(config.seed + 0x9e3779b97f4a7c15ULL);

  SentenceSpans dev_gold(dev_sentences.size());
  for (std::size_t i = 0; i < dev_sentences.size(); ++i)
    dev_gold[i] = dev_sentences[i].gold_entities;

  bool have_best = false;
  ParameterStore best;
  for (std::size_t epoch = 1; epoch <= config.epochs_entity; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_entity) {
      for (std::size_t k = b; k < std::min(order.size(), b + config.batch_entity); ++k) {
        const auto& ps = sentences[order[k]];
        Tensor hidden = models.entity.encode(ps.window, params, &dropout_rng);
        Tensor loss = entity_loss(
            models.entity.forward(hidden, ps.window, ps.spans, params), ps.span_labels);
        const auto cands = ordered_pairs(ps.gold_entities);
        if (!cands.empty()) {
          std::vector<std::int32_t> labels;
          for (const auto& c : cands) {
            labels.push_back(gold_relation_label(train[ps.doc], ps.sentence, c.subject.span,
                                                 c.object.span, setup.relation_labels));
          }
          const auto out = models.relation.forward(ps.window, cands, params, &dropout_rng);
          loss = add_scalars({loss, relation_loss(out, labels)});
        }
        check_finite(loss.item(), epoch, "joint");
        loss.backward();
        epoch_loss += loss.item();
      }
      opt.step();
    }
    result.history.push_back(
        {epoch, "train", epoch_loss / static_cast<double>(order.size()), {}, {}, {}});
    if (!dev_sentences.empty()) {
      const double ent = dev_entity_f1(dev_sentences, models.entity, params);
      const auto [rel, relplus] = dev_relation_f1(dev, dev_sentences, dev_gold, models.relation,
                                                  params, setup.token_budget);
      result.history.push_back({epoch, "dev", {}, ent, rel, relplus});
      if (!have_best || ent + rel >= result.best_dev) {
        result.best_dev = ent + rel;
        result.best_epoch = epoch;
        best = params.clone();
        have_best = true;
      }
    }
  }
  if (have_best) {
    result.params = std::move(best);
  } else {
    result.best_epoch = config.epochs_entity;
  }
  return result;
}

}  // namespace puretoy
