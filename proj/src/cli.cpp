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

#include "puretoy/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include "puretoy/checkpoint.hpp"
#include "puretoy/equivalence.hpp"
#include "puretoy/errors.hpp"
#include "puretoy/eval.hpp"
#include "puretoy/train.hpp"

namespace puretoy {

namespace {

using nlohmann::json;

Vocabulary snapshot_vocab(const json& snapshot, const std::string& path) {
  if (!snapshot.contains("vocab") || !snapshot["vocab"].is_array()) {
    throw DataError("checkpoint '" + path + "' has no vocabulary");
  }
  return Vocabulary::from_tokens(snapshot["vocab"].get<std::vector<std::string>>());
}

std::string snapshot_kind(const json& snapshot, const std::string& path) {
  if (!snapshot.contains("kind") || !snapshot["kind"].is_string()) {
    throw DataError("checkpoint '" + path + "' has no model kind");
  }
  return snapshot["kind"].get<std::string>();
}

LoadOptions load_options(const RunConfig& config, const LabelSet& entities,
                         const LabelSet& relations) {
  LoadOptions o;
  o.entity_labels = &entities;
  o.relation_labels = &relations;
  o.max_span_len = config.entity.max_span_len;
  return o;
}

std::set<std::string> symmetric_set(const RunConfig& config) {
  return {config.symmetric_relations.begin(), config.symmetric_relations.end()};
}

void write_documents(const std::string& path, const std::vector<AnnotatedDocument>& docs,
                     std::ostream& out) {
  if (path.empty()) {
    write_corpus(out, docs);
  } else {
    save_corpus(path, docs);
    spdlog::info("wrote {} documents to {}", docs.size(), path);
  }
}

void emit_history(const std::vector<HistoryEntry>& history, std::ostream& out) {
  for (const auto& h : history) out << h.to_json().dump() << '\n';
}

void require(const std::string& value, const std::string& key, const std::string& command) {
  if (value.empty()) throw ConfigError(command + " needs --" + kebab_case(key));
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(const RunConfig& config, std::ostream& out) {
  const auto docs = generate_synthetic(config.gen_seed, config.gen_docs, config.grammar());
  write_documents(config.output, docs, out);
  return kExitOk;
}

struct Corpora {
  LabelSet entities;
  LabelSet relations;
  std::vector<AnnotatedDocument> train;
  std::vector<AnnotatedDocument> dev;
};

Corpora load_train_dev(const RunConfig& config, const std::string& command) {
  require(config.train_path, "train_path", command);
  Corpora c{config.entity_labels(), config.relation_labels(), {}, {}};
  const auto opts = load_options(config, c.entities, c.relations);
  c.train = load_corpus(config.train_path, opts);
  if (!config.dev_path.empty()) c.dev = load_corpus(config.dev_path, opts);
  spdlog::info("{}: {} training documents, {} dev documents", command, c.train.size(),
               c.dev.size());
  return c;
}

int cmd_train_entity(const RunConfig& config, std::ostream& out) {
  const Corpora c = load_train_dev(config, "train-entity");
  const Vocabulary vocab = Vocabulary::build(c.train);
  const ModelSetup setup = config.model_setup();
  const bool joint = config.train.shared_encoder;
  const TrainResult result = joint
                                 ? train_joint_shared(c.train, c.dev, vocab, setup, config.train)
                                 : train_entity(c.train, c.dev, vocab, setup, config.train);
  emit_history(result.history, out);
  spdlog::info("best epoch {} (dev score {:.4f})", result.best_epoch, result.best_dev);
  if (config.output.empty()) {
    spdlog::warn("no --output given; the trained model is discarded");
  } else {
    save_checkpoint(config.output, checkpoint_snapshot(config, joint ? "joint" : "entity", vocab),
                    result.params);
    spdlog::info("saved checkpoint {}", config.output);
  }
  return kExitOk;
}

int cmd_train_relation(const RunConfig& config, std::ostream& out) {
  const Corpora c = load_train_dev(config, "train-relation");
  std::optional<LoadedEntityModel> entity;
  if (!config.entity_checkpoint.empty()) {
    entity.emplace(load_entity_model(config.entity_checkpoint, config));
    if (entity->joint_relation) {
      throw ConfigError("train-relation needs a separately trained entity model, got a "
                        "shared-encoder checkpoint");
    }
  }
  const Vocabulary vocab = entity ? entity->vocab : Vocabulary::build(c.train);
  const TrainResult result = train_relation(c.train, c.dev, vocab, config.model_setup(),
                                            config.train, entity ? &entity->params : nullptr);
  emit_history(result.history, out);
  spdlog::info("best epoch {} (dev rel F1 {:.4f})", result.best_epoch, result.best_dev);
  if (config.output.empty()) {
    spdlog::warn("no --output given; the trained model is discarded");
  } else {
    save_checkpoint(config.output, checkpoint_snapshot(config, "relation", vocab), result.params);
    spdlog::info("saved checkpoint {}", config.output);
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& config, std::ostream& out) {
  require(config.input_path, "input_path", "predict");
  require(config.entity_checkpoint, "entity_checkpoint", "predict");
  const LabelSet entities = config.entity_labels();
  const LabelSet relations = config.relation_labels();
  const auto docs = load_corpus(config.input_path, load_options(config, entities, relations));
  const LoadedEntityModel entity = load_entity_model(config.entity_checkpoint, config);

  PipelineResult result;
  if (entity.joint_relation) {
    result = predict_documents(docs, entity.model, entity.params, entity.vocab,
                               *entity.joint_relation, entity.params, entity.vocab, config,
                               config.mode);
  } else {
    require(config.relation_checkpoint, "relation_checkpoint", "predict");
    const LoadedRelationModel relation = load_relation_model(config.relation_checkpoint, config);
    result = predict_documents(docs, entity.model, entity.params, entity.vocab, relation.model,
                               relation.params, relation.vocab, config, config.mode);
  }
  spdlog::info("predict ({}): {} relation pairs in {} encoder passes", to_string(config.mode),
               result.relation_pairs, result.relation_encoder_passes);
  write_documents(config.output, result.documents, out);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, const std::string& compare_path, std::ostream& out) {
  require(config.pred_path, "pred_path", "evaluate");
  const LabelSet entities = config.entity_labels();
  const LabelSet relations = config.relation_labels();
  const auto opts = load_options(config, entities, relations);
  const auto pred = load_corpus(config.pred_path, opts);
  std::optional<std::vector<AnnotatedDocument>> gold;
  if (!config.gold_path.empty()) gold = load_corpus(config.gold_path, opts);
  const auto sym = symmetric_set(config);

  if (compare_path.empty()) {
    // Without a gold file the prediction file's own gold fields are used.
    out << evaluate_documents(pred, gold ? *gold : pred, sym).to_json().dump() << '\n';
    return kExitOk;
  }
  const auto other = load_corpus(compare_path, opts);
  nlohmann::ordered_json report = compare_predictions(pred, other);
  const auto& reference = gold ? *gold : pred;
  const MetricsReport a = evaluate_documents(pred, reference, sym);
  const MetricsReport b = evaluate_documents(other, reference, sym);
  report["metrics"] = a.to_json();
  report["compare_metrics"] = b.to_json();
  report["rel_f1_gap"] = a.rel.f1 - b.rel.f1;
  report["relplus_f1_gap"] = a.relplus.f1 - b.relplus.f1;
  out << report.dump() << '\n';
  return kExitOk;
}

int cmd_check_equivalence(const RunConfig& config, std::ostream& out) {
  EquivalenceOptions o;
  o.cases = config.equivalence_cases;
  o.seed = config.equivalence_seed;
  o.encoder = config.encoder;
  const EquivalenceReport report = run_equivalence_suite(o);
  out << report.to_json().dump() << '\n';
  if (!report.passed()) {
    throw PropertyViolation("batched approximation disagrees with the reference computation");
  }
  return kExitOk;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
  const LabelSet entities = config.entity_labels();
  const LabelSet relations = config.relation_labels();
  std::vector<AnnotatedDocument> docs;
  if (config.input_path.empty()) {
    docs = generate_synthetic(config.gen_seed, config.gen_docs, config.grammar());
    spdlog::info("bench: no --input-path, using {} synthetic documents", docs.size());
  } else {
    docs = load_corpus(config.input_path, load_options(config, entities, relations));
  }

  std::optional<LoadedRelationModel> loaded;
  if (!config.relation_checkpoint.empty()) {
    loaded.emplace(load_relation_model(config.relation_checkpoint, config));
  }
  const Vocabulary vocab = loaded ? loaded->vocab : Vocabulary::build(docs);
  const RelationModel model = loaded ? loaded->model
                                     : make_relation_model(config.model_setup(), vocab.size(),
                                                           config.train.relation_source);
  ParameterStore params;
  if (loaded) {
    params = loaded->params.clone();
  } else {
    spdlog::info("bench: no --relation-checkpoint, timing a randomly initialised model");
    std::mt19937_64 rng(config.train.seed);
    model.init(params, rng);
  }

  const auto sentences = prepare_sentences(docs, vocab, entities, config.window,
                                           config.entity.max_span_len);
  SentenceSpans candidates(sentences.size());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    candidates[i] = sentences[i].gold_entities;
    const std::size_t m = candidates[i].size();
    pairs += m * (m > 0 ? m - 1 : 0);
  }
  spdlog::info("bench: {} sentences, {:.2f} candidate pairs per sentence", sentences.size(),
               sentences.empty() ? 0.0 : static_cast<double>(pairs) / sentences.size());
  for (InferenceMode mode : {InferenceMode::kFull, InferenceMode::kApprox}) {
    const BenchResult r = benchmark_speed(sentences, candidates, model, params, mode,
                                          config.token_budget, config.bench_runs);
    out << r.to_json().dump() << '\n';
  }
  return kExitOk;
}

int cmd_sweep_window(const RunConfig& config, std::ostream& out) {
  const Corpora c = load_train_dev(config, "sweep-window");
  if (c.dev.empty()) throw ConfigError("sweep-window needs --dev-path");
  const Vocabulary vocab = Vocabulary::build(c.train);
  for (std::size_t w : {std::size_t{0}, std::size_t{100}, std::size_t{200}, std::size_t{300}}) {
    RunConfig run = config;
    run.window = w;
    const ModelSetup setup = run.model_setup();
    spdlog::info("sweep-window: W = {}", w == 0 ? std::string("bare") : std::to_string(w));
    const TrainResult ent = train_entity(c.train, c.dev, vocab, setup, run.train);
    const TrainResult rel = train_relation(c.train, c.dev, vocab, setup, run.train, &ent.params);
    const EntityModel em = make_entity_model(setup, vocab.size());
    const RelationModel rm = make_relation_model(setup, vocab.size(), run.train.relation_source);
    const auto result = predict_documents(c.dev, em, ent.params, vocab, rm, rel.params, vocab,
                                          run, InferenceMode::kFull);
    const MetricsReport m = evaluate_documents(result.documents, c.dev, symmetric_set(run));
    nlohmann::ordered_json row;
    row["window"] = w == 0 ? json("bare") : json(w);
    row["ent_f1"] = m.ent.f1;
    row["rel_f1"] = m.rel.f1;
    row["relplus_f1"] = m.relplus.f1;
    out << row.dump() << '\n';
  }
  return kExitOk;
}

}  // namespace

// ---- checkpoint helpers ---------------------------------------------------

nlohmann::json checkpoint_snapshot(const RunConfig& config, const std::string& kind,
                                   const Vocabulary& vocab) {
  json j = config.to_json();
  // File locations are not model state; dropping them keeps reruns byte-identical.
  for (const char* key : {"train_path", "dev_path", "input_path", "gold_path", "pred_path",
                          "output", "entity_checkpoint", "relation_checkpoint"}) {
    j.erase(key);
  }
  j["kind"] = kind;
  j["vocab"] = vocab.tokens();
  return j;
}

LoadedEntityModel load_entity_model(const std::string& path, const RunConfig& config) {
  Checkpoint ck = load_checkpoint(path);
  const std::string kind = snapshot_kind(ck.config, path);
  if (kind != "entity" && kind != "joint") {
    throw ConfigError("checkpoint '" + path + "' holds a " + kind + " model, not an entity model");
  }
  const Vocabulary vocab = snapshot_vocab(ck.config, path);
  const ModelSetup setup = config.model_setup();
  ParameterStore expected;
  std::mt19937_64 rng(0);
  if (kind == "joint") {
    JointModels joint = make_joint_models(setup, vocab.size());
    joint.entity.init(expected, rng);
    joint.relation.init(expected, rng, true);
    check_layout(ck.params, expected);
    return {std::move(joint.entity), std::move(ck.params), vocab, std::move(joint.relation)};
  }
  EntityModel model = make_entity_model(setup, vocab.size());
  model.init(expected, rng);
  if (config.train.entity_aux_relation_loss) {
    model.init_aux_relation(expected, setup.relation_labels.size(), rng);
  }
  check_layout(ck.params, expected);
  return {std::move(model), std::move(ck.params), vocab, std::nullopt};
}

LoadedRelationModel load_relation_model(const std::string& path, const RunConfig& config) {
  Checkpoint ck = load_checkpoint(path);
  const std::string kind = snapshot_kind(ck.config, path);
  if (kind != "relation") {
    throw ConfigError("checkpoint '" + path + "' holds a " + kind + " model, not a relation model");
  }
  const Vocabulary vocab = snapshot_vocab(ck.config, path);
  RelationModel model =
      make_relation_model(config.model_setup(), vocab.size(), config.train.relation_source);
  ParameterStore expected;
  std::mt19937_64 rng(0);
  model.init(expected, rng);
  check_layout(ck.params, expected);
  return {std::move(model), std::move(ck.params), vocab};
}

PipelineResult predict_documents(const std::vector<AnnotatedDocument>& docs,
                                 const EntityModel& entity_model,
                                 const ParameterStore& entity_params,
                                 const Vocabulary& entity_vocab,
                                 const RelationModel& relation_model,
                                 const ParameterStore& relation_params,
                                 const Vocabulary& relation_vocab, const RunConfig& config,
                                 InferenceMode mode) {
  const LabelSet& entities = entity_model.labels();
  const auto ent_sentences = prepare_sentences(docs, entity_vocab, entities, config.window,
                                               config.entity.max_span_len);
  const EntityRun ent = run_entity_model(ent_sentences, entity_model, entity_params);
  const auto rel_sentences = prepare_sentences(docs, relation_vocab, entities, config.window,
                                               config.entity.max_span_len);
  const RelationRun rel = run_relation_model(rel_sentences, ent.entities, relation_model,
                                             relation_params, mode, config.token_budget);
  PipelineResult out;
  out.documents = attach_predictions(docs, ent_sentences, ent.entities, rel.relations, entities,
                                     relation_model.relation_labels());
  out.relation_encoder_passes = rel.encoder_passes;
  out.relation_pairs = rel.pairs;
  return out;
}

nlohmann::ordered_json compare_predictions(const std::vector<AnnotatedDocument>& a,
                                           const std::vector<AnnotatedDocument>& b) {
  if (a.size() != b.size()) {
    throw DataError("compare: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                    " documents");
  }
  auto agreement = [](const auto& x, const auto& y, nlohmann::ordered_json& j,
                      const std::string& prefix) {
    const std::set sx(x.begin(), x.end());
    const std::set sy(y.begin(), y.end());
    std::size_t common = 0;
    for (const auto& e : sx) common += sy.count(e);
    const std::size_t uni = sx.size() + sy.size() - common;
    j[prefix + "_agreement"] = uni == 0 ? 1.0 : static_cast<double>(common) / uni;
    j[prefix + "_num_a"] = sx.size();
    j[prefix + "_num_b"] = sy.size();
    j[prefix + "_num_common"] = common;
  };
  nlohmann::ordered_json j;
  agreement(predicted_entities(a), predicted_entities(b), j, "ent");
  agreement(predicted_relations(a), predicted_relations(b), j, "rel");
  return j;
}

// ---- entry point ----------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"puretoy: span-based entity and relation extraction"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_file;
  bool show_config = false;
  std::map<std::string, std::string> overrides;
  app.add_option("--config", config_file, "key = value config file");
  app.add_flag("--show-config", show_config, "print the resolved config as JSON");
  for (const auto& key : RunConfig::keys()) {
    app.add_option_function<std::string>(
        "--" + kebab_case(key), [&overrides, key](const std::string& v) { overrides[key] = v; },
        "config key " + key);
  }

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-data", "write a synthetic corpus"},
      {"train-entity", "train the entity model (or the shared-encoder model)"},
      {"train-relation", "train the relation model"},
      {"predict", "run the entity -> relation pipeline"},
      {"evaluate", "score predictions against gold"},
      {"check-equivalence", "run the batched-approximation property suite"},
      {"bench", "time full vs batched relation inference"},
      {"sweep-window", "retrain and evaluate over context window sizes"},
  };
  std::string compare_path;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "evaluate") {
      sub->add_option("--compare", compare_path, "second prediction file to compare against");
    }
  }

  std::vector<const char*> argv{"puretoy"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, std::cerr);
      return code == 0 ? kExitOk : kExitUsage;
    }

    RunConfig config;
    if (!config_file.empty()) apply_config_file(config, config_file);
    for (const auto& [key, value] : overrides) {
      try {
        config.set(key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--") + kebab_case(key) + ": " + e.what());
      }
    }
    config.validate();
    spdlog::set_level(spdlog::level::from_str(config.log_level));

    if (show_config) {
      out << config.to_json().dump(2) << '\n';
      return kExitOk;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return kExitUsage;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-data") return cmd_gen_data(config, out);
    if (cmd == "train-entity") return cmd_train_entity(config, out);
    if (cmd == "train-relation") return cmd_train_relation(config, out);
    if (cmd == "predict") return cmd_predict(config, out);
    if (cmd == "evaluate") return cmd_evaluate(config, compare_path, out);
    if (cmd == "check-equivalence") return cmd_check_equivalence(config, out);
    if (cmd == "bench") return cmd_bench(config, out);
    return cmd_sweep_window(config, out);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const DivergenceError& e) {
    spdlog::error("{}", e.what());
    return kExitDivergence;
  } catch (const PropertyViolation& e) {
    spdlog::error("{}", e.what());
    return kExitProperty;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
}

}  // namespace puretoy
