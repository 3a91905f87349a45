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

#include "puretoy/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "puretoy/errors.hpp"

namespace puretoy {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text +
                      "'");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': integer out of range: '" + text + "'");
  }
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set_text;
  std::function<void(RunConfig&, const json&)> set_json;
  std::function<json(const RunConfig&)> get;
};

template <class Access>
Field field(std::string key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  Field f;
  f.key = key;
  f.get = [access](const RunConfig& c) -> json {
    const T& v = access(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, FeatureMode>) {
      return std::string(to_string(v));
    } else if constexpr (std::is_same_v<T, RelationSource> || std::is_same_v<T, InferenceMode>) {
      return to_string(v);
    } else {
      return v;
    }
  };
  f.set_text = [access, key](RunConfig& c, const std::string& text) {
    T& v = access(c);
    if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(key, text);
    } else if constexpr (std::is_integral_v<T>) {
      v = static_cast<T>(parse_unsigned(key, text));
    } else if constexpr (std::is_floating_point_v<T>) {
      v = parse_double(key, text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      v = trim(text);
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      v = parse_list(text);
    } else if constexpr (std::is_same_v<T, FeatureMode>) {
      v = parse_feature_mode(trim(text));
    } else if constexpr (std::is_same_v<T, RelationSource>) {
      v = parse_relation_source(trim(text));
    } else {
      v = parse_inference_mode(trim(text));
    }
  };
  f.set_json = [access, key, set_text = f.set_text](RunConfig& c, const json& j) {
    T& v = access(c);
    try {
      if constexpr (std::is_same_v<T, FeatureMode> || std::is_same_v<T, RelationSource> ||
                    std::is_same_v<T, InferenceMode>) {
        set_text(c, j.get<std::string>());
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!j.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
        v = j.get<T>();
      } else {
        v = j.get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  };
  return f;
}

#define PT_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t{
        PT_FIELD("d_model", c.encoder.d_model),
        PT_FIELD("n_heads", c.encoder.n_heads),
        PT_FIELD("n_layers", c.encoder.n_layers),
        PT_FIELD("d_ff", c.encoder.d_ff),
        PT_FIELD("max_position", c.encoder.max_position),
        PT_FIELD("dropout", c.encoder.dropout),
        PT_FIELD("max_span_len", c.entity.max_span_len),
        PT_FIELD("width_emb_dim", c.entity.width_emb_dim),
        PT_FIELD("ffnn_hidden", c.entity.ffnn_hidden),
        PT_FIELD("feature_mode", c.feature_mode),
        PT_FIELD("type_emb_dim", c.type_emb_dim),
        PT_FIELD("epochs_entity", c.train.epochs_entity),
        PT_FIELD("epochs_relation", c.train.epochs_relation),
        PT_FIELD("batch_entity", c.train.batch_entity),
        PT_FIELD("batch_relation", c.train.batch_relation),
        PT_FIELD("lr_encoder", c.train.lr_encoder),
        PT_FIELD("lr_heads", c.train.lr_heads),
        PT_FIELD("lr_relation", c.train.lr_relation),
        PT_FIELD("warmup_ratio", c.train.warmup_ratio),
        PT_FIELD("seed", c.train.seed),
        PT_FIELD("shared_encoder", c.train.shared_encoder),
        PT_FIELD("entity_aux_relation_loss", c.train.entity_aux_relation_loss),
        PT_FIELD("relation_source", c.train.relation_source),
        PT_FIELD("prune_lambda", c.train.prune_lambda),
        PT_FIELD("jackknife_k", c.train.jackknife_k),
        PT_FIELD("max_grad_norm", c.train.max_grad_norm),
        PT_FIELD("window", c.window),
        PT_FIELD("token_budget", c.token_budget),
        PT_FIELD("entity_types", c.entity_types),
        PT_FIELD("relation_types", c.relation_types),
        PT_FIELD("symmetric_relations", c.symmetric_relations),
        PT_FIELD("train_path", c.train_path),
        PT_FIELD("dev_path", c.dev_path),
        PT_FIELD("input_path", c.input_path),
        PT_FIELD("gold_path", c.gold_path),
        PT_FIELD("pred_path", c.pred_path),
        PT_FIELD("output", c.output),
        PT_FIELD("entity_checkpoint", c.entity_checkpoint),
        PT_FIELD("relation_checkpoint", c.relation_checkpoint),
        PT_FIELD("mode", c.mode),
        PT_FIELD("gen_docs", c.gen_docs),
        PT_FIELD("gen_seed", c.gen_seed),
        PT_FIELD("gen_min_sentences", c.gen_min_sentences),
        PT_FIELD("gen_max_sentences", c.gen_max_sentences),
        PT_FIELD("gen_min_entities", c.gen_min_entities),
        PT_FIELD("gen_max_entities", c.gen_max_entities),
        PT_FIELD("bench_runs", c.bench_runs),
        PT_FIELD("equivalence_cases", c.equivalence_cases),
        PT_FIELD("equivalence_seed", c.equivalence_seed),
        PT_FIELD("log_level", c.log_level),
    };
    std::sort(t.begin(), t.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return t;
  }();
  return table;
}

#undef PT_FIELD

const Field& find_field(const std::string& key) {
  const auto& t = fields();
  auto it = std::lower_bound(t.begin(), t.end(), key,
                             [](const Field& f, const std::string& k) { return f.key < k; });
  if (it == t.end() || it->key != key) throw ConfigError("unknown config key '" + key + "'");
  return *it;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set_text(*this, value);
}

void RunConfig::validate() const {
  EncoderConfig enc = encoder;
  enc.vocab_size = 2;
  enc.validate();
  entity.validate();
  train.validate();
  if (type_emb_dim == 0) throw ConfigError("type_emb_dim must be positive");
  if (token_budget == 0) throw ConfigError("token_budget must be positive");
  if (entity_types.empty()) throw ConfigError("entity_types must not be empty");
  if (relation_types.empty()) throw ConfigError("relation_types must not be empty");
  for (const auto& s : symmetric_relations)
    if (std::find(relation_types.begin(), relation_types.end(), s) == relation_types.end())
      throw ConfigError("symmetric relation '" + s + "' is not in relation_types");
  if (gen_min_sentences == 0 || gen_min_sentences > gen_max_sentences)
    throw ConfigError("gen_min_sentences must be in [1, gen_max_sentences]");
  if (gen_min_entities == 0 || gen_min_entities > gen_max_entities)
    throw ConfigError("gen_min_entities must be in [1, gen_max_entities]");
  if (bench_runs < 3) throw ConfigError("bench_runs must be at least 3");
  static const std::vector<std::string> levels{"trace", "debug", "info", "warn", "error", "off"};
  if (std::find(levels.begin(), levels.end(), log_level) == levels.end())
    throw ConfigError("log_level must be one of trace, debug, info, warn, error, off");
}

nlohmann::json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config snapshot is not a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) find_field(key).set_json(c, value);
  return c;
}

LabelSet RunConfig::entity_labels() const { return LabelSet(entity_types); }

LabelSet RunConfig::relation_labels() const { return LabelSet(relation_types, symmetric_relations); }

ModelSetup RunConfig::model_setup() const {
  ModelSetup s;
  s.encoder = encoder;
  s.entity = entity;
  s.feature_mode = feature_mode;
  s.type_emb_dim = type_emb_dim;
  s.entity_labels = entity_labels();
  s.relation_labels = relation_labels();
  s.window = window;
  s.token_budget = token_budget;
  return s;
}

GrammarConfig RunConfig::grammar() const {
  GrammarConfig g;
  g.entity_types = entity_types;
  g.relation_types = relation_types;
  g.min_sentences = gen_min_sentences;
  g.max_sentences = gen_max_sentences;
  g.min_entities = gen_min_entities;
  g.max_entities = gen_max_entities;
  return g;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      config.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path);
}

std::string kebab_case(const std::string& key) {
  std::string out = key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

}  // namespace puretoy
