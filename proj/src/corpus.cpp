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

#include "puretoy/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "puretoy/errors.hpp"

namespace puretoy {

using ordered_json = nlohmann::ordered_json;

std::size_t AnnotatedDocument::sentence_start(std::size_t sentence) const {
  std::size_t start = 0;
  for (std::size_t s = 0; s < sentence && s < sentences.size(); ++s) start += sentences[s].size();
  return start;
}

std::size_t AnnotatedDocument::num_tokens() const { return sentence_start(sentences.size()); }

// ---- parsing --------------------------------------------------------------

namespace {

class LineContext {
 public:
  explicit LineContext(std::size_t line) : line_(line) {}
  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw DataError("corpus line " + std::to_string(line_) + ", field '" + field + "': " + what);
  }

 private:
  std::size_t line_;
};

std::int32_t read_index(const nlohmann::json& v, const LineContext& ctx, const std::string& field) {
  if (!v.is_number_integer()) ctx.fail(field, "expected an integer index");
  const auto x = v.get<std::int64_t>();
  if (x < 0 || x > INT32_MAX) ctx.fail(field, "index " + std::to_string(x) + " out of range");
  return static_cast<std::int32_t>(x);
}

void check_label(const LabelSet* labels, const std::string& type, const LineContext& ctx,
                 const std::string& field) {
  if (labels && !labels->find(type)) ctx.fail(field, "unknown label '" + type + "'");
}

// Reads a per-sentence list of [start, end, type] with document-level indices
// and returns sentence-local annotations.
std::vector<SentenceEntities> read_entities(const nlohmann::json& value,
                                            const AnnotatedDocument& doc,
                                            const LineContext& ctx, const std::string& field,
                                            const LabelSet* labels) {
  if (!value.is_array() || value.size() != doc.sentences.size()) {
    ctx.fail(field, "expected one list per sentence");
  }
  std::vector<SentenceEntities> out(doc.sentences.size());
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto begin = static_cast<std::int32_t>(doc.sentence_start(s));
    const auto len = static_cast<std::int32_t>(doc.sentences[s].size());
    if (!value[s].is_array()) ctx.fail(field, "sentence " + std::to_string(s) + " is not a list");
    for (const auto& item : value[s]) {
      if (!item.is_array() || item.size() != 3 || !item[2].is_string()) {
        ctx.fail(field, "expected [start, end, type]");
      }
      const auto a = read_index(item[0], ctx, field);
      const auto b = read_index(item[1], ctx, field);
      if (a > b || a < begin || b >= begin + len) {
        ctx.fail(field, "span [" + std::to_string(a) + "," + std::to_string(b) +
                            "] outside sentence " + std::to_string(s));
      }
      auto type = item[2].get<std::string>();
      check_label(labels, type, ctx, field);
      out[s].push_back({a - begin, b - begin, std::move(type)});
    }
  }
  return out;
}

std::vector<SentenceRelations> read_relations(const nlohmann::json& value,
                                              const AnnotatedDocument& doc,
                                              const LineContext& ctx, const std::string& field,
                                              const LabelSet* labels) {
  if (!value.is_array() || value.size() != doc.sentences.size()) {
    ctx.fail(field, "expected one list per sentence");
  }
  std::vector<SentenceRelations> out(doc.sentences.size());
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto begin = static_cast<std::int32_t>(doc.sentence_start(s));
    const auto len = static_cast<std::int32_t>(doc.sentences[s].size());
    if (!value[s].is_array()) ctx.fail(field, "sentence " + std::to_string(s) + " is not a list");
    for (const auto& item : value[s]) {
      if (!item.is_array() || item.size() != 5 || !item[4].is_string()) {
        ctx.fail(field, "expected [start1, end1, start2, end2, type]");
      }
      std::int32_t idx[4];
      for (int k = 0; k < 4; ++k) idx[k] = read_index(item[k], ctx, field);
      for (int k = 0; k < 4; k += 2) {
        if (idx[k] > idx[k + 1] || idx[k] < begin || idx[k + 1] >= begin + len) {
          ctx.fail(field, "argument span outside sentence " + std::to_string(s));
        }
      }
      auto type = item[4].get<std::string>();
      check_label(labels, type, ctx, field);
      out[s].push_back(
          {idx[0] - begin, idx[1] - begin, idx[2] - begin, idx[3] - begin, std::move(type)});
    }
  }
  return out;
}

bool has_span(const SentenceEntities& ents, std::int32_t a, std::int32_t b) {
  return std::any_of(ents.begin(), ents.end(),
                     [&](const EntityAnnotation& e) { return e.start == a && e.end == b; });
}

AnnotatedDocument parse_document(const std::string& line, std::size_t line_no,
                                 const LoadOptions& options, LoadStats* stats) {
  const LineContext ctx(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    ctx.fail("<document>", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) ctx.fail("<document>", "expected a JSON object");
  static const std::set<std::string> kRequired{"doc_key", "sentences", "ner", "relations"};
  static const std::set<std::string> kOptional{"predicted_ner", "predicted_relations"};
  for (const auto& key : kRequired)
    if (!j.contains(key)) ctx.fail(key, "missing");
  for (const auto& [key, v] : j.items())
    if (!kRequired.count(key) && !kOptional.count(key)) ctx.fail(key, "unexpected field");

  AnnotatedDocument doc;
  if (!j["doc_key"].is_string()) ctx.fail("doc_key", "expected a string");
  doc.doc_key = j["doc_key"].get<std::string>();

  const auto& sents = j["sentences"];
  if (!sents.is_array()) ctx.fail("sentences", "expected a list of token lists");
  for (const auto& s : sents) {
    if (!s.is_array()) ctx.fail("sentences", "expected a list of token lists");
    std::vector<std::string> toks;
    for (const auto& t : s) {
      if (!t.is_string()) ctx.fail("sentences", "tokens must be strings");
      toks.push_back(t.get<std::string>());
    }
    doc.sentences.push_back(std::move(toks));
  }

  auto ner = read_entities(j["ner"], doc, ctx, "ner", options.entity_labels);
  auto rels = read_relations(j["relations"], doc, ctx, "relations", options.relation_labels);

  doc.ner.resize(ner.size());
  doc.relations.resize(rels.size());
  for (std::size_t s = 0; s < ner.size(); ++s) {
    std::vector<std::pair<std::int32_t, std::int32_t>> dropped;
    for (auto& e : ner[s]) {
      if (static_cast<std::size_t>(e.end - e.start + 1) > options.max_span_len) {
        dropped.emplace_back(e.start, e.end);
        if (stats) ++stats->dropped_entities;
        continue;
      }
      doc.ner[s].push_back(std::move(e));
    }
    for (auto& r : rels[s]) {
      const bool known1 = has_span(ner[s], r.start1, r.end1);
      const bool known2 = has_span(ner[s], r.start2, r.end2);
      if (!known1 || !known2) {
        ctx.fail("relations", "relation argument is not an entity mention in sentence " +
                                  std::to_string(s));
      }
      if (!has_span(doc.ner[s], r.start1, r.end1) || !has_span(doc.ner[s], r.start2, r.end2)) {
        if (stats) ++stats->dropped_relations;
        continue;
      }
      doc.relations[s].push_back(std::move(r));
    }
  }

  if (j.contains("predicted_ner")) {
    doc.predicted_ner =
        read_entities(j["predicted_ner"], doc, ctx, "predicted_ner", options.entity_labels);
  }
  if (j.contains("predicted_relations")) {
    doc.predicted_relations = read_relations(j["predicted_relations"], doc, ctx,
                                             "predicted_relations", options.relation_labels);
  }
  return doc;
}

ordered_json entities_json(const AnnotatedDocument& doc, const std::vector<SentenceEntities>& ner) {
  ordered_json out = ordered_json::array();
  for (std::size_t s = 0; s < ner.size(); ++s) {
    const auto base = static_cast<std::int32_t>(doc.sentence_start(s));
    ordered_json sent = ordered_json::array();
    for (const auto& e : ner[s]) sent.push_back({base + e.start, base + e.end, e.type});
    out.push_back(std::move(sent));
  }
  return out;
}

ordered_json relations_json(const AnnotatedDocument& doc,
                            const std::vector<SentenceRelations>& rels) {
  ordered_json out = ordered_json::array();
  for (std::size_t s = 0; s < rels.size(); ++s) {
    const auto base = static_cast<std::int32_t>(doc.sentence_start(s));
    ordered_json sent = ordered_json::array();
    for (const auto& r : rels[s]) {
      sent.push_back({base + r.start1, base + r.end1, base + r.start2, base + r.end2, r.type});
    }
    out.push_back(std::move(sent));
  }
  return out;
}

}  // namespace

std::vector<AnnotatedDocument> read_corpus(std::istream& in, const LoadOptions& options,
                                           LoadStats* stats) {
  std::vector<AnnotatedDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  LoadStats local;
  LoadStats* st = stats ? stats : &local;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    docs.push_back(parse_document(line, line_no, options, st));
  }
  st->documents = docs.size();
  if (st->dropped_entities || st->dropped_relations) {
    spdlog::warn("dropped {} entity mentions wider than {} tokens and {} relations over them",
                 st->dropped_entities, options.max_span_len, st->dropped_relations);
  }
  return docs;
}

std::vector<AnnotatedDocument> load_corpus(const std::string& path, const LoadOptions& options,
                                           LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  return read_corpus(in, options, stats);
}

std::string serialize_document(const AnnotatedDocument& doc) {
  ordered_json j;
  j["doc_key"] = doc.doc_key;
  j["sentences"] = doc.sentences;
  j["ner"] = entities_json(doc, doc.ner);
  j["relations"] = relations_json(doc, doc.relations);
  if (doc.predicted_ner) j["predicted_ner"] = entities_json(doc, *doc.predicted_ner);
  if (doc.predicted_relations) {
    j["predicted_relations"] = relations_json(doc, *doc.predicted_relations);
  }
  return j.dump();
}

void write_corpus(std::ostream& out, const std::vector<AnnotatedDocument>& docs) {
  for (const auto& d : docs) out << serialize_document(d) << '\n';
}

void save_corpus(const std::string& path, const std::vector<AnnotatedDocument>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus '" + path + "'");
  write_corpus(out, docs);
}

// ---- vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

void Vocabulary::add(const std::string& token) {
  if (ids_.emplace(token, static_cast<std::int32_t>(tokens_.size())).second) {
    tokens_.push_back(token);
  }
}

Vocabulary Vocabulary::build(const std::vector<AnnotatedDocument>& docs) {
  Vocabulary v;
  for (const auto& d : docs)
    for (const auto& s : d.sentences)
      for (const auto& t : s) v.add(t);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.ids_.count(t)) throw DataError("vocabulary: duplicate token '" + t + "'");
    v.add(t);
  }
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

// ---- windows --------------------------------------------------------------

ContextWindow make_window(const AnnotatedDocument& doc, std::size_t sentence_index,
                          std::size_t window_size) {
  if (sentence_index >= doc.sentences.size()) {
    throw InputError("make_window: sentence " + std::to_string(sentence_index) + " of " +
                     std::to_string(doc.sentences.size()));
  }
  const auto& sent = doc.sentences[sentence_index];
  const std::size_t n = sent.size();
  ContextWindow w;
  w.target_len = n;
  if (window_size <= n) {
    if (window_size != 0 && window_size < n) {
      spdlog::warn("window size {} is smaller than sentence length {} in '{}'; using the bare "
                   "sentence",
                   window_size, n, doc.doc_key);
    }
    w.tokens = sent;
    return w;
  }
  const std::size_t extra = window_size - n;
  const std::size_t left_want = extra / 2;
  const std::size_t right_want = extra - left_want;
  const std::size_t begin = doc.sentence_start(sentence_index);
  const std::size_t total = doc.num_tokens();
  const std::size_t left = std::min(left_want, begin);
  const std::size_t right = std::min(right_want, total - (begin + n));

  std::vector<std::string> flat;
  flat.reserve(total);
  for (const auto& s : doc.sentences) flat.insert(flat.end(), s.begin(), s.end());
  w.tokens.assign(flat.begin() + static_cast<std::ptrdiff_t>(begin - left),
                  flat.begin() + static_cast<std::ptrdiff_t>(begin + n + right));
  w.target_offset = left;
  return w;
}

TokenWindow encode_window(const ContextWindow& window, const Vocabulary& vocab) {
  return {vocab.encode(window.tokens), window.target_offset, window.target_len};
}

// ---- synthetic grammar ----------------------------------------------------

namespace {

const std::vector<std::string> kFillers{"the",   "a",    "we",    "this", "paper",   "results",
                                        "show",  "that", "our",   "in",   "on",      "is",
                                        "of",    "study", "using", "data", "approach", "new"};
const std::vector<std::string> kModifiers{"neural", "novel", "robust", "fast",
                                          "large",  "simple", "deep",  "sparse"};
const std::vector<std::string> kNeutral{"and", "with", "versus"};
const std::vector<std::string> kTriggerPool{"for",     "supports", "within", "inside",
                                            "enables", "via",      "into",   "about"};

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c))
                      ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                      : '_');
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::size_t uniform(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(lo, hi);
  return d(rng);
}

bool coin(double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng) < p;
}

}  // namespace

SyntheticGrammar::SyntheticGrammar(GrammarConfig config) : config_(std::move(config)) {
  if (config_.entity_types.size() < 2) throw ConfigError("grammar: need at least 2 entity types");
  if (config_.relation_types.empty()) throw ConfigError("grammar: need at least 1 relation type");
  if (config_.min_sentences == 0 || config_.min_sentences > config_.max_sentences ||
      config_.min_entities == 0 || config_.min_entities > config_.max_entities ||
      config_.heads_per_type == 0) {
    throw ConfigError("grammar: invalid size ranges");
  }
  for (std::size_t t = 0; t < config_.entity_types.size(); ++t) {
    std::vector<std::string> heads;
    for (std::size_t i = 0; i < config_.heads_per_type; ++i) {
      heads.push_back(slug(config_.entity_types[t]) + "_" + std::to_string(i));
      head_type_[heads.back()] = t;
    }
    heads_.push_back(std::move(heads));
    cues_.push_back(slug(config_.entity_types[t]) + "_cue");
  }
  for (std::size_t i = 0; i < config_.heads_per_type; ++i) {
    shared_heads_.push_back("item_" + std::to_string(i));
  }
  for (const auto& h : shared_heads_) mention_heads_.insert(h);
  for (const auto& [h, t] : head_type_) mention_heads_.insert(h);
  for (std::size_t r = 0; r < config_.relation_types.size(); ++r) {
    std::vector<std::string> words;
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t slot = 2 * r + k;
      words.push_back(slot < kTriggerPool.size()
                          ? kTriggerPool[slot]
                          : "trig" + std::to_string(r) + (k == 0 ? "a" : "b"));
      trigger_relation_[words.back()] = r;
    }
    triggers_.push_back(std::move(words));
  }
}

std::string SyntheticGrammar::relation_rule(const std::vector<std::string>& sentence,
                                            const EntityAnnotation& subject,
                                            const EntityAnnotation& object) const {
  if (subject.end >= object.start) return {};
  std::optional<std::size_t> relation;
  for (auto t = static_cast<std::size_t>(subject.end) + 1;
       t < static_cast<std::size_t>(object.start) && t < sentence.size(); ++t) {
    if (mention_heads_.count(sentence[t])) return {};  // another mention in between
    auto trig = trigger_relation_.find(sentence[t]);
    if (trig == trigger_relation_.end()) continue;
    if (relation) return {};
    relation = trig->second;
  }
  if (!relation) return {};
  auto type_index = [&](const std::string& type) {
    return static_cast<std::size_t>(
        std::find(config_.entity_types.begin(), config_.entity_types.end(), type) -
        config_.entity_types.begin());
  };
  const std::size_t types = config_.entity_types.size();
  if (type_index(subject.type) == *relation % types ||
      type_index(object.type) == (*relation + 1) % types) {
    return {};
  }
  return config_.relation_types[*relation];
}

std::vector<AnnotatedDocument> SyntheticGrammar::generate(std::uint64_t seed,
                                                          std::size_t size) const {
  std::mt19937_64 rng(seed);
  std::vector<AnnotatedDocument> docs;
  docs.reserve(size);
  for (std::size_t d = 0; d < size; ++d) {
    AnnotatedDocument doc;
    doc.doc_key = "synth-" + std::to_string(seed) + "-" + std::to_string(d);
    const std::size_t num_sents = uniform(config_.min_sentences, config_.max_sentences, rng);
    for (std::size_t s = 0; s < num_sents; ++s) {
      std::vector<std::string> toks;
      SentenceEntities ents;
      const std::size_t k = uniform(config_.min_entities, config_.max_entities, rng);
      for (std::size_t f = uniform(0, 2, rng); f > 0; --f) toks.push_back(pick(kFillers, rng));
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t type = uniform(0, config_.entity_types.size() - 1, rng);
        // Shared heads carry no type; the cue word before the mention does.
        const bool ambiguous = coin(config_.ambiguous_prob, rng);
        if (ambiguous || coin(config_.cue_prob, rng)) toks.push_back(cues_[type]);
        const auto start = static_cast<std::int32_t>(toks.size());
        for (int m = 0; m < 2 && coin(config_.modifier_prob, rng); ++m) {
          toks.push_back(pick(kModifiers, rng));
        }
        toks.push_back(pick(ambiguous ? shared_heads_ : heads_[type], rng));
        ents.push_back({start, static_cast<std::int32_t>(toks.size() - 1),
                        config_.entity_types[type]});
        if (i + 1 < k) {
          if (coin(config_.trigger_prob, rng)) {
            toks.push_back(pick(pick(triggers_, rng), rng));
          } else {
            toks.push_back(pick(kNeutral, rng));
          }
          for (std::size_t f = uniform(0, 1, rng); f > 0; --f) toks.push_back(pick(kFillers, rng));
        }
      }
      for (std::size_t f = uniform(0, 1, rng); f > 0; --f) toks.push_back(pick(kFillers, rng));
      toks.push_back(".");

      SentenceRelations rels;
      for (std::size_t i = 0; i < ents.size(); ++i) {
        for (std::size_t j = 0; j < ents.size(); ++j) {
          if (i == j) continue;
          auto label = relation_rule(toks, ents[i], ents[j]);
          if (!label.empty()) {
            rels.push_back({ents[i].start, ents[i].end, ents[j].start, ents[j].end, label});
          }
        }
      }
      doc.sentences.push_back(std::move(toks));
      doc.ner.push_back(std::move(ents));
      doc.relations.push_back(std::move(rels));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<AnnotatedDocument> generate_synthetic(std::uint64_t seed, std::size_t size,
                                                  const GrammarConfig& grammar) {
  return SyntheticGrammar(grammar).generate(seed, size);
}

// ---- folds ----------------------------------------------------------------

std::vector<Fold> jackknife_folds(std::size_t num_documents, std::size_t k) {
  if (k < 2) throw ConfigError("jackknife: need at least 2 folds");
  if (num_documents < k) {
    throw DataError("jackknife: " + std::to_string(num_documents) + " documents for " +
                    std::to_string(k) + " folds");
  }
  std::vector<Fold> folds(k);
  for (std::size_t d = 0; d < num_documents; ++d) {
    for (std::size_t f = 0; f < k; ++f) (d % k == f ? folds[f].holdout : folds[f].train).push_back(d);
  }
  return folds;
}

}  // namespace puretoy
