#pragma once

// Run configuration: one JSON document covering corpus generation, model,
// training, ablation and evaluation. Every key has a default; unknown keys
// are rejected; the resolved document records every value used.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgn_social/datagen.hpp"
#include "tgn_social/errors.hpp"
#include "tgn_social/evaluation.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"
#include "tgn_social/tgn.hpp"
#include "tgn_social/training.hpp"

namespace tgn_social {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string corpus_dir = "corpus";
  std::string run_dir = "run";

  GenConfig generator;  // session_id, session_type, n_subjects, facilitator_type and seed come from templates
  std::vector<CorpusTemplate> templates = default_templates();

  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> ablation_variants;
  std::optional<std::string> external_messages;

  std::uint64_t model_seed() const { return mix_seed(seed, hash_name("model")); }
  std::uint64_t train_seed() const { return mix_seed(seed, hash_name("train")); }
  std::uint64_t eval_seed() const { return mix_seed(seed, hash_name("eval")); }

  /// Templates with the generator parameters applied.
  std::vector<CorpusTemplate> resolved_templates() const {
    std::vector<CorpusTemplate> out = templates;
    for (auto& t : out) {
      t.config.duration_s = generator.duration_s;
      t.config.p_gaze_speaker = generator.p_gaze_speaker;
      t.config.p_gaze_empty = generator.p_gaze_empty;
      t.config.speaker_hold = generator.speaker_hold;
      t.config.facilitator_speak_bias = generator.facilitator_speak_bias;
    }
    return out;
  }
};

inline RunConfig default_run_config() {
  RunConfig c;
  for (const auto& v : named_variants()) c.ablation_variants.push_back(v.name);
  return c;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["corpus_dir"] = c.corpus_dir;
  j["run_dir"] = c.run_dir;
  nlohmann::ordered_json g;
  g["duration_s"] = c.generator.duration_s;
  g["p_gaze_speaker"] = c.generator.p_gaze_speaker;
  g["p_gaze_empty"] = c.generator.p_gaze_empty;
  g["speaker_hold"] = c.generator.speaker_hold;
  g["facilitator_speak_bias"] = c.generator.facilitator_speak_bias;
  g["templates"] = nlohmann::ordered_json::array();
  for (const auto& t : c.templates) {
    nlohmann::ordered_json row;
    row["session_type"] = t.config.session_type;
    row["facilitator_type"] = std::string(to_string(t.config.facilitator_type));
    row["n_subjects"] = t.config.n_subjects;
    row["count"] = t.count;
    g["templates"].push_back(std::move(row));
  }
  j["generator"] = std::move(g);
  j["model"] = to_json(c.model);
  nlohmann::ordered_json tr = to_json(c.train);
  tr.erase("seed");
  j["train"] = std::move(tr);
  j["ablation"]["variants"] = c.ablation_variants;
  j["eval"]["external_messages"] = c.external_messages ? nlohmann::ordered_json(*c.external_messages) : nullptr;
  return j;
}

namespace detail {

// Keys of `doc` must exist in `schema`, recursively through objects. Arrays
// and scalars are checked by the typed parser.
inline void reject_unknown_keys(const nlohmann::ordered_json& doc, const nlohmann::ordered_json& schema,
                                const std::string& path) {
  if (!doc.is_object()) return;
  if (!schema.is_object()) throw ConfigError("config key '" + path + "' must not be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    if (value.is_object()) reject_unknown_keys(value, schema.at(key), here);
  }
}

// Overlays `doc` onto `base` key by key.
inline void merge_into(nlohmann::ordered_json& base, const nlohmann::ordered_json& doc) {
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T get(const nlohmann::ordered_json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + path + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses a full or partial config document; missing keys take defaults.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const RunConfig defaults = default_run_config();
  nlohmann::ordered_json j = to_json(defaults);
  detail::reject_unknown_keys(doc, j, "");
  detail::merge_into(j, doc);

  RunConfig c;
  c.seed = detail::get<std::uint64_t>(j, "seed", "");
  c.corpus_dir = detail::get<std::string>(j, "corpus_dir", "");
  c.run_dir = detail::get<std::string>(j, "run_dir", "");

  const auto& g = j.at("generator");
  c.generator.duration_s = detail::get<int>(g, "duration_s", "generator.");
  c.generator.p_gaze_speaker = detail::get<double>(g, "p_gaze_speaker", "generator.");
  c.generator.p_gaze_empty = detail::get<double>(g, "p_gaze_empty", "generator.");
  c.generator.speaker_hold = detail::get<double>(g, "speaker_hold", "generator.");
  c.generator.facilitator_speak_bias = detail::get<double>(g, "facilitator_speak_bias", "generator.");
  if (!g.at("templates").is_array() || g.at("templates").empty()) {
    throw ConfigError("config key 'generator.templates' must be a non-empty array");
  }
  c.templates.clear();
  for (const auto& row : g.at("templates")) {
    if (!row.is_object()) throw ConfigError("generator.templates entries must be objects");
    for (const auto& [key, _] : row.items()) {
      if (key != "session_type" && key != "facilitator_type" && key != "n_subjects" && key != "count") {
        throw ConfigError("unknown config key 'generator.templates[]." + key + "'");
      }
    }
    CorpusTemplate t;
    const std::string p = "generator.templates[].";
    t.config.session_type = detail::get<std::string>(row, "session_type", p);
    try {
      t.config.facilitator_type = facilitator_from_string(detail::get<std::string>(row, "facilitator_type", p));
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    t.config.n_subjects = detail::get<int>(row, "n_subjects", p);
    t.count = detail::get<int>(row, "count", p);
    c.templates.push_back(std::move(t));
  }

  c.model = model_config_from_json(j.at("model"));

  const auto& tr = j.at("train");
  c.train.lr = detail::get<double>(tr, "lr", "train.");
  c.train.weight_decay = detail::get<double>(tr, "weight_decay", "train.");
  c.train.patience = detail::get<int>(tr, "patience", "train.");
  c.train.max_epochs = detail::get<int>(tr, "max_epochs", "train.");
  c.train.freeze_encoder = detail::get<bool>(tr, "freeze_encoder", "train.");
  c.train.validation_fraction = detail::get<double>(tr, "validation_fraction", "train.");
  c.train.seed = c.train_seed();
  validate(c.train);

  c.ablation_variants = detail::get<std::vector<std::string>>(j.at("ablation"), "variants", "ablation.");
  for (const auto& name : c.ablation_variants) variant_by_name(name);

  const auto& ev = j.at("eval").at("external_messages");
  if (ev.is_string()) {
    c.external_messages = ev.get<std::string>();
  } else if (!ev.is_null()) {
    throw ConfigError("config key 'eval.external_messages' must be a path or null");
  }

  for (auto& t : c.resolved_templates()) {
    try {
      validate(t.config);
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("generator: ") + e.what());
    }
  }
  return c;
}

/// Applies "a.b=value" to a config document. The value is parsed as JSON and
/// taken as a plain string when that fails. The key must be a known key.
inline void apply_override(nlohmann::ordered_json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::ordered_json value;
  try {
    value = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  const nlohmann::ordered_json schema = to_json(default_run_config());
  const nlohmann::ordered_json* s = &schema;
  nlohmann::ordered_json* d = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!s->is_object() || !s->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    s = &s->at(part);
    if (!d->is_object()) *d = nlohmann::ordered_json::object();
    if (dot == std::string::npos) {
      (*d)[part] = value;
      return;
    }
    d = &(*d)[part];
    start = dot + 1;
  }
}

inline nlohmann::ordered_json load_config_document(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  try {
    return nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace tgn_social
