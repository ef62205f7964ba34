#pragma once

// Seeded generator of multiparty sessions with planted structure: one active
// speaker at a time, listeners mostly gazing at the speaker, and a facilitator
// who takes the turn more often than students.
//
// Draw order per session (all from one Rng seeded with GenConfig::seed):
//   1. initial speaker: weighted pick over all subjects
//   2. for each second t = 0 .. duration_s - 1:
//        for each subject in ascending node id: its gaze draw(s)
//        one bernoulli(1 / speaker_hold) for the end of the turn; on a turn
//        end, a weighted pick of the next speaker among the other subjects
// Weighted pick: facilitator weight = facilitator_speak_bias, others 1;
// u = uniform01 * total weight, first subject whose cumulative weight exceeds u.
// Listener gaze: u = uniform01; u < p_gaze_speaker -> speaker;
// u < p_gaze_speaker + p_gaze_empty -> empty node; else uniform over the other
// listeners. Speaker gaze: uniform over [empty, listeners ascending].

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgn_social/errors.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"

namespace tgn_social {

struct GenConfig {
  std::string session_id = "S01";
  std::string session_type = "D1";
  int n_subjects = 4;
  FacilitatorType facilitator_type = FacilitatorType::kNone;
  int duration_s = 1200;
  std::uint64_t seed = 0;
  double p_gaze_speaker = 0.7;
  double p_gaze_empty = 0.1;
  double speaker_hold = 30.0;
  double facilitator_speak_bias = 3.0;
};

inline void validate(const GenConfig& c) {
  if (c.n_subjects < 3 || c.n_subjects > 6) throw ValidationError("n_subjects", "n_subjects must lie in 3..6");
  if (c.duration_s < 20) throw ValidationError("duration_s", "duration_s must be at least 20");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(c.p_gaze_speaker)) throw ValidationError("p_gaze_speaker", "p_gaze_speaker must lie in [0, 1]");
  if (!prob(c.p_gaze_empty)) throw ValidationError("p_gaze_empty", "p_gaze_empty must lie in [0, 1]");
  if (c.p_gaze_speaker + c.p_gaze_empty > 1.0) {
    throw ValidationError("p_gaze_empty", "p_gaze_speaker + p_gaze_empty must not exceed 1");
  }
  if (!(c.speaker_hold >= 1.0)) throw ValidationError("speaker_hold", "speaker_hold must be at least 1 second");
  if (!(c.facilitator_speak_bias >= 1.0)) {
    throw ValidationError("facilitator_speak_bias", "facilitator_speak_bias must be at least 1");
  }
}

/// Subjects 1..n seated in id order; the facilitator, if any, is subject n.
inline SessionSpec make_session_spec(const GenConfig& c) {
  SessionSpec spec;
  spec.session_id = c.session_id;
  spec.session_type = c.session_type;
  spec.facilitator_type = c.facilitator_type;
  for (int i = 1; i <= c.n_subjects; ++i) {
    Role role = Role::kStudent;
    if (c.facilitator_type != FacilitatorType::kNone && i == c.n_subjects) role = facilitator_role(c.facilitator_type);
    spec.subjects.push_back({i, role, i - 1});
  }
  validate(spec);
  return spec;
}

inline Session generate_session(const GenConfig& c) {
  validate(c);
  Session s;
  s.spec = make_session_spec(c);
  s.stream.session_id = c.session_id;
  const int n = c.n_subjects;
  const NodeId facilitator = c.facilitator_type == FacilitatorType::kNone ? kEmptyNode : n;
  Rng rng(c.seed);

  auto weighted_pick = [&](NodeId exclude) {
    double total = 0.0;
    for (NodeId i = 1; i <= n; ++i) {
      if (i != exclude) total += (i == facilitator) ? c.facilitator_speak_bias : 1.0;
    }
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    NodeId last = kEmptyNode;
    for (NodeId i = 1; i <= n; ++i) {
      if (i == exclude) continue;
      acc += (i == facilitator) ? c.facilitator_speak_bias : 1.0;
      last = i;
      if (u < acc) return i;
    }
    return last;
  };

  NodeId speaker = weighted_pick(kEmptyNode);
  const double end_prob = 1.0 / c.speaker_hold;
  s.stream.events.reserve(static_cast<std::size_t>(n * c.duration_s));
  std::vector<NodeId> options;
  for (int t = 0; t < c.duration_s; ++t) {
    for (NodeId i = 1; i <= n; ++i) {
      InteractionEvent e;
      e.t = static_cast<double>(t);
      e.src = i;
      e.speaking = {speaker};
      options.clear();
      if (i == speaker) {
        options.push_back(kEmptyNode);
        for (NodeId j = 1; j <= n; ++j) {
          if (j != i) options.push_back(j);
        }
        e.dst = options[rng.uniform_index(options.size())];
      } else {
        const double u = rng.uniform01();
        if (u < c.p_gaze_speaker) {
          e.dst = speaker;
        } else if (u < c.p_gaze_speaker + c.p_gaze_empty) {
          e.dst = kEmptyNode;
        } else {
          for (NodeId j = 1; j <= n; ++j) {
            if (j != i && j != speaker) options.push_back(j);
          }
          e.dst = options[rng.uniform_index(options.size())];
        }
      }
      s.stream.events.push_back(std::move(e));
    }
    if (rng.bernoulli(end_prob)) speaker = weighted_pick(speaker);
  }
  return s;
}

struct CorpusTemplate {
  GenConfig config;  // session_id and seed are assigned per session
  int count = 3;
};

/// Eight session types with three sessions each, sized like the reference
/// corpus (3 to 6 subjects, facilitator types none / musician / music
/// teacher / teacher).
inline std::vector<CorpusTemplate> default_templates() {
  struct Row {
    const char* type;
    FacilitatorType fac;
    int n;
  };
  const Row rows[] = {
      {"D1", FacilitatorType::kNone, 5},         {"D2", FacilitatorType::kNone, 3},
      {"D3", FacilitatorType::kMusician, 4},     {"D4", FacilitatorType::kMusician, 5},
      {"D5", FacilitatorType::kMusicTeacher, 6}, {"D6", FacilitatorType::kMusicTeacher, 4},
      {"D7", FacilitatorType::kTeacher, 4},      {"D8", FacilitatorType::kTeacher, 6},
  };
  std::vector<CorpusTemplate> out;
  for (const auto& r : rows) {
    CorpusTemplate t;
    t.config.session_type = r.type;
    t.config.facilitator_type = r.fac;
    t.config.n_subjects = r.n;
    t.count = 3;
    out.push_back(t);
  }
  return out;
}

inline std::string session_id_for(std::size_t index, std::size_t total) {
  const int width = total >= 100 ? static_cast<int>(std::to_string(total).size()) : 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%0*zu", width, index + 1);
  return buf;
}

struct CorpusEntry {
  std::string session_id;
  std::string session_type;
  FacilitatorType facilitator_type = FacilitatorType::kNone;
  int n_subjects = 0;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::uint64_t base_seed = 0;
  std::vector<CorpusEntry> manifest;
  std::vector<Session> sessions;
};

/// Session i (0-based, across templates in order) gets id S<i+1> and seed
/// base_seed + i.
inline Corpus generate_corpus_in_memory(const std::vector<CorpusTemplate>& templates, std::uint64_t base_seed) {
  std::size_t total = 0;
  for (const auto& t : templates) {
    if (t.count < 1) throw ValidationError("count", "template count must be positive");
    total += static_cast<std::size_t>(t.count);
  }
  Corpus corpus;
  corpus.base_seed = base_seed;
  std::size_t index = 0;
  for (const auto& t : templates) {
    for (int k = 0; k < t.count; ++k, ++index) {
      GenConfig c = t.config;
      c.session_id = session_id_for(index, total);
      c.seed = base_seed + index;
      corpus.sessions.push_back(generate_session(c));
      corpus.manifest.push_back({c.session_id, c.session_type, c.facilitator_type, c.n_subjects, c.seed});
    }
  }
  return corpus;
}

inline nlohmann::ordered_json manifest_json(const Corpus& corpus) {
  nlohmann::ordered_json j;
  j["base_seed"] = corpus.base_seed;
  j["sessions"] = nlohmann::ordered_json::array();
  for (const auto& e : corpus.manifest) {
    nlohmann::ordered_json row;
    row["session_id"] = e.session_id;
    row["session_type"] = e.session_type;
    row["facilitator_type"] = std::string(to_string(e.facilitator_type));
    row["n_subjects"] = e.n_subjects;
    row["seed"] = e.seed;
    row["spec_file"] = e.session_id + ".spec.json";
    row["events_file"] = e.session_id + ".events.jsonl";
    j["sessions"].push_back(std::move(row));
  }
  return j;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : corpus.sessions) {
    save_session_spec(s.spec, dir / (s.spec.session_id + ".spec.json"));
    save_event_log(s.stream, dir / (s.spec.session_id + ".events.jsonl"));
  }
  write_file(dir / "manifest.json", manifest_json(corpus).dump(2) + "\n");
}

inline Corpus generate_corpus(const std::vector<CorpusTemplate>& templates, std::uint64_t base_seed,
                              const std::filesystem::path& dir) {
  Corpus corpus = generate_corpus_in_memory(templates, base_seed);
  write_corpus(corpus, dir);
  return corpus;
}

/// Reads every session listed in dir/manifest.json.
inline std::vector<Session> load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("no corpus manifest at " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  std::vector<Session> out;
  try {
    for (const auto& row : j.at("sessions")) {
      Session s;
      s.spec = load_session_spec(dir / row.at("spec_file").get<std::string>());
      s.stream = load_event_log(dir / row.at("events_file").get<std::string>(), s.spec);
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace tgn_social
