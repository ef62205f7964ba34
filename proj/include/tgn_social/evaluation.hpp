#pragma once

// Model-versus-history evaluation on both tasks, the variant ablation and the
// message-encoding comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgn_social/errors.hpp"
#include "tgn_social/history.hpp"
#include "tgn_social/metrics.hpp"
#include "tgn_social/parallel.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"
#include "tgn_social/tgn.hpp"
#include "tgn_social/training.hpp"

namespace tgn_social {

/// FNV-1a over the query fields, in order.
class QueryHasher {
 public:
  void add(const LinkQuery& q) {
    mix(q.src);
    mix(q.dst);
    mix(q.t);
    mix(q.label);
  }
  void add(const SpeakerQuery& q) {
    mix(q.node);
    mix(q.t);
    mix(q.label);
  }
  void add(std::uint64_t v) { mix(v); }
  std::uint64_t value() const { return h_; }

 private:
  template <typename T>
  void mix(const T& v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (unsigned char b : bytes) {
      h_ ^= b;
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct SessionScore {
  std::string session_id;
  FacilitatorType facilitator_type = FacilitatorType::kNone;
  Confusion model;
  Confusion baseline;
};

struct TaskEvaluation {
  Confusion model;
  Confusion baseline;
  std::vector<SessionScore> per_session;
  std::uint64_t model_query_hash = 0;
  std::uint64_t baseline_query_hash = 0;
};

inline std::uint64_t eval_seed(std::uint64_t seed, const std::string& session_id) {
  return mix_seed(seed, hash_name(session_id));
}

namespace detail {

inline void feed_history(HistoryModel& h, const PreparedSession& s, BatchRange b) {
  for (std::size_t i = b.begin; i < b.end; ++i) h.update(s.raw[i]);
}

// Sessions are scored independently, then reduced in input order.
template <typename ScoreSession>
TaskEvaluation evaluate_sessions(std::span<const PreparedSession> sessions, ScoreSession score) {
  std::vector<SessionScore> per(sessions.size());
  std::vector<std::uint64_t> model_hash(sessions.size()), base_hash(sessions.size());
  parallel_for(sessions.size(), thread_cap(), [&](std::size_t k) {
    per[k].session_id = sessions[k].spec.session_id;
    per[k].facilitator_type = sessions[k].spec.facilitator_type;
    score(sessions[k], per[k], model_hash[k], base_hash[k]);
  });
  TaskEvaluation out;
  QueryHasher mh, bh;
  for (std::size_t k = 0; k < per.size(); ++k) {
    out.model += per[k].model;
    out.baseline += per[k].baseline;
    mh.add(model_hash[k]);
    bh.add(base_hash[k]);
  }
  out.per_session = std::move(per);
  out.model_query_hash = mh.value();
  out.baseline_query_hash = bh.value();
  return out;
}

}  // namespace detail

/// Next-gaze link prediction over whole sessions. Each batch is scored by the
/// model and the history baseline on the same queries, then folded into both.
inline TaskEvaluation evaluate_link(const TemporalGraphNetwork& net, std::span<const PreparedSession> sessions,
                                    std::uint64_t seed) {
  return detail::evaluate_sessions(sessions, [&](const PreparedSession& s, SessionScore& out, std::uint64_t& mhash,
                                                 std::uint64_t& bhash) {
    SessionState state = net.new_state(s.spec);
    HistoryModel history(s.subjects);
    Rng rng(eval_seed(seed, s.spec.session_id));
    QueryHasher mh, bh;
    for (const auto& b : s.all_batches()) {
      const auto q = link_queries(s, b, rng);
      for (const auto& x : q) {
        bh.add(x);
        out.baseline.add(history.predict_gaze(x.src, x.dst), x.label > 0.5);
      }
      const auto r = net.process_batch(state, batch_events(s, b), q, {});
      for (std::size_t i = 0; i < q.size(); ++i) {
        mh.add(q[i]);
        out.model.add(predict_positive(r.link_logits[i]), q[i].label > 0.5);
      }
      detail::feed_history(history, s, b);
    }
    mhash = mh.value();
    bhash = bh.value();
  });
}

/// Next-step speaking status, one query per subject per timestamp.
inline TaskEvaluation evaluate_speaker(const TemporalGraphNetwork& net, std::span<const PreparedSession> sessions) {
  return detail::evaluate_sessions(sessions, [&](const PreparedSession& s, SessionScore& out, std::uint64_t& mhash,
                                                 std::uint64_t& bhash) {
    SessionState state = net.new_state(s.spec);
    HistoryModel history(s.subjects);
    QueryHasher mh, bh;
    for (const auto& b : s.all_batches()) {
      const auto q = speaker_queries(s, b);
      for (const auto& x : q) {
        bh.add(x);
        out.baseline.add(history.predict_speaking(x.node), x.label > 0.5);
      }
      const auto r = net.process_batch(state, batch_events(s, b), {}, q);
      for (std::size_t i = 0; i < q.size(); ++i) {
        mh.add(q[i]);
        out.model.add(predict_positive(r.speaker_logits[i]), q[i].label > 0.5);
      }
      detail::feed_history(history, s, b);
    }
    mhash = mh.value();
    bhash = bh.value();
  });
}

inline nlohmann::ordered_json task_json(const TaskEvaluation& e) {
  nlohmann::ordered_json j;
  j["model"] = to_json(e.model);
  j["baseline"] = to_json(e.baseline);
  nlohmann::ordered_json d;
  d["f1"] = f1(e.model) - f1(e.baseline);
  d["accuracy"] = (e.model.total() ? accuracy(e.model) : 0.0) - (e.baseline.total() ? accuracy(e.baseline) : 0.0);
  j["delta"] = d;
  j["per_session"] = nlohmann::ordered_json::array();
  for (const auto& s : e.per_session) {
    nlohmann::ordered_json row;
    row["session_id"] = s.session_id;
    row["facilitator_type"] = std::string(to_string(s.facilitator_type));
    row["model"] = to_json(s.model);
    row["baseline"] = to_json(s.baseline);
    j["per_session"].push_back(std::move(row));
  }
  return j;
}

// ---- ablation ----

struct Variant {
  std::string name;
  ModelConfig model;
};

/// The seven named variants. All use one layer and the "last" aggregator
/// unless the name says otherwise.
inline std::vector<Variant> named_variants(const ModelConfig& base = {}) {
  auto make = [&](std::string name, EmbeddingMode mode, int layers, bool memory, Aggregator agg) {
    Variant v{std::move(name), base};
    v.model.embedding = mode;
    v.model.layers = layers;
    v.model.use_memory = memory;
    v.model.aggregator = agg;
    return v;
  };
  return {
      make("TGN-2l", EmbeddingMode::kAttention, 2, true, Aggregator::kLast),
      make("TGN-attn", EmbeddingMode::kAttention, 1, true, Aggregator::kLast),
      make("TGN-id", EmbeddingMode::kIdentity, 1, true, Aggregator::kLast),
      make("TGN-mean", EmbeddingMode::kAttention, 1, true, Aggregator::kMean),
      make("TGN-no-mem", EmbeddingMode::kAttention, 1, false, Aggregator::kLast),
      make("TGN-sum", EmbeddingMode::kSum, 1, true, Aggregator::kLast),
      make("TGN-time", EmbeddingMode::kTime, 1, true, Aggregator::kLast),
  };
}

inline Variant variant_by_name(std::string_view name, const ModelConfig& base = {}) {
  for (auto& v : named_variants(base)) {
    if (v.name == name) return v;
  }
  std::string known;
  for (const auto& v : named_variants()) known += (known.empty() ? "" : ", ") + v.name;
  throw ConfigError("unknown variant '" + std::string(name) + "' (known: " + known + ")");
}

struct AblationRow {
  std::string variant;
  double f1 = 0.0;
  double accuracy = 0.0;
  double sec_per_epoch = 0.0;
  int epochs = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Trains each variant with phase 1 from the same seed and scores next-gaze
/// prediction on the test sessions. Rows are sorted by variant name.
inline std::vector<AblationRow> run_ablation(const std::vector<Variant>& variants,
                                             std::span<const PreparedSession> train,
                                             std::span<const PreparedSession> test, const TrainConfig& cfg,
                                             std::uint64_t model_seed, std::uint64_t eval_seed_value) {
  std::vector<std::string> names;
  for (const auto& v : variants) {
    if (std::find(names.begin(), names.end(), v.name) != names.end()) {
      throw ConfigError("duplicate variant name " + v.name);
    }
    names.push_back(v.name);
  }
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto net = TemporalGraphNetwork::initialize(v.model, model_seed);
    const auto result = train_phase1(net, train, cfg);
    const auto eval = evaluate_link(net, test, eval_seed_value);
    std::vector<double> secs;
    for (const auto& e : result.log) secs.push_back(e.seconds);
    rows.push_back({v.name, f1(eval.model), eval.model.total() ? accuracy(eval.model) : 0.0, median(secs),
                    static_cast<int>(result.log.size())});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.variant < b.variant; });
  return rows;
}

inline std::string format_double(double v) { return nlohmann::json(v).dump(); }

inline std::string ablation_csv(const std::vector<AblationRow>& rows, bool with_timing = true) {
  std::string out = with_timing ? "variant,f1,acc,sec_per_epoch\n" : "variant,f1,acc\n";
  for (const auto& r : rows) {
    out += r.variant + "," + format_double(r.f1) + "," + format_double(r.accuracy);
    if (with_timing) out += "," + format_double(r.sec_per_epoch);
    out += "\n";
  }
  return out;
}

// ---- message-encoding comparison ----

/// Reads one comma-separated row of numbers per event, no header.
inline std::vector<std::vector<double>> load_message_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("messages", "not a number: '" + cell + "'", lineno);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError("messages", "row width " + std::to_string(row.size()) + " differs from " +
                                            std::to_string(rows.front().size()), lineno);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string message_csv(const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += format_double(r[i]);
    }
    out += '\n';
  }
  return out;
}

struct GroupStat {
  FacilitatorType facilitator_type = FacilitatorType::kNone;
  std::vector<double> onehot;
  std::vector<double> external;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population standard deviation.
inline MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) throw ValidationError("scores", "mean of an empty group");
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

struct EncodingTable {
  std::string train_session;
  std::vector<GroupStat> groups;  // None, Teacher, MusicTeacher, Musician
  bool has_external = false;
};

/// Trains on the first music-teacher session and scores next-gaze F1 on every
/// other session. With `external_dir`, a second model is trained on the
/// vectors in <dir>/<session_id>.messages.csv.
inline EncodingTable compare_encodings(const std::vector<Session>& sessions, const ModelConfig& model,
                                       const TrainConfig& cfg, std::uint64_t model_seed, std::uint64_t eval_seed_value,
                                       const std::optional<std::filesystem::path>& external_dir = std::nullopt) {
  std::vector<const Session*> ordered;
  for (const auto& s : sessions) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const Session* a, const Session* b) { return a->spec.session_id < b->spec.session_id; });
  const Session* train = nullptr;
  for (const Session* s : ordered) {
    if (s->spec.facilitator_type == FacilitatorType::kMusicTeacher) {
      train = s;
      break;
    }
  }
  if (!train) throw ValidationError("facilitator_type", "no music_teacher session to train on");

  EncodingTable table;
  table.train_session = train->spec.session_id;
  table.has_external = external_dir.has_value();
  const FacilitatorType order[] = {FacilitatorType::kNone, FacilitatorType::kTeacher, FacilitatorType::kMusicTeacher,
                                   FacilitatorType::kMusician};
  for (FacilitatorType f : order) table.groups.push_back({f, {}, {}});

  auto run = [&](auto features_of, bool external) {
    const auto feat_train = features_of(*train);
    ModelConfig m = model;
    if (feat_train) m.d_feat = static_cast<int>(feat_train->front().size());
    auto net = TemporalGraphNetwork::initialize(m, model_seed);
    const PreparedSession prepared = prepare_session(*train, cfg.validation_fraction, feat_train ? &*feat_train : nullptr);
    train_phase1(net, std::span<const PreparedSession>(&prepared, 1), cfg);
    std::vector<PreparedSession> others;
    for (const Session* s : ordered) {
      if (s == train) continue;
      const auto f = features_of(*s);
      others.push_back(prepare_session(*s, 0.0, f ? &*f : nullptr));
    }
    const auto eval = evaluate_link(net, others, eval_seed_value);
    for (const auto& row : eval.per_session) {
      for (auto& g : table.groups) {
        if (g.facilitator_type == row.facilitator_type) (external ? g.external : g.onehot).push_back(f1(row.model));
      }
    }
  };
  run([](const Session&) { return std::optional<std::vector<std::vector<double>>>(); }, false);
  if (external_dir) {
    run([&](const Session& s) {
          auto rows = load_message_csv(*external_dir / (s.spec.session_id + ".messages.csv"));
          if (rows.empty()) throw ValidationError("messages", s.spec.session_id + ": empty message file");
          return std::optional<std::vector<std::vector<double>>>(std::move(rows));
        },
        true);
  }
  for (const auto& g : table.groups) {
    if (g.onehot.empty()) {
      throw ValidationError("facilitator_type",
                            "no evaluation sessions with facilitator type " + std::string(to_string(g.facilitator_type)));
    }
  }
  return table;
}

/// Columns: facilitator_type, onehot_mean, onehot_std, external_mean,
/// external_std, diff (external - onehot). External columns are empty when no
/// external vectors were supplied.
inline std::string encoding_csv(const EncodingTable& t) {
  std::string out = "facilitator_type,onehot_mean,onehot_std,external_mean,external_std,diff\n";
  for (const auto& g : t.groups) {
    const MeanStd a = mean_std(g.onehot);
    out += std::string(to_string(g.facilitator_type)) + "," + format_double(a.mean) + "," + format_double(a.std) + ",";
    if (t.has_external) {
      const MeanStd b = mean_std(g.external);
      out += format_double(b.mean) + "," + format_double(b.std) + "," + format_double(b.mean - a.mean);
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

}  // namespace tgn_social
