#pragma once

// Two-phase training: phase 1 learns the encoder and link decoder on gaze
// link prediction; phase 2 trains the speaker decoder (and optionally the
// encoder) on next-step speaking status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgn_social/autograd.hpp"
#include "tgn_social/errors.hpp"
#include "tgn_social/features.hpp"
#include "tgn_social/metrics.hpp"
#include "tgn_social/negative_sampling.hpp"
#include "tgn_social/optim.hpp"
#include "tgn_social/parallel.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"
#include "tgn_social/tgn.hpp"

namespace tgn_social {

struct BatchRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// A session ready for replay: encoded events cut into batches of
/// 10 x n_subjects events, with the speaking set of every timestamp.
struct PreparedSession {
  SessionSpec spec;
  std::vector<InteractionEvent> raw;
  std::vector<EncodedEvent> events;
  std::vector<NodeId> subjects;
  std::size_t batch_events = 0;
  std::size_t validation_begin = 0;  // first held-out event; == events.size() when nothing is held out
  std::vector<BatchRange> train_batches;
  std::vector<BatchRange> val_batches;
  std::vector<double> timestamps;                // distinct, ascending
  std::map<double, std::vector<NodeId>> speaking;  // speaking set at each timestamp

  std::vector<BatchRange> all_batches() const {
    std::vector<BatchRange> out = train_batches;
    out.insert(out.end(), val_batches.begin(), val_batches.end());
    return out;
  }
};

inline std::vector<BatchRange> cut_batches(std::size_t begin, std::size_t end, std::size_t size) {
  std::vector<BatchRange> out;
  for (std::size_t b = begin; b < end; b += size) out.push_back({b, std::min(end, b + size)});
  return out;
}

/// `validation_fraction` == 0 keeps every event in the replay batches.
/// `features`, if given, replaces the one-hot message with one row per event.
inline PreparedSession prepare_session(const Session& s, double validation_fraction = 0.0,
                                       const std::vector<std::vector<double>>* features = nullptr) {
  PreparedSession p;
  p.spec = s.spec;
  p.raw = s.stream.events;
  p.subjects = s.spec.subject_ids();
  p.batch_events = 10 * p.subjects.size();
  if (features && features->size() != p.raw.size()) {
    throw ValidationError("features", s.spec.session_id + ": " + std::to_string(features->size()) +
                                          " feature rows for " + std::to_string(p.raw.size()) + " events");
  }
  p.events.reserve(p.raw.size());
  for (std::size_t i = 0; i < p.raw.size(); ++i) {
    const auto& e = p.raw[i];
    EncodedEvent enc{e.t, e.src, e.dst, {}};
    if (features) {
      enc.feat = (*features)[i];
    } else {
      const MessageVector m = encode_message(e, s.spec);
      enc.feat.assign(m.begin(), m.end());
    }
    p.events.push_back(std::move(enc));
    auto& set = p.speaking[e.t];
    for (NodeId n : e.speaking) {
      if (std::find(set.begin(), set.end(), n) == set.end()) set.push_back(n);
    }
  }
  for (auto& [t, set] : p.speaking) {
    std::sort(set.begin(), set.end());
    p.timestamps.push_back(t);
  }
  p.validation_begin = validation_fraction > 0.0 ? validation_start(s.stream, validation_fraction) : p.raw.size();
  p.train_batches = cut_batches(0, p.validation_begin, p.batch_events);
  p.val_batches = cut_batches(p.validation_begin, p.raw.size(), p.batch_events);
  return p;
}

/// Positives (label 1), the dataset's empty-dst rows (label 0), then one
/// sampled negative per positive (label 0).
inline std::vector<LinkQuery> link_queries(const PreparedSession& s, BatchRange b, Rng& rng) {
  std::vector<LinkQuery> q;
  std::vector<Edge> positives;
  for (std::size_t i = b.begin; i < b.end; ++i) {
    const auto& e = s.events[i];
    if (e.dst != kEmptyNode) {
      q.push_back({e.src, e.dst, e.t, 1.0});
      positives.push_back({e.src, e.dst, e.t});
    }
  }
  for (std::size_t i = b.begin; i < b.end; ++i) {
    const auto& e = s.events[i];
    if (e.dst == kEmptyNode) q.push_back({e.src, kEmptyNode, e.t, 0.0});
  }
  const auto neg = sample_negatives(positives, s.subjects, rng);
  for (const auto& n : neg.negatives) q.push_back({n.src, n.dst, n.t, 0.0});
  return q;
}

/// One query per subject for every timestamp whose first event falls in the
/// batch and that has a following sampled timestamp. The label is the
/// subject's speaking status at that following timestamp.
inline std::vector<SpeakerQuery> speaker_queries(const PreparedSession& s, BatchRange b) {
  std::vector<SpeakerQuery> q;
  for (std::size_t i = b.begin; i < b.end; ++i) {
    const double t = s.events[i].t;
    if (i > 0 && s.events[i - 1].t == t) continue;
    auto next = s.speaking.upper_bound(t);
    if (next == s.speaking.end()) continue;
    for (NodeId n : s.subjects) {
      const bool on = std::find(next->second.begin(), next->second.end(), n) != next->second.end();
      q.push_back({n, t, on ? 1.0 : 0.0});
    }
  }
  return q;
}

/// Probability above 0.5, strictly.
inline bool predict_positive(double logit) { return detail::sigmoid(logit) > 0.5; }

inline std::span<const EncodedEvent> batch_events(const PreparedSession& s, BatchRange b) {
  return std::span<const EncodedEvent>(s.events).subspan(b.begin, b.end - b.begin);
}

struct TrainConfig {
  double lr = 0.001;
  double weight_decay = 1e-4;
  int patience = 10;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  bool freeze_encoder = true;
  double validation_fraction = 0.15;
};

inline void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (c.patience < 1) throw ConfigError("train.patience must be at least 1");
  if (c.max_epochs < 0) throw ConfigError("train.max_epochs must be non-negative");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in (0, 1)");
  }
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["patience"] = c.patience;
  j["max_epochs"] = c.max_epochs;
  j["seed"] = c.seed;
  j["freeze_encoder"] = c.freeze_encoder;
  j["validation_fraction"] = c.validation_fraction;
  return j;
}

struct EpochLog {
  int phase = 1;
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

inline nlohmann::ordered_json to_json(const EpochLog& e, bool with_timing = true) {
  nlohmann::ordered_json j;
  j["phase"] = e.phase;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_f1"] = e.val_f1;
  j["val_acc"] = e.val_acc;
  if (with_timing) j["seconds"] = e.seconds;
  return j;
}

struct TrainResult {
  ParamSet params;  // best-validation parameters
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
};

inline AdamConfig adam_config(const TrainConfig& c) {
  AdamConfig a;
  a.lr = c.lr;
  a.weight_decay = c.weight_decay;
  return a;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::uint64_t epoch_seed(std::uint64_t seed, int phase, int epoch, const std::string& session_id) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(phase * 100000 + epoch)), hash_name(session_id));
}

/// Validation negatives are drawn from a fixed stream so every epoch scores
/// the same query set.
inline std::uint64_t validation_seed(std::uint64_t seed, const std::string& session_id) {
  return mix_seed(mix_seed(seed, 0x76616cULL), hash_name(session_id));
}

/// Replays the training part of each session without queries, then scores
/// the held-out batches.
inline Confusion validate_link(const TemporalGraphNetwork& net, std::span<const PreparedSession> sessions,
                               std::uint64_t seed) {
  std::vector<Confusion> per(sessions.size());
  parallel_for(sessions.size(), thread_cap(), [&](std::size_t k) {
    const auto& s = sessions[k];
    SessionState state = net.new_state(s.spec);
    for (const auto& b : s.train_batches) net.process_batch(state, batch_events(s, b), {}, {});
    Rng rng(validation_seed(seed, s.spec.session_id));
    for (const auto& b : s.val_batches) {
      const auto q = link_queries(s, b, rng);
      const auto r = net.process_batch(state, batch_events(s, b), q, {});
      for (std::size_t i = 0; i < q.size(); ++i) per[k].add(predict_positive(r.link_logits[i]), q[i].label > 0.5);
    }
  });
  Confusion total;
  for (const auto& c : per) total += c;
  return total;
}

namespace detail {

inline void require_sessions(std::span<const PreparedSession> sessions) {
  if (sessions.empty()) throw ValidationError("train", "empty training set");
  for (const auto& s : sessions) {
    if (s.train_batches.empty()) throw ValidationError("train", s.spec.session_id + " has no training events");
  }
}

// Strict improvement with patience; keeps the best parameters.
struct EarlyStopper {
  int patience;
  double best = -std::numeric_limits<double>::infinity();
  int since = 0;

  bool improved(double v) {
    if (v > best) {
      best = v;
      since = 0;
      return true;
    }
    ++since;
    return false;
  }
  bool stop() const { return since >= patience; }
};

}  // namespace detail

/// Phase 1. Memory starts from zeros for every session in every epoch.
inline TrainResult train_phase1(TemporalGraphNetwork& net, std::span<const PreparedSession> sessions,
                                const TrainConfig& cfg) {
  validate(cfg);
  detail::require_sessions(sessions);
  TrainResult result;
  result.params = net.params();
  ParamSet grads = net.params().zeros_like([](std::string_view n) { return !is_speaker_decoder(n); });
  AdamState opt = make_adam_state(grads);
  const AdamConfig adam = adam_config(cfg);
  detail::EarlyStopper stopper{cfg.patience};

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& s : sessions) {
      SessionState state = net.new_state(s.spec);
      Rng rng(epoch_seed(cfg.seed, 1, epoch, s.spec.session_id));
      for (const auto& b : s.train_batches) {
        const auto q = link_queries(s, b, rng);
        grads.set_zero();
        const auto r = net.process_batch(state, batch_events(s, b), q, {}, Objective::kLink, &grads);
        adam_step(net.params(), grads, opt, adam);
        loss_sum += r.loss;
        ++batches;
      }
    }
    const Confusion val = validate_link(net, sessions, cfg.seed);
    EpochLog e{1, epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, f1(val),
               val.total() ? accuracy(val) : 0.0, seconds_since(start)};
    result.log.push_back(e);
    if (stopper.improved(e.val_f1)) {
      result.params = net.params();
      result.best_epoch = epoch;
      result.best_val_f1 = e.val_f1;
    }
    if (stopper.stop()) break;
  }
  net.params() = result.params;
  return result;
}

/// Speaker-decoder inputs and labels for one session, computed once through a
/// fixed encoder.
struct SpeakerCache {
  std::vector<Tensor> train_x, val_x;
  std::vector<std::vector<double>> train_y, val_y;
};

inline SpeakerCache cache_speaker_inputs(const TemporalGraphNetwork& net, const PreparedSession& s) {
  SpeakerCache c;
  SessionState state = net.new_state(s.spec);
  auto run = [&](const std::vector<BatchRange>& batches, std::vector<Tensor>& xs, std::vector<std::vector<double>>& ys) {
    for (const auto& b : batches) {
      const auto q = speaker_queries(s, b);
      const auto r = net.process_batch(state, batch_events(s, b), {}, q);
      if (q.empty()) continue;
      std::vector<double> y;
      for (const auto& sq : q) y.push_back(sq.label);
      xs.push_back(r.speaker_embeddings);
      ys.push_back(std::move(y));
    }
  };
  run(s.train_batches, c.train_x, c.train_y);
  run(s.val_batches, c.val_x, c.val_y);
  return c;
}

inline Var speaker_decoder(Tape& tape, const ParamSet& params, const Tensor& x, bool trainable) {
  return mlp_decoder(tape.constant(x), tape.parameter(params, "speaker.w1", trainable),
                     tape.parameter(params, "speaker.b1", trainable), tape.parameter(params, "speaker.w2", trainable),
                     tape.parameter(params, "speaker.b2", trainable));
}

inline Confusion validate_speaker(const TemporalGraphNetwork& net, std::span<const PreparedSession> sessions) {
  std::vector<Confusion> per(sessions.size());
  parallel_for(sessions.size(), thread_cap(), [&](std::size_t k) {
    const auto& s = sessions[k];
    SessionState state = net.new_state(s.spec);
    for (const auto& b : s.train_batches) net.process_batch(state, batch_events(s, b), {}, {});
    for (const auto& b : s.val_batches) {
      const auto q = speaker_queries(s, b);
      const auto r = net.process_batch(state, batch_events(s, b), {}, q);
      for (std::size_t i = 0; i < q.size(); ++i) per[k].add(predict_positive(r.speaker_logits[i]), q[i].label > 0.5);
    }
  });
  Confusion total;
  for (const auto& c : per) total += c;
  return total;
}

/// Phase 2. With freeze_encoder the encoder and link decoder are untouched and
/// only speaker.* is trained on cached embeddings; otherwise everything but
/// the link decoder is trained by full replay.
inline TrainResult train_phase2(TemporalGraphNetwork& net, std::span<const PreparedSession> sessions,
                                const TrainConfig& cfg) {
  validate(cfg);
  detail::require_sessions(sessions);
  TrainResult result;
  result.params = net.params();
  const AdamConfig adam = adam_config(cfg);
  detail::EarlyStopper stopper{cfg.patience};

  std::vector<SpeakerCache> caches;
  if (cfg.freeze_encoder && cfg.max_epochs > 0) {
    caches.resize(sessions.size());
    parallel_for(sessions.size(), thread_cap(), [&](std::size_t k) { caches[k] = cache_speaker_inputs(net, sessions[k]); });
  }
  ParamSet grads = net.params().zeros_like([&](std::string_view n) {
    return cfg.freeze_encoder ? is_speaker_decoder(n) : !is_link_decoder(n);
  });
  AdamState opt = make_adam_state(grads);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t batches = 0;
    Confusion val;
    if (cfg.freeze_encoder) {
      for (const auto& c : caches) {
        for (std::size_t b = 0; b < c.train_x.size(); ++b) {
          Tape tape;
          Var loss = bce_with_logits(speaker_decoder(tape, net.params(), c.train_x[b], true), c.train_y[b]);
          grads.set_zero();
          tape.backward(loss, grads);
          adam_step(net.params(), grads, opt, adam);
          loss_sum += loss.value().item();
          ++batches;
        }
      }
      for (const auto& c : caches) {
        for (std::size_t b = 0; b < c.val_x.size(); ++b) {
          Tape tape;
          const Tensor logits = speaker_decoder(tape, net.params(), c.val_x[b], false).value();
          for (std::size_t i = 0; i < logits.size(); ++i) val.add(predict_positive(logits[i]), c.val_y[b][i] > 0.5);
        }
      }
    } else {
      for (const auto& s : sessions) {
        SessionState state = net.new_state(s.spec);
        for (const auto& b : s.train_batches) {
          const auto q = speaker_queries(s, b);
          if (q.empty()) {
            net.process_batch(state, batch_events(s, b), {}, {});
            continue;
          }
          grads.set_zero();
          const auto r = net.process_batch(state, batch_events(s, b), {}, q, Objective::kSpeaker, &grads);
          adam_step(net.params(), grads, opt, adam);
          loss_sum += r.loss;
          ++batches;
        }
      }
      val = validate_speaker(net, sessions);
    }
    EpochLog e{2, epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, f1(val),
               val.total() ? accuracy(val) : 0.0, seconds_since(start)};
    result.log.push_back(e);
    if (stopper.improved(e.val_f1)) {
      result.params = net.params();
      result.best_epoch = epoch;
      result.best_val_f1 = e.val_f1;
    }
    if (stopper.stop()) break;
  }
  net.params() = result.params;
  return result;
}

}  // namespace tgn_social
