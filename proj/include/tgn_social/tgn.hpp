#pragma once

// Temporal graph network over one session's gaze events.
//
// Per node: a memory vector evolved by a GRU from aggregated raw messages, a
// last-update time, and a capped list of recent interactions. A batch is
// scored against the state as it was before the batch; only then are the
// batch's positive (non-empty dst) events folded into the state.
//
// Memory updates are applied lazily: a committed batch leaves its raw
// messages pending, and the next forward pass recomputes the GRU step for
// those nodes on its own tape. The values equal those of an eager update, and
// the GRU and time encoder receive gradients from the next batch's loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tgn_social/autograd.hpp"
#include "tgn_social/errors.hpp"
#include "tgn_social/features.hpp"
#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"
#include "tgn_social/tensor.hpp"

namespace tgn_social {

enum class EmbeddingMode { kIdentity, kTime, kSum, kAttention };
enum class Aggregator { kMean, kLast };

inline std::string_view to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::kIdentity: return "id";
    case EmbeddingMode::kTime: return "time";
    case EmbeddingMode::kSum: return "sum";
    case EmbeddingMode::kAttention: return "attn";
  }
  return "attn";
}

inline EmbeddingMode embedding_from_string(std::string_view s) {
  if (s == "id") return EmbeddingMode::kIdentity;
  if (s == "time") return EmbeddingMode::kTime;
  if (s == "sum") return EmbeddingMode::kSum;
  if (s == "attn") return EmbeddingMode::kAttention;
  throw ConfigError("unknown embedding mode '" + std::string(s) + "' (id|time|sum|attn)");
}

inline std::string_view to_string(Aggregator a) { return a == Aggregator::kMean ? "mean" : "last"; }

inline Aggregator aggregator_from_string(std::string_view s) {
  if (s == "mean") return Aggregator::kMean;
  if (s == "last") return Aggregator::kLast;
  throw ConfigError("unknown aggregator '" + std::string(s) + "' (mean|last)");
}

struct ModelConfig {
  int d_memory = 32;
  int d_time = 32;
  int d_embed = 32;
  int d_feat = static_cast<int>(kMessageSize);
  int heads = 2;
  int head_dim = 16;
  int neighbor_cap = 10;
  int decoder_hidden = 32;
  int layers = 1;
  bool use_memory = true;
  EmbeddingMode embedding = EmbeddingMode::kAttention;
  Aggregator aggregator = Aggregator::kMean;

  int d_message() const { return 2 * d_memory + d_time + d_feat; }

  bool operator==(const ModelConfig&) const = default;
};

inline void validate(const ModelConfig& c) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(c.d_memory, "d_memory");
  positive(c.d_time, "d_time");
  positive(c.d_embed, "d_embed");
  positive(c.d_feat, "d_feat");
  positive(c.heads, "heads");
  positive(c.head_dim, "head_dim");
  positive(c.neighbor_cap, "neighbor_cap");
  positive(c.decoder_hidden, "decoder_hidden");
  if (c.d_embed != c.d_memory) throw ConfigError("model.d_embed must equal model.d_memory");
  if (c.layers != 1 && c.layers != 2) throw ConfigError("model.layers must be 1 or 2");
}

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d_memory"] = c.d_memory;
  j["d_time"] = c.d_time;
  j["d_embed"] = c.d_embed;
  j["d_feat"] = c.d_feat;
  j["heads"] = c.heads;
  j["head_dim"] = c.head_dim;
  j["neighbor_cap"] = c.neighbor_cap;
  j["decoder_hidden"] = c.decoder_hidden;
  j["layers"] = c.layers;
  j["use_memory"] = c.use_memory;
  j["embedding"] = std::string(to_string(c.embedding));
  j["aggregator"] = std::string(to_string(c.aggregator));
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_memory = j.at("d_memory").get<int>();
    c.d_time = j.at("d_time").get<int>();
    c.d_embed = j.at("d_embed").get<int>();
    c.d_feat = j.at("d_feat").get<int>();
    c.heads = j.at("heads").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.neighbor_cap = j.at("neighbor_cap").get<int>();
    c.decoder_hidden = j.at("decoder_hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.use_memory = j.at("use_memory").get<bool>();
    c.embedding = embedding_from_string(j.at("embedding").get<std::string>());
    c.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  validate(c);
  return c;
}

/// Decoder parameters are prefixed "link." and "speaker."; everything else
/// belongs to the encoder.
inline bool is_link_decoder(std::string_view name) { return name.starts_with("link."); }
inline bool is_speaker_decoder(std::string_view name) { return name.starts_with("speaker."); }
inline bool is_encoder(std::string_view name) { return !is_link_decoder(name) && !is_speaker_decoder(name); }

inline std::string attn_prefix(int layer) { return "attn" + std::to_string(layer) + "."; }

/// Xavier-uniform weights and zero biases. The time encoder starts from
/// geometrically spaced frequencies w_k = 10^(-9k/(d-1)), b = 0.
inline ParamSet init_params(const ModelConfig& c, Rng& rng) {
  validate(c);
  const auto ds = static_cast<std::size_t>(c.d_memory);
  const auto dt = static_cast<std::size_t>(c.d_time);
  const auto dz = static_cast<std::size_t>(c.d_embed);
  const auto df = static_cast<std::size_t>(c.d_feat);
  const auto dm = static_cast<std::size_t>(c.d_message());
  const auto hd = static_cast<std::size_t>(c.head_dim);
  const auto hid = static_cast<std::size_t>(c.decoder_hidden);

  ParamSet p;
  Tensor w(1, dt);
  for (std::size_t k = 0; k < dt; ++k) {
    const double frac = dt > 1 ? static_cast<double>(k) / static_cast<double>(dt - 1) : 0.0;
    w[k] = std::pow(10.0, -9.0 * frac);
  }
  p.add("time.w", std::move(w));
  p.add("time.b", Tensor(1, dt));

  for (const char* gate : {"z", "r", "h"}) {
    p.add(std::string("gru.w_") + gate, xavier_uniform(dm, ds, rng));
    p.add(std::string("gru.u_") + gate, xavier_uniform(ds, ds, rng));
    p.add(std::string("gru.b_") + gate, Tensor(1, ds));
  }

  p.add("time_proj.w", xavier_uniform(dt, ds, rng));
  p.add("time_proj.b", Tensor(1, ds));
  p.add("sum.w", xavier_uniform(ds + df, dz, rng));

  for (int layer = 1; layer <= c.layers; ++layer) {
    const std::string pre = attn_prefix(layer);
    const std::size_t din = layer == 1 ? ds : dz;
    for (int h = 0; h < c.heads; ++h) {
      const std::string hp = pre + "head" + std::to_string(h) + ".";
      p.add(hp + "w_q", xavier_uniform(din + dt, hd, rng));
      p.add(hp + "w_k", xavier_uniform(din + dt + df, hd, rng));
      p.add(hp + "w_v", xavier_uniform(din + dt + df, hd, rng));
    }
    p.add(pre + "out.w", xavier_uniform(static_cast<std::size_t>(c.heads) * hd + din, dz, rng));
    p.add(pre + "out.b", Tensor(1, dz));
  }

  p.add("link.w1", xavier_uniform(2 * dz, hid, rng));
  p.add("link.b1", Tensor(1, hid));
  p.add("link.w2", xavier_uniform(hid, 1, rng));
  p.add("link.b2", Tensor(1, 1));
  p.add("speaker.w1", xavier_uniform(dz, hid, rng));
  p.add("speaker.b1", Tensor(1, hid));
  p.add("speaker.w2", xavier_uniform(hid, 1, rng));
  p.add("speaker.b2", Tensor(1, 1));
  return p;
}

/// One event with its edge feature vector (14 one-hot entries, or any
/// externally supplied fixed-size vector).
struct EncodedEvent {
  double t = 0.0;
  NodeId src = 0;
  NodeId dst = kEmptyNode;
  std::vector<double> feat;
};

struct LinkQuery {
  NodeId src = 0;
  NodeId dst = 0;
  double t = 0.0;
  double label = 0.0;

  bool operator==(const LinkQuery&) const = default;
};

struct SpeakerQuery {
  NodeId node = 0;
  double t = 0.0;
  double label = 0.0;

  bool operator==(const SpeakerQuery&) const = default;
};

struct NeighborEntry {
  NodeId neighbor = 0;
  double t = 0.0;
  std::vector<double> feat;
};

struct RawMessage {
  std::size_t slot = 0;
  double t = 0.0;
  std::size_t order = 0;  // position of the source event within its batch
  std::vector<double> self_memory;
  std::vector<double> other_memory;
  double delta_t = 0.0;
  std::vector<double> feat;
};

/// Per-session model state, indexed by slot. Slot 0 is the empty node.
struct SessionState {
  std::vector<NodeId> nodes;
  std::vector<std::vector<double>> memory;
  std::vector<double> last_update;
  std::vector<std::deque<NeighborEntry>> neighbors;
  std::vector<RawMessage> pending;

  std::size_t slot(NodeId id) const {
    if (id == kEmptyNode) return 0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (nodes[i] == id) return i;
    }
    throw ValidationError("node_id", "node " + std::to_string(id) + " is not part of this session");
  }
};

enum class Objective { kNone, kLink, kSpeaker, kBoth };

struct BatchResult {
  std::vector<double> link_logits;
  std::vector<double> speaker_logits;
  Tensor speaker_embeddings;  // one row per speaker query
  double loss = 0.0;
};

/// One-hidden-layer decoder: relu(x W1 + b1) W2 + b2, one logit per row of x.
inline Var mlp_decoder(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
  return add(matmul(relu(add(matmul(x, w1), b1)), w2), b2);
}

namespace detail {

// Builds one batch's computation on a tape.
class BatchGraph {
 public:
  BatchGraph(Tape& tape, const ModelConfig& cfg, const ParamSet& params, const SessionState& state,
             const ParamSet* grad_targets)
      : tape_(tape), cfg_(cfg), params_(params), state_(state), grad_targets_(grad_targets) {
    zeros_memory_ = tape_.constant(Tensor(1, static_cast<std::size_t>(cfg_.d_memory)));
    zeros_embed_ = tape_.constant(Tensor(1, static_cast<std::size_t>(cfg_.d_embed)));
    update_pending_memory();
  }

  Var param(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const bool trainable = grad_targets_ && grad_targets_->contains(name);
    Var v = tape_.parameter(params_, name, trainable);
    bound_.emplace(name, v);
    return v;
  }

  /// cos(dt * w + b) for a column of elapsed times: m x d_time.
  Var time_features(std::span<const double> dts) {
    Tensor col(dts.size(), 1);
    for (std::size_t i = 0; i < dts.size(); ++i) {
      if (!(dts[i] >= 0.0)) throw ValidationError("t", "negative elapsed time in time encoding");
      col[i] = dts[i];
    }
    return cos(add(matmul(tape_.constant(std::move(col)), param("time.w")), param("time.b")));
  }

  Var memory(std::size_t slot) {
    if (slot == 0 || !cfg_.use_memory) return zeros_memory_;
    if (auto it = memory_.find(slot); it != memory_.end()) return it->second;
    Var v = tape_.constant(Tensor::row(state_.memory[slot]));
    memory_.emplace(slot, v);
    return v;
  }

  const std::vector<std::pair<std::size_t, Var>>& updated_memory() const { return updated_; }

  Var embed(std::size_t slot, double t, int layer) {
    if (slot == 0) return zeros_embed_;
    const auto key = std::make_tuple(slot, t, layer);
    if (auto it = embed_cache_.find(key); it != embed_cache_.end()) return it->second;
    Var z = compute_embedding(slot, t, layer);
    embed_cache_.emplace(key, z);
    return z;
  }

  Var embed(std::size_t slot, double t) { return embed(slot, t, cfg_.layers); }

  Var link_logits(std::span<const LinkQuery> queries) {
    std::vector<Var> rows;
    rows.reserve(queries.size());
    for (const auto& q : queries) {
      rows.push_back(concat({embed(state_.slot(q.src), q.t), embed(state_.slot(q.dst), q.t)}));
    }
    return mlp_decoder(stack_rows(rows), param("link.w1"), param("link.b1"), param("link.w2"), param("link.b2"));
  }

  Var speaker_logits(std::span<const SpeakerQuery> queries) {
    std::vector<Var> rows;
    rows.reserve(queries.size());
    for (const auto& q : queries) {
      if (q.node == kEmptyNode) throw ValidationError("node", "speaker query on the empty node");
      rows.push_back(embed(state_.slot(q.node), q.t));
    }
    last_speaker_inputs = stack_rows(rows);
    return mlp_decoder(last_speaker_inputs, param("speaker.w1"), param("speaker.b1"), param("speaker.w2"),
                       param("speaker.b2"));
  }

  Var last_speaker_inputs;

  /// Attention weights recorded during the last attention computation, per head.
  std::vector<std::vector<double>> last_attention;

 private:
  void update_pending_memory() {
    if (!cfg_.use_memory || state_.pending.empty()) return;
    std::map<std::size_t, std::vector<const RawMessage*>> by_slot;
    for (const auto& m : state_.pending) by_slot[m.slot].push_back(&m);
    const auto ds = static_cast<std::size_t>(cfg_.d_memory);
    const auto df = static_cast<std::size_t>(cfg_.d_feat);
    for (auto& [slot, msgs] : by_slot) {
      if (cfg_.aggregator == Aggregator::kLast) {
        const RawMessage* best = msgs.front();
        for (const RawMessage* m : msgs) {
          if (m->t > best->t || (m->t == best->t && m->order > best->order)) best = m;
        }
        msgs = {best};
      }
      const std::size_t n = msgs.size();
      Tensor self(n, ds), other(n, ds), feat(n, df);
      std::vector<double> dts(n);
      for (std::size_t i = 0; i < n; ++i) {
        const RawMessage& m = *msgs[i];
        if (m.self_memory.size() != ds || m.other_memory.size() != ds || m.feat.size() != df) {
          throw InvariantError("raw message has inconsistent dimensions");
        }
        std::copy(m.self_memory.begin(), m.self_memory.end(), self.data().begin() + static_cast<std::ptrdiff_t>(i * ds));
        std::copy(m.other_memory.begin(), m.other_memory.end(), other.data().begin() + static_cast<std::ptrdiff_t>(i * ds));
        std::copy(m.feat.begin(), m.feat.end(), feat.data().begin() + static_cast<std::ptrdiff_t>(i * df));
        dts[i] = m.delta_t;
      }
      Var msg = concat({tape_.constant(std::move(self)), tape_.constant(std::move(other)), time_features(dts),
                        tape_.constant(std::move(feat))});
      if (n > 1) msg = mean_rows(msg);
      Var s = tape_.constant(Tensor::row(state_.memory[slot]));
      Var updated = gru(s, msg);
      memory_.emplace(slot, updated);
      updated_.emplace_back(slot, updated);
    }
  }

  Var gru(const Var& s, const Var& m) {
    auto gate = [&](const char* g, const Var& hidden) {
      return add(add(matmul(m, param(std::string("gru.w_") + g)), matmul(hidden, param(std::string("gru.u_") + g))),
                 param(std::string("gru.b_") + g));
    };
    Var z = sigmoid(gate("z", s));
    Var r = sigmoid(gate("r", s));
    Var h = tanh(gate("h", mul(r, s)));
    Var ones = tape_.constant(Tensor(1, static_cast<std::size_t>(cfg_.d_memory), 1.0));
    return add(mul(sub(ones, z), s), mul(z, h));
  }

  Var compute_embedding(std::size_t slot, double t, int layer) {
    const auto& nbrs = state_.neighbors[slot];
    switch (cfg_.embedding) {
      case EmbeddingMode::kIdentity:
        return memory(slot);
      case EmbeddingMode::kTime: {
        const double dt = t - state_.last_update[slot];
        if (dt < 0.0) throw ValidationError("t", "query precedes the node's last update");
        Var proj = add(matmul(time_features(std::span<const double>(&dt, 1)), param("time_proj.w")),
                       param("time_proj.b"));
        Var ones = tape_.constant(Tensor(1, static_cast<std::size_t>(cfg_.d_memory), 1.0));
        return mul(memory(slot), add(ones, proj));
      }
      case EmbeddingMode::kSum: {
        if (nbrs.empty()) return memory(slot);
        std::vector<Var> rows;
        for (const auto& nb : nbrs) {
          rows.push_back(concat({memory(state_.slot(nb.neighbor)), tape_.constant(Tensor::row(nb.feat))}));
        }
        Var agg = mean_rows(matmul(stack_rows(rows), param("sum.w")));
        return add(memory(slot), scale(agg, static_cast<double>(nbrs.size())));
      }
      case EmbeddingMode::kAttention:
        return attention(slot, t, layer);
    }
    throw InvariantError("unhandled embedding mode");
  }

  Var attention(std::size_t slot, double t, int layer) {
    const auto& nbrs = state_.neighbors[slot];
    auto below = [&](std::size_t s) { return layer == 1 ? memory(s) : embed(s, t, layer - 1); };
    if (nbrs.empty()) return below(slot);

    const std::string pre = attn_prefix(layer);
    const double zero = 0.0;
    Var q_in = concat({below(slot), time_features(std::span<const double>(&zero, 1))});

    std::vector<Var> hidden;
    std::vector<double> dts;
    Tensor feat(nbrs.size(), static_cast<std::size_t>(cfg_.d_feat));
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      hidden.push_back(below(state_.slot(nbrs[j].neighbor)));
      const double dt = t - nbrs[j].t;
      if (dt < 0.0) throw ValidationError("t", "query precedes a stored interaction");
      dts.push_back(dt);
      std::copy(nbrs[j].feat.begin(), nbrs[j].feat.end(),
                feat.data().begin() + static_cast<std::ptrdiff_t>(j * feat.cols()));
    }
    Var kv_in = concat({stack_rows(hidden), time_features(dts), tape_.constant(std::move(feat))});

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim));
    std::vector<Var> parts;
    last_attention.clear();
    for (int h = 0; h < cfg_.heads; ++h) {
      const std::string hp = pre + "head" + std::to_string(h) + ".";
      Var q = matmul(q_in, param(hp + "w_q"));
      Var k = matmul(kv_in, param(hp + "w_k"));
      Var v = matmul(kv_in, param(hp + "w_v"));
      Var weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt));
      last_attention.emplace_back(weights.value().doubles());
      parts.push_back(matmul(weights, v));
    }
    parts.push_back(below(slot));
    return add(matmul(concat(parts), param(pre + "out.w")), param(pre + "out.b"));
  }

  Tape& tape_;
  const ModelConfig& cfg_;
  const ParamSet& params_;
  const SessionState& state_;
  const ParamSet* grad_targets_;
  Var zeros_memory_;
  Var zeros_embed_;
  std::unordered_map<std::string, Var> bound_;
  std::map<std::size_t, Var> memory_;
  std::vector<std::pair<std::size_t, Var>> updated_;
  std::map<std::tuple<std::size_t, double, int>, Var> embed_cache_;
};

}  // namespace detail

class TemporalGraphNetwork {
 public:
  TemporalGraphNetwork(ModelConfig config, ParamSet params) : config_(config), params_(std::move(params)) {
    validate(config_);
  }

  static TemporalGraphNetwork initialize(const ModelConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    return TemporalGraphNetwork(config, init_params(config, rng));
  }

  const ModelConfig& config() const { return config_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }

  SessionState new_state(const SessionSpec& spec) const {
    SessionState s;
    s.nodes.push_back(kEmptyNode);
    for (NodeId id : spec.subject_ids()) s.nodes.push_back(id);
    const std::size_t n = s.nodes.size();
    s.memory.assign(n, std::vector<double>(static_cast<std::size_t>(config_.d_memory), 0.0));
    s.last_update.assign(n, 0.0);
    s.neighbors.assign(n, {});
    return s;
  }

  /// Scores the queries against `state` (as of before the batch), optionally
  /// accumulates gradients of the chosen objective into `grads`, then folds the
  /// batch's positive events into `state`.
  BatchResult process_batch(SessionState& state, std::span<const EncodedEvent> events,
                            std::span<const LinkQuery> link_queries, std::span<const SpeakerQuery> speaker_queries,
                            Objective objective = Objective::kNone, ParamSet* grads = nullptr) const {
    check_batch(state, events);
    Tape tape;
    detail::BatchGraph graph(tape, config_, params_, state, grads);
    BatchResult result;
    std::optional<Var> link_loss, speaker_loss;
    if (!link_queries.empty()) {
      Var logits = graph.link_logits(link_queries);
      result.link_logits = logits.value().doubles();
      if (objective == Objective::kLink || objective == Objective::kBoth) {
        link_loss = bce_with_logits(logits, labels_of(link_queries));
      }
    }
    if (!speaker_queries.empty()) {
      Var logits = graph.speaker_logits(speaker_queries);
      result.speaker_logits = logits.value().doubles();
      result.speaker_embeddings = graph.last_speaker_inputs.value();
      if (objective == Objective::kSpeaker || objective == Objective::kBoth) {
        speaker_loss = bce_with_logits(logits, labels_of(speaker_queries));
      }
    }
    std::optional<Var> loss;
    if (link_loss && speaker_loss) {
      loss = add(*link_loss, *speaker_loss);
    } else if (link_loss) {
      loss = link_loss;
    } else if (speaker_loss) {
      loss = speaker_loss;
    }
    if (loss) {
      result.loss = loss->value().item();
      if (grads) tape.backward(*loss, *grads);
    }
    commit(state, events, graph.updated_memory());
    return result;
  }

  /// The batch objective as a differentiable function of `params`, with the
  /// state held fixed. Used for gradient verification.
  Var batch_loss(Tape& tape, const ParamSet& params, const SessionState& state, std::span<const LinkQuery> link_queries,
                 std::span<const SpeakerQuery> speaker_queries, const ParamSet* grad_targets) const {
    detail::BatchGraph graph(tape, config_, params, state, grad_targets);
    std::optional<Var> loss;
    if (!link_queries.empty()) loss = bce_with_logits(graph.link_logits(link_queries), labels_of(link_queries));
    if (!speaker_queries.empty()) {
      Var s = bce_with_logits(graph.speaker_logits(speaker_queries), labels_of(speaker_queries));
      loss = loss ? add(*loss, s) : s;
    }
    if (!loss) return tape.constant(Tensor::scalar(0.0));
    return *loss;
  }

  /// Memory per slot with pending messages applied.
  std::vector<std::vector<double>> current_memory(const SessionState& state) const {
    Tape tape;
    detail::BatchGraph graph(tape, config_, params_, state, nullptr);
    std::vector<std::vector<double>> out(state.nodes.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = graph.memory(i).value().doubles();
    return out;
  }

  std::vector<double> embedding(const SessionState& state, NodeId node, double t) const {
    Tape tape;
    detail::BatchGraph graph(tape, config_, params_, state, nullptr);
    return graph.embed(state.slot(node), t).value().doubles();
  }

  /// Per-head attention weights over the node's stored neighbours (final
  /// layer). Empty when the node has no neighbours or attention is not used.
  std::vector<std::vector<double>> attention_weights(const SessionState& state, NodeId node, double t) const {
    if (config_.embedding != EmbeddingMode::kAttention) return {};
    Tape tape;
    detail::BatchGraph graph(tape, config_, params_, state, nullptr);
    graph.embed(state.slot(node), t);
    if (state.neighbors[state.slot(node)].empty()) return {};
    return graph.last_attention;
  }

 private:
  template <typename Q>
  static std::vector<double> labels_of(std::span<const Q> queries) {
    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(q.label);
    return out;
  }

  void check_batch(const SessionState& state, std::span<const EncodedEvent> events) const {
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      if (i > 0 && e.t < events[i - 1].t) throw ValidationError("t", "batch events are not in time order");
      const std::size_t s = state.slot(e.src);
      const std::size_t d = state.slot(e.dst);
      if (s == d) throw ValidationError("dst", "self-loop event");
      if (e.t < state.last_update[s] || (d != 0 && e.t < state.last_update[d])) {
        throw ValidationError("t", "event at t=" + std::to_string(e.t) + " precedes the last memory update");
      }
      if (e.feat.size() != static_cast<std::size_t>(config_.d_feat)) {
        throw ValidationError("feat", "edge feature has " + std::to_string(e.feat.size()) + " entries, expected " +
                                          std::to_string(config_.d_feat));
      }
    }
  }

  void commit(SessionState& state, std::span<const EncodedEvent> events,
              const std::vector<std::pair<std::size_t, Var>>& updated) const {
    for (const auto& [slot, v] : updated) state.memory[slot] = v.value().doubles();
    state.pending.clear();
    const std::vector<double> before = state.last_update;
    for (std::size_t k = 0; k < events.size(); ++k) {
      const auto& e = events[k];
      if (e.dst == kEmptyNode) continue;
      const std::size_t s = state.slot(e.src);
      const std::size_t d = state.slot(e.dst);
      if (config_.use_memory) {
        state.pending.push_back({s, e.t, k, state.memory[s], state.memory[d], e.t - before[s], e.feat});
        state.pending.push_back({d, e.t, k, state.memory[d], state.memory[s], e.t - before[d], e.feat});
      }
      state.last_update[s] = std::max(state.last_update[s], e.t);
      state.last_update[d] = std::max(state.last_update[d], e.t);
      const auto cap = static_cast<std::size_t>(config_.neighbor_cap);
      for (auto [self, other] : {std::pair{s, e.dst}, std::pair{d, e.src}}) {
        auto& list = state.neighbors[self];
        list.push_front({other, e.t, e.feat});
        if (list.size() > cap) list.pop_back();
      }
    }
  }

  ModelConfig config_;
  ParamSet params_;
};

/// Link logit for a pair of embeddings under the given parameters.
inline double decode_link(std::span<const double> z_src, std::span<const double> z_dst, const ParamSet& params) {
  Tape tape;
  std::vector<double> row(z_src.begin(), z_src.end());
  row.insert(row.end(), z_dst.begin(), z_dst.end());
  Var x = tape.constant(Tensor::row(std::move(row)));
  return mlp_decoder(x, tape.parameter(params, "link.w1", false), tape.parameter(params, "link.b1", false),
                     tape.parameter(params, "link.w2", false), tape.parameter(params, "link.b2", false))
      .value()
      .item();
}

inline double decode_speaker(std::span<const double> z, const ParamSet& params) {
  Tape tape;
  Var x = tape.constant(Tensor::row(std::vector<double>(z.begin(), z.end())));
  return mlp_decoder(x, tape.parameter(params, "speaker.w1", false), tape.parameter(params, "speaker.b1", false),
                     tape.parameter(params, "speaker.w2", false), tape.parameter(params, "speaker.b2", false))
      .value()
      .item();
}

struct Checkpoint {
  ModelConfig config;
  ParamSet params;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json to_json(const Checkpoint& c) {
  nlohmann::ordered_json j;
  j["config"] = to_json(c.config);
  j["meta"] = c.meta;
  j["params"] = to_json(c.params);
  return j;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file(path, to_json(c).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    c.config = model_config_from_json(j.at("config"));
    c.params = param_set_from_json(j.at("params"));
    if (j.contains("meta")) c.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace tgn_social
