#pragma once

#include <cstdint>
#include <vector>

#include "tgn_social/random.hpp"
#include "tgn_social/tgn.hpp"

namespace tgn_test {

using namespace tgn_social;

/// Every parameter redrawn from U(-scale, scale).
inline void randomize(ParamSet& p, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto& [_, t] : p) {
    for (Real& v : t.data()) v = rng.uniform(-scale, scale);
  }
}

/// Full-model gradient check on a 2-subject stream of three events: the first
/// two are replayed (leaving pending messages and neighbours), the third is the
/// queried batch for both decoders. scale 0 keeps the model's own init.
inline GradCheckReport full_model_grad_check(const ModelConfig& cfg, std::uint64_t seed, double scale, double eps) {
  auto net = TemporalGraphNetwork::initialize(cfg, seed);
  if (scale > 0.0) randomize(net.params(), seed + 1, scale);
  SessionSpec spec;
  spec.session_id = "G01";
  spec.session_type = "X";
  spec.subjects = {{1, Role::kStudent, 0}, {2, Role::kStudent, 1}};
  Rng rng(seed + 2);
  auto event = [&](double t) {
    EncodedEvent e{t, rng.bernoulli(0.5) ? 1 : 2, 0, std::vector<double>(static_cast<std::size_t>(cfg.d_feat))};
    e.dst = 3 - e.src;
    for (double& v : e.feat) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return e;
  };
  // Two history events commit to memory; the third is the scored batch.
  SessionState state = net.new_state(spec);
  for (double t : {0.0, 1.0}) {
    const std::vector<EncodedEvent> history{event(t)};
    net.process_batch(state, history, {}, {});
  }
  const EncodedEvent last = event(2.0);
  const std::vector<LinkQuery> lq{{last.src, last.dst, 2.0, 1.0}, {last.src, kEmptyNode, 2.0, 0.0}};
  const std::vector<SpeakerQuery> sq{{1, 2.0, rng.bernoulli(0.5) ? 1.0 : 0.0}, {2, 2.0, rng.bernoulli(0.5) ? 1.0 : 0.0}};
  return grad_check(
      [&](Tape& tape, const ParamSet& p) { return net.batch_loss(tape, p, state, lq, sq, &p); }, net.params(), eps);
}

}  // namespace tgn_test
