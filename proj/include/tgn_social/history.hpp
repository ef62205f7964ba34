#pragma once

// Non-learned baseline: the most recently observed gaze target or speaking
// status persists.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tgn_social/session.hpp"

namespace tgn_social {

class HistoryModel {
 public:
  HistoryModel() = default;
  explicit HistoryModel(std::span<const NodeId> subjects) : subjects_(subjects.begin(), subjects.end()) {}

  void update(const InteractionEvent& e) {
    if (e.t < last_t_) throw ValidationError("t", "history model fed an out-of-order event");
    last_t_ = e.t;
    last_gaze_[e.src] = e.dst;
    for (NodeId s : subjects_) speaking_[s] = false;
    for (auto& [node, flag] : speaking_) flag = false;
    for (NodeId s : e.speaking) speaking_[s] = true;
  }

  std::optional<NodeId> last_gaze(NodeId src) const {
    auto it = last_gaze_.find(src);
    if (it == last_gaze_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<bool> last_speaking(NodeId node) const {
    auto it = speaking_.find(node);
    if (it == speaking_.end()) return std::nullopt;
    return it->second;
  }

  /// Positive iff src was last seen gazing at dst. Unseen sources are negative.
  bool predict_gaze(NodeId src, NodeId dst) const {
    const auto g = last_gaze(src);
    return g.has_value() && *g == dst;
  }

  /// Unseen subjects are predicted silent.
  bool predict_speaking(NodeId node) const { return last_speaking(node).value_or(false); }

 private:
  std::vector<NodeId> subjects_;
  double last_t_ = 0.0;
  std::map<NodeId, NodeId> last_gaze_;
  std::map<NodeId, bool> speaking_;
};

}  // namespace tgn_social
