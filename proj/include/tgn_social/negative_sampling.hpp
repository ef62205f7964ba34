#pragma once

// Session-aware negative edges: destinations are drawn only from the
// session's own subjects plus the empty node, and never from the destinations
// the same source actually gazes at, at the same time, in the batch.

#include <algorithm>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "tgn_social/random.hpp"
#include "tgn_social/session.hpp"

namespace tgn_social {

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double t = 0.0;

  bool operator==(const Edge&) const = default;
};

struct NegativeEdge {
  NodeId src = 0;
  NodeId dst = 0;
  double t = 0.0;
  double label = 0.0;
};

struct NegativeSample {
  std::vector<NegativeEdge> negatives;
  std::size_t skipped = 0;  // positives whose candidate set was empty
};

/// Candidates for (src, t): {empty node} U subjects, minus src, minus every d
/// with (src, d, t) among `positives`. Ascending order.
inline std::vector<NodeId> negative_candidates(const Edge& p, std::span<const Edge> positives,
                                               std::span<const NodeId> subjects) {
  std::vector<NodeId> c;
  c.push_back(kEmptyNode);
  c.insert(c.end(), subjects.begin(), subjects.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  std::erase_if(c, [&](NodeId d) {
    if (d == p.src) return true;
    return std::any_of(positives.begin(), positives.end(),
                       [&](const Edge& q) { return q.src == p.src && q.t == p.t && q.dst == d; });
  });
  return c;
}

/// One negative per positive, drawn uniformly from its candidate set.
inline NegativeSample sample_negatives(std::span<const Edge> positives, std::span<const NodeId> subjects, Rng& rng) {
  NegativeSample out;
  out.negatives.reserve(positives.size());
  for (const auto& p : positives) {
    const auto c = negative_candidates(p, positives, subjects);
    if (c.empty()) {
      ++out.skipped;
      continue;
    }
    out.negatives.push_back({p.src, c[rng.uniform_index(c.size())], p.t, 0.0});
  }
  return out;
}

struct NegativeAudit {
  std::size_t collisions = 0;      // negatives equal to a positive at the same (src, dst, t)
  std::size_t out_of_session = 0;  // destinations outside subjects U {empty node}
  std::size_t self_loops = 0;
};

inline NegativeAudit audit_negatives(std::span<const NegativeEdge> negatives, std::span<const Edge> positives,
                                     std::span<const NodeId> subjects = {}) {
  std::set<std::tuple<NodeId, NodeId, double>> pos;
  for (const auto& p : positives) pos.emplace(p.src, p.dst, p.t);
  NegativeAudit a;
  for (const auto& n : negatives) {
    if (pos.contains({n.src, n.dst, n.t})) ++a.collisions;
    if (n.src == n.dst) ++a.self_loops;
    if (!subjects.empty() && n.dst != kEmptyNode &&
        std::find(subjects.begin(), subjects.end(), n.dst) == subjects.end()) {
      ++a.out_of_session;
    }
  }
  return a;
}

}  // namespace tgn_social
