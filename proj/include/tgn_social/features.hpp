#pragma once

// The 14-element one-hot edge message and the cosine time encoding.
//
// Message layout:
//   [0..2]   speaking: src, dst, any other subject
//   [3..5]   seat of dst relative to src: opposite, nearby, away
//   [6..9]   role of src:  student, musician, teacher, music teacher
//   [10..13] role of dst:  same order; unknown role and the empty node are all zeros

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <vector>

#include "tgn_social/errors.hpp"
#include "tgn_social/session.hpp"

namespace tgn_social {

inline constexpr std::size_t kMessageSize = 14;

using MessageVector = std::array<double, kMessageSize>;

enum class SeatRelation { kOpposite, kNearby, kAway };

/// Ring distance d between seats on a circle of n: nearby iff d == 1,
/// opposite iff n is even and d == n / 2, away otherwise.
inline SeatRelation seat_relation(const SessionSpec& spec, NodeId src, NodeId dst) {
  const Subject* a = spec.find(src);
  const Subject* b = spec.find(dst);
  if (!a) throw ValidationError("src", "unknown subject " + std::to_string(src));
  if (!b) throw ValidationError("dst", "unknown subject " + std::to_string(dst));
  if (src == dst) throw ValidationError("dst", "seat relation of a subject to itself");
  const int n = static_cast<int>(spec.subjects.size());
  const int diff = std::abs(a->seat_index - b->seat_index);
  const int d = std::min(diff, n - diff);
  if (d == 1) return SeatRelation::kNearby;
  if (n % 2 == 0 && d == n / 2) return SeatRelation::kOpposite;
  return SeatRelation::kAway;
}

/// [src speaking, dst speaking, some other subject speaking]. With the empty
/// node as dst, the dst bit is 0.
inline std::array<double, 3> encode_speaking(NodeId src, NodeId dst, std::span<const NodeId> speaking) {
  std::array<double, 3> out{0.0, 0.0, 0.0};
  for (NodeId s : speaking) {
    if (s == src) {
      out[0] = 1.0;
    } else if (s == dst && dst != kEmptyNode) {
      out[1] = 1.0;
    } else if (s != kEmptyNode) {
      out[2] = 1.0;
    }
  }
  return out;
}

inline std::array<double, 4> encode_role(Role r) {
  std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
  switch (r) {
    case Role::kStudent: out[0] = 1.0; break;
    case Role::kMusician: out[1] = 1.0; break;
    case Role::kTeacher: out[2] = 1.0; break;
    case Role::kMusicTeacher: out[3] = 1.0; break;
    case Role::kUnknown: break;
  }
  return out;
}

inline std::array<double, 8> encode_roles(Role src, Role dst) {
  std::array<double, 8> out{};
  const auto a = encode_role(src);
  const auto b = encode_role(dst);
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + 4);
  return out;
}

inline MessageVector encode_message(const InteractionEvent& e, const SessionSpec& spec) {
  const Subject* src = spec.find(e.src);
  if (!src) throw ValidationError("src", "unknown subject " + std::to_string(e.src));
  MessageVector m{};
  const auto speak = encode_speaking(e.src, e.dst, e.speaking);
  std::copy(speak.begin(), speak.end(), m.begin());

  Role dst_role = Role::kUnknown;
  if (e.dst == kEmptyNode) {
    m[5] = 1.0;
  } else {
    switch (seat_relation(spec, e.src, e.dst)) {
      case SeatRelation::kOpposite: m[3] = 1.0; break;
      case SeatRelation::kNearby: m[4] = 1.0; break;
      case SeatRelation::kAway: m[5] = 1.0; break;
    }
    dst_role = spec.find(e.dst)->role;
  }
  const auto roles = encode_roles(src->role, dst_role);
  std::copy(roles.begin(), roles.end(), m.begin() + 6);
  return m;
}

/// Per-event feature rows, aligned with the stream's event order.
inline std::vector<std::vector<double>> encode_stream(const Session& s) {
  std::vector<std::vector<double>> rows;
  rows.reserve(s.stream.events.size());
  for (const auto& e : s.stream.events) {
    const MessageVector m = encode_message(e, s.spec);
    rows.emplace_back(m.begin(), m.end());
  }
  return rows;
}

struct TimeEncoderParams {
  std::vector<double> w;
  std::vector<double> b;
};

/// cos(dt * w_k + b_k) for each k.
inline std::vector<double> time_encode(double delta_t, const TimeEncoderParams& p) {
  if (!(delta_t >= 0.0)) throw std::invalid_argument("time_encode: delta_t must be non-negative");
  if (p.w.size() != p.b.size()) throw std::invalid_argument("time_encode: w and b differ in length");
  std::vector<double> out(p.w.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::cos(delta_t * p.w[k] + p.b[k]);
  return out;
}

}  // namespace tgn_social
