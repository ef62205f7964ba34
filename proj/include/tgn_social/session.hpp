#pragma once

// Sessions, subjects and the 1 Hz interaction event stream, with their JSON
// and JSONL file formats.
//
// Session spec (JSON):
//   {"session_id": str, "session_type": str,
//    "facilitator_type": "none|musician|music_teacher|teacher",
//    "subjects": [{"node_id": int, "role": "student|musician|teacher|music_teacher|unknown",
//                  "seat_index": int}]}
//
// Event log (JSONL, one event per line):
//   {"t": float, "src": int, "dst": int, "speaking": [int, ...]}
// dst == 0 is the empty node: the subject is gazing at no one.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tgn_social/errors.hpp"

namespace tgn_social {

using NodeId = int;
inline constexpr NodeId kEmptyNode = 0;

enum class Role { kStudent, kMusician, kTeacher, kMusicTeacher, kUnknown };
enum class FacilitatorType { kNone, kMusician, kMusicTeacher, kTeacher };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::kStudent: return "student";
    case Role::kMusician: return "musician";
    case Role::kTeacher: return "teacher";
    case Role::kMusicTeacher: return "music_teacher";
    case Role::kUnknown: return "unknown";
  }
  return "unknown";
}

inline Role role_from_string(std::string_view s) {
  if (s == "student") return Role::kStudent;
  if (s == "musician") return Role::kMusician;
  if (s == "teacher") return Role::kTeacher;
  if (s == "music_teacher") return Role::kMusicTeacher;
  if (s == "unknown") return Role::kUnknown;
  throw ValidationError("role", "unknown role '" + std::string(s) + "'");
}

inline std::string_view to_string(FacilitatorType f) {
  switch (f) {
    case FacilitatorType::kNone: return "none";
    case FacilitatorType::kMusician: return "musician";
    case FacilitatorType::kMusicTeacher: return "music_teacher";
    case FacilitatorType::kTeacher: return "teacher";
  }
  return "none";
}

inline FacilitatorType facilitator_from_string(std::string_view s) {
  if (s == "none") return FacilitatorType::kNone;
  if (s == "musician") return FacilitatorType::kMusician;
  if (s == "music_teacher") return FacilitatorType::kMusicTeacher;
  if (s == "teacher") return FacilitatorType::kTeacher;
  throw ValidationError("facilitator_type", "unknown facilitator_type '" + std::string(s) + "'");
}

/// Role carried by the facilitator of a session of the given type.
inline Role facilitator_role(FacilitatorType f) {
  switch (f) {
    case FacilitatorType::kMusician: return Role::kMusician;
    case FacilitatorType::kMusicTeacher: return Role::kMusicTeacher;
    case FacilitatorType::kTeacher: return Role::kTeacher;
    case FacilitatorType::kNone: break;
  }
  return Role::kUnknown;
}

struct Subject {
  NodeId node_id = 0;
  Role role = Role::kUnknown;
  int seat_index = 0;

  bool operator==(const Subject&) const = default;
};

struct SessionSpec {
  std::string session_id;
  std::string session_type;
  FacilitatorType facilitator_type = FacilitatorType::kNone;
  std::vector<Subject> subjects;

  const Subject* find(NodeId id) const {
    for (const auto& s : subjects) {
      if (s.node_id == id) return &s;
    }
    return nullptr;
  }

  bool has(NodeId id) const { return find(id) != nullptr; }

  /// Subject ids in ascending order.
  std::vector<NodeId> subject_ids() const {
    std::vector<NodeId> ids;
    for (const auto& s : subjects) ids.push_back(s.node_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool operator==(const SessionSpec&) const = default;
};

inline void validate(const SessionSpec& spec) {
  if (spec.session_id.empty()) throw ValidationError("session_id", "session_id must be non-empty");
  if (spec.subjects.size() < 2) throw ValidationError("subjects", "a session needs at least 2 subjects");
  std::set<NodeId> ids;
  for (const auto& s : spec.subjects) {
    if (s.node_id == kEmptyNode) throw ValidationError("node_id", "node_id 0 reserved for the empty node");
    if (s.node_id < 0) throw ValidationError("node_id", "node_id must be positive, got " + std::to_string(s.node_id));
    if (!ids.insert(s.node_id).second) {
      throw ValidationError("node_id", "duplicate node_id " + std::to_string(s.node_id));
    }
  }
  std::vector<int> seats;
  for (const auto& s : spec.subjects) seats.push_back(s.seat_index);
  std::sort(seats.begin(), seats.end());
  for (std::size_t i = 0; i < seats.size(); ++i) {
    if (seats[i] != static_cast<int>(i)) {
      throw ValidationError("seat_index", "seat_index not a permutation of 0..n-1");
    }
  }
}

inline nlohmann::ordered_json to_json(const SessionSpec& spec) {
  nlohmann::ordered_json j;
  j["session_id"] = spec.session_id;
  j["session_type"] = spec.session_type;
  j["facilitator_type"] = std::string(to_string(spec.facilitator_type));
  j["subjects"] = nlohmann::ordered_json::array();
  for (const auto& s : spec.subjects) {
    nlohmann::ordered_json js;
    js["node_id"] = s.node_id;
    js["role"] = std::string(to_string(s.role));
    js["seat_index"] = s.seat_index;
    j["subjects"].push_back(std::move(js));
  }
  return j;
}

inline SessionSpec session_spec_from_json(const nlohmann::json& j) {
  SessionSpec spec;
  try {
    spec.session_id = j.at("session_id").get<std::string>();
    spec.session_type = j.at("session_type").get<std::string>();
    spec.facilitator_type = facilitator_from_string(j.at("facilitator_type").get<std::string>());
    for (const auto& js : j.at("subjects")) {
      Subject s;
      s.node_id = js.at("node_id").get<NodeId>();
      s.role = role_from_string(js.at("role").get<std::string>());
      s.seat_index = js.at("seat_index").get<int>();
      spec.subjects.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("session spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline SessionSpec load_session_spec(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return session_spec_from_json(j);
}

inline void save_session_spec(const SessionSpec& spec, const std::filesystem::path& path) {
  write_file(path, to_json(spec).dump(2) + "\n");
}

struct InteractionEvent {
  double t = 0.0;
  NodeId src = 0;
  NodeId dst = kEmptyNode;
  std::vector<NodeId> speaking;  // ascending, unique

  bool operator==(const InteractionEvent&) const = default;
};

/// Events of one session sorted by (t, src).
struct EventStream {
  std::string session_id;
  std::vector<InteractionEvent> events;

  bool operator==(const EventStream&) const = default;
};

struct Session {
  SessionSpec spec;
  EventStream stream;
};

/// Checks one event against the session. `line` is reported in errors.
inline void validate_event(const InteractionEvent& e, const SessionSpec& spec, std::size_t line = 0) {
  if (!std::isfinite(e.t) || e.t < 0.0) throw ValidationError("t", "timestamp must be finite and non-negative", line);
  if (!spec.has(e.src)) throw ValidationError("src", "unknown node_id " + std::to_string(e.src), line);
  if (e.dst != kEmptyNode && !spec.has(e.dst)) {
    throw ValidationError("dst", "unknown node_id " + std::to_string(e.dst), line);
  }
  if (e.src == e.dst) throw ValidationError("dst", "src and dst are the same node", line);
  for (NodeId s : e.speaking) {
    if (!spec.has(s)) throw ValidationError("speaking", "unknown node_id " + std::to_string(s), line);
  }
}

/// Sorts by (t, src) and validates every event; rejects two events from the
/// same src at one timestamp.
inline EventStream make_stream(const SessionSpec& spec, std::vector<InteractionEvent> events,
                               std::vector<std::size_t> lines = {}) {
  if (lines.empty()) {
    lines.resize(events.size());
    std::iota(lines.begin(), lines.end(), std::size_t{1});
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto& sp = events[i].speaking;
    std::sort(sp.begin(), sp.end());
    sp.erase(std::unique(sp.begin(), sp.end()), sp.end());
    validate_event(events[i], spec, lines[i]);
  }
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (events[a].t != events[b].t) return events[a].t < events[b].t;
    return events[a].src < events[b].src;
  });
  EventStream out;
  out.session_id = spec.session_id;
  out.events.reserve(events.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = events[order[k]];
    if (k > 0) {
      const auto& prev = out.events.back();
      if (prev.t == e.t && prev.src == e.src) {
        throw ValidationError("src", "second event from node " + std::to_string(e.src) + " at t=" +
                                         std::to_string(e.t), lines[order[k]]);
      }
    }
    out.events.push_back(e);
  }
  return out;
}

inline EventStream parse_event_log(std::istream& in, const SessionSpec& spec) {
  static const std::set<std::string> kKeys = {"t", "src", "dst", "speaking"};
  std::vector<InteractionEvent> events;
  std::vector<std::size_t> lines;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.contains(key)) throw ValidationError(key, "unexpected key '" + key + "'", line_no);
    }
    InteractionEvent e;
    try {
      e.t = j.at("t").get<double>();
      e.src = j.at("src").get<NodeId>();
      e.dst = j.at("dst").get<NodeId>();
      e.speaking = j.at("speaking").get<std::vector<NodeId>>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("line " + std::to_string(line_no) + ": " + ex.what());
    }
    events.push_back(std::move(e));
    lines.push_back(line_no);
  }
  return make_stream(spec, std::move(events), std::move(lines));
}

inline EventStream load_event_log(const std::filesystem::path& path, const SessionSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_event_log(in, spec);
}

inline std::string to_jsonl(const EventStream& stream) {
  std::string out;
  for (const auto& e : stream.events) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["speaking"] = e.speaking;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_event_log(const EventStream& stream, const std::filesystem::path& path) {
  write_file(path, to_jsonl(stream));
}

/// Index of the first event of the held-out tail: the last `fraction` of the
/// events, moved forward to a timestamp boundary so no second is split.
inline std::size_t validation_start(const EventStream& stream, double fraction) {
  const auto& ev = stream.events;
  if (ev.empty()) return 0;
  auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(ev.size()) * (1.0 - fraction)));
  cut = std::min(cut, ev.size());
  while (cut > 0 && cut < ev.size() && ev[cut].t == ev[cut - 1].t) ++cut;
  return cut;
}

struct SplitPlan {
  std::vector<std::string> train;
  std::vector<std::string> test;
  double validation_fraction = 0.15;
};

/// Per session type, the lexicographically first session goes to test and the
/// rest to train.
inline SplitPlan split_sessions(std::span<const SessionSpec> sessions, double validation_fraction = 0.15) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction", "validation fraction must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::string>> by_type;
  std::set<std::string> seen;
  for (const auto& s : sessions) {
    if (!seen.insert(s.session_id).second) {
      throw ValidationError("session_id", "duplicate session_id " + s.session_id);
    }
    by_type[s.session_type].push_back(s.session_id);
  }
  SplitPlan plan;
  plan.validation_fraction = validation_fraction;
  for (auto& [type, ids] : by_type) {
    if (ids.size() < 2) {
      throw ValidationError("session_type", "session type " + type + " has a single session; need at least 2");
    }
    std::sort(ids.begin(), ids.end());
    plan.test.push_back(ids.front());
    plan.train.insert(plan.train.end(), ids.begin() + 1, ids.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

}  // namespace tgn_social
