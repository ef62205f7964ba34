#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grad_check_stream.hpp"
#include "tgn_social/tgn_social.hpp"

namespace tgn_test {

using namespace tgn_social;

/// Subjects 1..roles.size() seated in id order.
inline SessionSpec circle_spec(const std::vector<Role>& roles, std::string id = "T01", std::string type = "X") {
  SessionSpec s;
  s.session_id = std::move(id);
  s.session_type = std::move(type);
  for (std::size_t i = 0; i < roles.size(); ++i) {
    s.subjects.push_back({static_cast<NodeId>(i + 1), roles[i], static_cast<int>(i)});
  }
  return s;
}

inline SessionSpec students(int n, std::string id = "T01") {
  return circle_spec(std::vector<Role>(static_cast<std::size_t>(n), Role::kStudent), std::move(id));
}

inline Session make_session(const SessionSpec& spec, std::vector<InteractionEvent> events) {
  Session s;
  s.spec = spec;
  s.stream = make_stream(spec, std::move(events));
  s.stream.session_id = spec.session_id;
  return s;
}

/// Random valid events: every second, every subject gazes somewhere.
inline Session random_session(int n, int seconds, std::uint64_t seed, std::string id = "R01") {
  Rng rng(seed);
  SessionSpec spec = students(n, std::move(id));
  std::vector<InteractionEvent> ev;
  for (int t = 0; t < seconds; ++t) {
    const NodeId speaker = static_cast<NodeId>(1 + rng.uniform_index(static_cast<std::size_t>(n)));
    for (NodeId src = 1; src <= n; ++src) {
      NodeId dst = static_cast<NodeId>(rng.uniform_index(static_cast<std::size_t>(n + 1)));
      if (dst == src) dst = kEmptyNode;
      ev.push_back({static_cast<double>(t), src, dst, {speaker}});
    }
  }
  return make_session(spec, std::move(ev));
}

/// Two subjects for `seconds` seconds: 1 always gazes at 2; 2 gazes back on
/// even seconds and at no one on odd seconds. Subject 1 speaks throughout.
inline Session overfit_session(int seconds = 200) {
  std::vector<InteractionEvent> ev;
  for (int t = 0; t < seconds; ++t) {
    ev.push_back({static_cast<double>(t), 1, 2, {1}});
    ev.push_back({static_cast<double>(t), 2, t % 2 == 0 ? 1 : kEmptyNode, {1}});
  }
  return make_session(students(2, "O01"), std::move(ev));
}

inline void zero_decoders(ParamSet& p) {
  for (auto& [name, t] : p) {
    if (!is_encoder(name)) t.fill(0.0);
  }
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tgn_social_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tgn_test
