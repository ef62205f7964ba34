#include <map>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace tgn_social;

namespace {

GenConfig small(int n, int duration, std::uint64_t seed = 5) {
  GenConfig c;
  c.n_subjects = n;
  c.duration_s = duration;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Generate, OneEventPerSubjectSecond) {
  EXPECT_EQ(generate_session(small(3, 20)).stream.events.size(), 60u);
  EXPECT_EQ(generate_session(small(6, 37)).stream.events.size(), 222u);
}

TEST(Generate, PermanentSpeakerIsAlwaysGazedAt) {
  auto c = small(5, 200);
  c.p_gaze_speaker = 1.0;
  c.p_gaze_empty = 0.0;
  c.speaker_hold = 1e12;
  const auto s = generate_session(c);
  const NodeId speaker = s.stream.events.front().speaking.at(0);
  for (const auto& e : s.stream.events) {
    ASSERT_EQ(e.speaking, std::vector<NodeId>{speaker});
    if (e.src != speaker) EXPECT_EQ(e.dst, speaker);
  }
}

TEST(Generate, SameConfigSameBytes) {
  const auto c = small(4, 120, 99);
  EXPECT_EQ(to_jsonl(generate_session(c).stream), to_jsonl(generate_session(c).stream));
  auto d = c;
  d.seed = 100;
  EXPECT_NE(to_jsonl(generate_session(c).stream), to_jsonl(generate_session(d).stream));
}

TEST(Generate, SingleSpeakerAndValidStream) {
  const auto s = generate_session(small(6, 300, 3));
  for (const auto& e : s.stream.events) EXPECT_EQ(e.speaking.size(), 1u);
  EXPECT_NO_THROW(make_stream(s.spec, s.stream.events));
}

TEST(Generate, GazeAtSpeakerFrequencyNearTarget) {
  auto c = small(5, 600, 11);
  c.p_gaze_speaker = 0.7;
  const auto s = generate_session(c);
  std::size_t listeners = 0;
  std::size_t at_speaker = 0;
  for (const auto& e : s.stream.events) {
    if (e.src == e.speaking.at(0)) continue;
    ++listeners;
    if (e.dst == e.speaking.at(0)) ++at_speaker;
  }
  ASSERT_GE(listeners, 1000u);
  EXPECT_NEAR(static_cast<double>(at_speaker) / static_cast<double>(listeners), 0.7, 0.05);
}

TEST(Generate, FacilitatorSpeaksMore) {
  auto c = small(4, 3000, 21);
  c.facilitator_type = FacilitatorType::kTeacher;
  c.speaker_hold = 5;
  const auto s = generate_session(c);
  std::map<NodeId, int> seconds;
  for (const auto& e : s.stream.events) {
    if (e.src == 1) ++seconds[e.speaking.at(0)];
  }
  EXPECT_EQ(s.spec.find(4)->role, Role::kTeacher);
  for (NodeId i = 1; i <= 3; ++i) EXPECT_GT(seconds[4], seconds[i]);
}

TEST(Generate, InvalidConfigsAreRejected) {
  auto bad = small(2, 20);
  EXPECT_THROW(generate_session(bad), ValidationError);
  bad = small(7, 20);
  EXPECT_THROW(generate_session(bad), ValidationError);
  bad = small(3, 19);
  EXPECT_THROW(generate_session(bad), ValidationError);
  bad = small(3, 20);
  bad.p_gaze_speaker = 0.8;
  bad.p_gaze_empty = 0.3;
  EXPECT_THROW(generate_session(bad), ValidationError);
  bad = small(3, 20);
  bad.facilitator_speak_bias = 0.5;
  EXPECT_THROW(generate_session(bad), ValidationError);
}

TEST(Corpus, TableShape) {
  auto templates = default_templates();
  for (auto& t : templates) t.config.duration_s = 20;
  const auto corpus = generate_corpus_in_memory(templates, 1000);
  ASSERT_EQ(corpus.sessions.size(), 24u);
  std::set<std::string> types;
  for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
    types.insert(corpus.sessions[i].spec.session_type);
    EXPECT_EQ(corpus.manifest[i].seed, 1000u + i);
    const int n = corpus.manifest[i].n_subjects;
    EXPECT_GE(n, 3);
    EXPECT_LE(n, 6);
  }
  EXPECT_EQ(types.size(), 8u);
  EXPECT_EQ(corpus.sessions.front().spec.session_id, "S01");
  EXPECT_EQ(corpus.sessions.back().spec.session_id, "S24");
}

TEST(Corpus, TwoSessionIds) {
  CorpusTemplate t;
  t.config.duration_s = 20;
  t.count = 2;
  const auto corpus = generate_corpus_in_memory({t}, 0);
  EXPECT_EQ(corpus.sessions[0].spec.session_id, "S01");
  EXPECT_EQ(corpus.sessions[1].spec.session_id, "S02");
}

TEST(Corpus, DiskRoundTripAndRerun) {
  auto templates = default_templates();
  for (auto& t : templates) {
    t.config.duration_s = 20;
    t.count = 2;
  }
  const auto a = tgn_test::scratch_dir("corpus_a");
  const auto b = tgn_test::scratch_dir("corpus_b");
  const auto corpus = generate_corpus(templates, 7, a);
  generate_corpus(templates, 7, b);
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(read_file(entry.path()), read_file(b / entry.path().filename())) << entry.path();
  }
  const auto loaded = load_corpus(a);
  ASSERT_EQ(loaded.size(), corpus.sessions.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].spec, corpus.sessions[i].spec);
    EXPECT_EQ(loaded[i].stream.events, corpus.sessions[i].stream.events);
  }
  EXPECT_THROW(load_corpus(a / "missing"), IoError);
}
