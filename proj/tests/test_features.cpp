#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace tgn_social;

namespace {

// Independent reading of the message rules, written against seat indices and
// role names rather than the library's helpers.
std::vector<double> oracle_message(const InteractionEvent& e, const SessionSpec& spec) {
  auto speaking = [&](NodeId x) { return std::find(e.speaking.begin(), e.speaking.end(), x) != e.speaking.end(); };
  std::vector<double> v;
  v.push_back(speaking(e.src) ? 1 : 0);
  v.push_back(e.dst != 0 && speaking(e.dst) ? 1 : 0);
  bool other = false;
  for (NodeId x : e.speaking) other = other || (x != e.src && x != e.dst);
  v.push_back(other ? 1 : 0);

  std::string seat = "away";
  if (e.dst != 0) {
    const int n = static_cast<int>(spec.subjects.size());
    const int a = spec.find(e.src)->seat_index;
    const int b = spec.find(e.dst)->seat_index;
    int d = a > b ? a - b : b - a;
    if (n - d < d) d = n - d;
    if (d == 1) seat = "nearby";
    else if (2 * d == n) seat = "opposite";
  }
  v.push_back(seat == "opposite");
  v.push_back(seat == "nearby");
  v.push_back(seat == "away");

  auto role = [&](NodeId x) {
    std::vector<double> r(4, 0.0);
    if (x == 0) return r;
    const std::string name(to_string(spec.find(x)->role));
    const char* order[] = {"student", "musician", "teacher", "music_teacher"};
    for (int k = 0; k < 4; ++k) {
      if (name == order[k]) r[k] = 1.0;
    }
    return r;
  };
  for (double x : role(e.src)) v.push_back(x);
  for (double x : role(e.dst)) v.push_back(x);
  return v;
}

std::vector<double> as_vec(const MessageVector& m) { return {m.begin(), m.end()}; }

SessionSpec table_spec() {
  return tgn_test::circle_spec({Role::kStudent, Role::kStudent, Role::kStudent, Role::kTeacher});
}

}  // namespace

TEST(SeatRelation, Examples) {
  const auto four = tgn_test::students(4);
  EXPECT_EQ(seat_relation(four, 1, 2), SeatRelation::kNearby);
  EXPECT_EQ(seat_relation(four, 1, 3), SeatRelation::kOpposite);
  const auto five = tgn_test::students(5);
  EXPECT_EQ(seat_relation(five, 1, 3), SeatRelation::kAway);
  EXPECT_THROW(seat_relation(four, 1, 9), ValidationError);
  EXPECT_THROW(seat_relation(four, 2, 2), ValidationError);
}

TEST(SeatRelation, Symmetric) {
  for (int n = 2; n <= 8; ++n) {
    const auto spec = tgn_test::students(n);
    for (NodeId a = 1; a <= n; ++a) {
      for (NodeId b = 1; b <= n; ++b) {
        if (a != b) EXPECT_EQ(seat_relation(spec, a, b), seat_relation(spec, b, a));
      }
    }
  }
}

TEST(Speaking, Examples) {
  const std::vector<NodeId> two_four{2, 4};
  EXPECT_EQ(encode_speaking(1, 4, two_four), (std::array<double, 3>{0, 1, 1}));
  EXPECT_EQ(encode_speaking(1, 4, {}), (std::array<double, 3>{0, 0, 0}));
  const std::vector<NodeId> one{1};
  EXPECT_EQ(encode_speaking(1, 4, one), (std::array<double, 3>{1, 0, 0}));
  const std::vector<NodeId> others{3};
  EXPECT_EQ(encode_speaking(1, kEmptyNode, others), (std::array<double, 3>{0, 0, 1}));
}

TEST(Roles, Examples) {
  EXPECT_EQ(encode_roles(Role::kStudent, Role::kTeacher), (std::array<double, 8>{1, 0, 0, 0, 0, 0, 1, 0}));
  EXPECT_EQ(encode_roles(Role::kUnknown, Role::kStudent), (std::array<double, 8>{0, 0, 0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(encode_roles(Role::kMusicTeacher, Role::kMusician), (std::array<double, 8>{0, 0, 0, 1, 0, 1, 0, 0}));
}

TEST(Message, TableScenario) {
  const InteractionEvent e{0.0, 1, 4, {2, 4}};
  EXPECT_EQ(as_vec(encode_message(e, table_spec())),
            (std::vector<double>{0, 1, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 0}));
}

TEST(Message, EmptyGazeInSilentGroup) {
  const InteractionEvent e{0.0, 1, kEmptyNode, {}};
  EXPECT_EQ(as_vec(encode_message(e, table_spec())),
            (std::vector<double>{0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(Message, GazeAcrossTheTable) {
  // Seats 0 and 2 of four are opposite, so the seat triple is [1,0,0].
  const InteractionEvent e{0.0, 1, 3, {2, 4}};
  const auto expected = oracle_message(e, table_spec());
  EXPECT_EQ(expected, (std::vector<double>{0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(as_vec(encode_message(e, table_spec())), expected);
}

TEST(Message, MatchesOracleOnRandomEvents) {
  Rng rng(4);
  const Role roles[] = {Role::kStudent, Role::kMusician, Role::kTeacher, Role::kMusicTeacher, Role::kUnknown};
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    std::vector<Role> r;
    for (int i = 0; i < n; ++i) r.push_back(roles[rng.uniform_index(5)]);
    auto spec = tgn_test::circle_spec(r);
    for (int i = n - 1; i > 0; --i) {
      std::swap(spec.subjects[i].seat_index, spec.subjects[rng.uniform_index(i + 1)].seat_index);
    }
    InteractionEvent e;
    e.src = static_cast<NodeId>(1 + rng.uniform_index(n));
    do {
      e.dst = static_cast<NodeId>(rng.uniform_index(n + 1));
    } while (e.dst == e.src);
    for (NodeId x = 1; x <= n; ++x) {
      if (rng.bernoulli(0.3)) e.speaking.push_back(x);
    }
    const auto m = encode_message(e, spec);
    ASSERT_EQ(as_vec(m), oracle_message(e, spec));
    ASSERT_EQ(m.size(), 14u);
    EXPECT_EQ(m[3] + m[4] + m[5], 1.0);
    EXPECT_LE(m[6] + m[7] + m[8] + m[9], 1.0);
    EXPECT_LE(m[10] + m[11] + m[12] + m[13], 1.0);
    for (double x : m) EXPECT_TRUE(x == 0.0 || x == 1.0);
  }
}

TEST(Message, IndependentOfHistory) {
  const auto s = tgn_test::random_session(4, 20, 6);
  const auto rows = encode_stream(s);
  for (std::size_t i = 0; i < s.stream.events.size(); ++i) {
    EXPECT_EQ(rows[i], as_vec(encode_message(s.stream.events[i], s.spec)));
  }
}

TEST(TimeEncode, Examples) {
  TimeEncoderParams zero{std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  EXPECT_EQ(time_encode(123.0, zero), std::vector<double>(4, 1.0));
  TimeEncoderParams p{{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}};
  EXPECT_EQ(time_encode(0.0, p), std::vector<double>(3, 1.0));
  TimeEncoderParams pi{{std::numbers::pi}, {0.0}};
  EXPECT_DOUBLE_EQ(time_encode(1.0, pi)[0], -1.0);
  EXPECT_THROW(time_encode(-1.0, p), std::invalid_argument);
}
