// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include "helpers.hpp"

using namespace tgn_social;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool ok, const std::string& detail, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1fs", seconds);
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << " [" << buf << "]" << std::endl;
  if (!ok) ++failures;
}

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TGN_SOCIAL_CLI) + " " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string strip_timing(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("seconds");
    out += j.dump() + "\n";
  }
  return out;
}

void criterion1() {
  const auto start = Clock::now();
  const auto spec = tgn_test::circle_spec({Role::kStudent, Role::kStudent, Role::kStudent, Role::kTeacher});
  const auto m = encode_message({0.0, 1, 4, {2, 4}}, spec);
  const MessageVector expected{0, 1, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 0};
  bool lengths = true;
  const auto s = tgn_test::random_session(5, 100, 1);
  for (const auto& row : encode_stream(s)) lengths = lengths && row.size() == 14;
  const double t = since(start);
  report(1, m == expected && lengths && t < 1.0, "table scenario vector exact, every message has 14 entries", t);
}

std::string capture(const std::string& cmd) {
  std::string out;
  if (FILE* f = popen(cmd.c_str(), "r")) {
    char buf[4096];
    while (std::fgets(buf, sizeof buf, f)) out += buf;
    pclose(f);
  }
  return out;
}

void criterion2() {
  const auto start = Clock::now();
  const auto j = nlohmann::json::parse(capture(std::string(TGN_SOCIAL_GRAD_CHECK) + " 2"));
  const double t = since(start);
  const double err = j.at("max_relative_error").get<double>();
  const auto plain = tgn_test::full_model_grad_check(ModelConfig{}, 2, 0.0, 1e-5);
  std::cout << "  same check on double tensors: " << plain.max_relative_error << " (worst " << plain.worst_param
            << ", analytic " << plain.worst_analytic << ", numeric " << plain.worst_numeric << ")\n";
  report(2, err < 1e-4 && t < 30.0,
         "long double tensors: max relative error " + std::to_string(err) + " over " +
             std::to_string(j.at("entries").get<std::size_t>()) + " entries (worst " +
             j.at("worst_param").get<std::string>() + ")",
         t);
}

void criterion3() {
  const auto start = Clock::now();
  auto net = TemporalGraphNetwork::initialize(ModelConfig{}, 3);
  tgn_test::randomize(net.params(), 4, 0.3);
  int batches = 0, mismatches = 0;
  for (std::uint64_t k = 0; batches < 100; ++k) {
    const auto s = prepare_session(tgn_test::random_session(3 + static_cast<int>(k % 4), 60, 100 + k));
    SessionState state = net.new_state(s.spec);
    Rng rng(k);
    for (const auto& b : s.train_batches) {
      if (batches == 100) break;
      const auto lq = link_queries(s, b, rng);
      const auto sq = speaker_queries(s, b);
      SessionState withheld = state;
      const auto blind = net.process_batch(withheld, {}, lq, sq);
      const auto seen = net.process_batch(state, batch_events(s, b), lq, sq);
      if (seen.link_logits != blind.link_logits || seen.speaker_logits != blind.speaker_logits) ++mismatches;
      ++batches;
    }
  }
  const double t = since(start);
  report(3, mismatches == 0 && t < 60.0,
         std::to_string(batches) + " batches, " + std::to_string(mismatches) + " mismatches with the batch withheld", t);
}

void criterion4() {
  const auto start = Clock::now();
  std::size_t drawn = 0, collisions = 0, outside = 0;
  for (std::uint64_t seed = 0; drawn < 100000; ++seed) {
    auto templates = default_templates();
    for (auto& tpl : templates) {
      tpl.config.duration_s = 60;
      tpl.count = 1;
    }
    const auto corpus = generate_corpus_in_memory(templates, 1000 * seed);
    Rng rng(seed);
    for (const auto& session : corpus.sessions) {
      const auto s = prepare_session(session);
      for (const auto& b : s.all_batches()) {
        std::vector<Edge> pos;
        for (std::size_t i = b.begin; i < b.end; ++i) {
          if (s.events[i].dst != kEmptyNode) pos.push_back({s.events[i].src, s.events[i].dst, s.events[i].t});
        }
        const auto neg = sample_negatives(pos, s.subjects, rng);
        const auto a = audit_negatives(neg.negatives, pos, s.subjects);
        collisions += a.collisions;
        outside += a.out_of_session;
        drawn += neg.negatives.size();
      }
    }
  }
  const std::vector<NodeId> subjects{1, 2, 3, 4};
  const std::vector<Edge> one{{1, 2, 0.0}};
  Rng rng(2024);
  std::map<NodeId, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[sample_negatives(one, subjects, rng).negatives[0].dst]++;
  double worst = 0.0;
  for (NodeId d : {0, 3, 4}) worst = std::max(worst, std::abs(counts[d] / static_cast<double>(draws) - 1.0 / 3.0));
  const bool ok = collisions == 0 && outside == 0 && counts.size() == 3 && worst <= 0.02;
  report(4, ok,
         std::to_string(drawn) + " negatives, " + std::to_string(collisions) + " collisions, " +
             std::to_string(outside) + " out of session; max frequency deviation " + fmt(worst),
         since(start));
}

// Bayes-optimal next-speaker predictor for the generator's speaker chain,
// given the speaker at the last timestamp before the batch.
Confusion markov_oracle(const std::vector<PreparedSession>& sessions, const GenConfig& g) {
  Confusion c;
  for (const auto& s : sessions) {
    const std::size_t n = s.subjects.size();
    std::vector<double> w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.spec.facilitator_type != FacilitatorType::kNone &&
          s.spec.find(s.subjects[i])->role == facilitator_role(s.spec.facilitator_type)) {
        w[i] = g.facilitator_speak_bias;
      }
    }
    const double stay = 1.0 - 1.0 / g.speaker_hold;
    auto step = [&](const std::vector<double>& p) {
      std::vector<double> q(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        q[i] += p[i] * stay;
        double others = 0.0;
        for (std::size_t j = 0; j < n; ++j) others += j == i ? 0.0 : w[j];
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) q[j] += p[i] * (1.0 - stay) * w[j] / others;
        }
      }
      return q;
    };
    for (const auto& b : s.all_batches()) {
      std::vector<double> p(n, 0.0);
      double known_t = -1.0;
      if (b.begin == 0) {
        double total = 0.0;
        for (double x : w) total += x;
        for (std::size_t i = 0; i < n; ++i) p[i] = w[i] / total;
      } else {
        const auto& prev = s.raw[b.begin - 1];
        known_t = prev.t;
        for (std::size_t i = 0; i < n; ++i) {
          p[i] = std::find(prev.speaking.begin(), prev.speaking.end(), s.subjects[i]) != prev.speaking.end();
        }
      }
      std::map<double, std::vector<double>> at;
      for (const auto& q : speaker_queries(s, b)) {
        auto it = at.find(q.t);
        if (it == at.end()) {
          std::vector<double> d = p;
          const double target = s.speaking.upper_bound(q.t)->first;
          for (double t = known_t; t < target; t += 1.0) d = step(d);
          it = at.emplace(q.t, d).first;
        }
        const std::size_t i = static_cast<std::size_t>(
            std::find(s.subjects.begin(), s.subjects.end(), q.node) - s.subjects.begin());
        c.add(it->second[i] > 0.5, q.label > 0.5);
      }
    }
  }
  return c;
}

void criterion5() {
  const auto start = Clock::now();
  RunConfig cfg = default_run_config();
  cfg.seed = 2024;
  cfg.generator.duration_s = 600;
  cfg.generator.p_gaze_speaker = 0.7;
  cfg.train.max_epochs = 30;
  cfg.train.patience = 10;
  cfg.train.seed = cfg.train_seed();
  const auto corpus = generate_corpus_in_memory(cfg.resolved_templates(), cfg.seed);
  std::vector<SessionSpec> specs;
  for (const auto& s : corpus.sessions) specs.push_back(s.spec);
  const auto plan = split_sessions(specs, cfg.train.validation_fraction);
  std::vector<PreparedSession> train, test;
  for (const auto& s : corpus.sessions) {
    if (std::binary_search(plan.test.begin(), plan.test.end(), s.spec.session_id)) {
      test.push_back(prepare_session(s));
    } else {
      train.push_back(prepare_session(s, cfg.train.validation_fraction));
    }
  }
  auto net = TemporalGraphNetwork::initialize(cfg.model, cfg.model_seed());
  const auto r1 = train_phase1(net, train, cfg.train);
  const auto gaze = evaluate_link(net, test, cfg.eval_seed());
  const auto r2 = train_phase2(net, train, cfg.train);
  const auto speaker = evaluate_speaker(net, test);
  const Confusion oracle = markov_oracle(test, cfg.generator);

  const double gaze_gap = f1(gaze.model) - f1(gaze.baseline);
  const double speaker_gap = f1(speaker.model) - f1(speaker.baseline);
  const double t = since(start);
  std::cout << "  next gaze: model F1 " << fmt(f1(gaze.model)) << ", history F1 " << fmt(f1(gaze.baseline))
            << " (phase 1 ran " << r1.log.size() << " epochs)\n";
  std::cout << "  next speaker: model F1 " << fmt(f1(speaker.model)) << ", history F1 " << fmt(f1(speaker.baseline))
            << " (phase 2 ran " << r2.log.size() << " epochs)\n";
  std::cout << "  next speaker, Bayes-optimal chain predictor with the same information: F1 " << fmt(f1(oracle))
            << " (" << fmt(f1(oracle) - f1(speaker.baseline)) << " over history)\n";
  const bool ok = gaze_gap >= 0.05 && speaker_gap >= 0.05 && t < 1200.0;
  report(5, ok, "gaze margin " + fmt(gaze_gap) + ", speaker margin " + fmt(speaker_gap) + " (bar 0.05 each)", t);
}

void criterion6() {
  const auto start = Clock::now();
  const auto session = tgn_test::overfit_session();
  auto net = TemporalGraphNetwork::initialize(ModelConfig{}, 5);
  const std::vector<PreparedSession> train{prepare_session(session, 0.15)};
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.seed = 42;
  const auto r = train_phase1(net, train, cfg);
  const std::vector<PreparedSession> whole{prepare_session(session)};
  const double score = f1(evaluate_link(net, whole, 1).model);
  report(6, score >= 0.95,
         "training F1 " + fmt(score) + " after " + std::to_string(r.log.size()) + " epochs on a 2-subject session",
         since(start));
}

void criterion7(const fs::path& root) {
  const auto start = Clock::now();
  const fs::path dir = root / "ablation";
  nlohmann::ordered_json c;
  c["seed"] = 7;
  c["corpus_dir"] = (dir / "corpus").string();
  c["run_dir"] = (dir / "run").string();
  c["generator"]["duration_s"] = 300;
  c["train"]["max_epochs"] = 3;
  write_file(dir / "config.json", c.dump(2));
  const std::string conf = "--config " + (dir / "config.json").string();
  bool ok = run_cli("generate " + conf) == 0 && run_cli("ablate " + conf) == 0;
  std::map<std::string, double> f1s;
  if (ok) {
    std::istringstream in(read_file(dir / "run" / "ablation.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto a = line.find(',');
      const auto b = line.find(',', a + 1);
      f1s[line.substr(0, a)] = std::stod(line.substr(a + 1, b - a - 1));
    }
  }
  std::size_t named = 0;
  for (const auto& v : named_variants()) named += f1s.count(v.name);
  const bool gap = f1s.count("TGN-no-mem") && f1s.count("TGN-attn") && f1s["TGN-no-mem"] != f1s["TGN-attn"];
  ok = ok && f1s.size() == 7 && named == 7 && gap;
  report(7, ok,
         std::to_string(f1s.size()) + " rows; TGN-attn F1 " + fmt(f1s["TGN-attn"]) + " vs TGN-no-mem F1 " +
             fmt(f1s["TGN-no-mem"]),
         since(start));
}

void criterion8(const fs::path& root) {
  const auto start = Clock::now();
  const fs::path dir = root / "determinism";
  nlohmann::ordered_json c;
  c["seed"] = 11;
  c["corpus_dir"] = (dir / "corpus").string();
  c["run_dir"] = (dir / "a").string();
  c["generator"]["duration_s"] = 120;
  c["train"]["max_epochs"] = 3;
  write_file(dir / "config.json", c.dump(2));
  const std::string conf = "--config " + (dir / "config.json").string();
  const std::string resolved = "--config " + (dir / "a" / "config.resolved.json").string();
  bool ok = run_cli("generate " + conf) == 0 && run_cli("train " + conf) == 0 && run_cli("eval " + conf) == 0 &&
            run_cli("train " + resolved + " --out " + (dir / "b").string()) == 0 &&
            run_cli("eval " + resolved + " --out " + (dir / "b").string()) == 0;
  bool metrics_same = false, log_same = false;
  if (ok) {
    metrics_same = read_file(dir / "a" / "metrics.json") == read_file(dir / "b" / "metrics.json");
    log_same = strip_timing(read_file(dir / "a" / "log.jsonl")) == strip_timing(read_file(dir / "b" / "log.jsonl"));
  }
  report(8, ok && metrics_same && log_same,
         std::string("metrics.json ") + (metrics_same ? "identical" : "differs") + ", log.jsonl " +
             (log_same ? "identical" : "differs") + " without timing",
         since(start));
}

void criterion9() {
  const auto start = Clock::now();
  Rng rng(99);
  Confusion c;
  std::vector<std::pair<bool, bool>> pairs;
  for (int i = 0; i < 1000; ++i) {
    pairs.emplace_back(rng.bernoulli(0.5), rng.bernoulli(0.5));
    c.add(pairs.back().first, pairs.back().second);
  }
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& [p, l] : pairs) {
    if (p && l) ++tp;
    if (p && !l) ++fp;
    if (!p && l) ++fn;
    if (!p && !l) ++tn;
  }
  const double f = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  const double a = static_cast<double>(tp + tn) / static_cast<double>(pairs.size());
  report(9, f1(c) == f && accuracy(c) == a, "f1 " + fmt(f1(c)) + ", accuracy " + fmt(accuracy(c)) + " match recount",
         since(start));
}

}  // namespace

int main() {
  const fs::path root = tgn_test::scratch_dir("acceptance");
  const auto guard = [](int id, auto fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what(), 0.0);
    }
  };
  guard(1, criterion1);
  guard(2, criterion2);
  guard(3, criterion3);
  guard(4, criterion4);
  guard(5, criterion5);
  guard(6, criterion6);
  guard(7, [&] { criterion7(root); });
  guard(8, [&] { criterion8(root); });
  guard(9, criterion9);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
