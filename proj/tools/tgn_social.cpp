// tgn_social: generate / train / eval / ablate / encode-dump.
//
// Exit codes: 0 ok, 2 config or validation error, 3 I/O error, 4 internal error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgn_social/tgn_social.hpp"

namespace fs = std::filesystem;
using namespace tgn_social;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run config");
  cmd->add_option("--seed", o.seed, "root seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.sets, "override a config key: a.b=value")->take_all();
}

nlohmann::ordered_json config_document(const CommonOptions& o, const fs::path& fallback_dir = {}) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  if (!o.config_path.empty()) {
    doc = load_config_document(o.config_path);
  } else if (!fallback_dir.empty() && fs::exists(fallback_dir / "config.resolved.json")) {
    doc = load_config_document(fallback_dir / "config.resolved.json");
  }
  for (const auto& s : o.sets) apply_override(doc, s);
  if (o.seed) doc["seed"] = *o.seed;
  return doc;
}

RunConfig resolve(const CommonOptions& o, bool out_is_run_dir, const fs::path& fallback_dir = {}) {
  nlohmann::ordered_json doc = config_document(o, fallback_dir);
  if (!o.out.empty()) doc[out_is_run_dir ? "run_dir" : "corpus_dir"] = o.out;
  return run_config_from_json(doc);
}

struct SplitCorpus {
  std::vector<Session> sessions;
  SplitPlan plan;
  std::vector<PreparedSession> train;
  std::vector<PreparedSession> test;
};

SplitCorpus load_split(const RunConfig& cfg) {
  SplitCorpus c;
  c.sessions = load_corpus(cfg.corpus_dir);
  std::vector<SessionSpec> specs;
  for (const auto& s : c.sessions) specs.push_back(s.spec);
  c.plan = split_sessions(specs, cfg.train.validation_fraction);
  std::sort(c.sessions.begin(), c.sessions.end(),
            [](const Session& a, const Session& b) { return a.spec.session_id < b.spec.session_id; });
  for (const auto& s : c.sessions) {
    const bool test = std::binary_search(c.plan.test.begin(), c.plan.test.end(), s.spec.session_id);
    if (test) {
      c.test.push_back(prepare_session(s));
    } else {
      c.train.push_back(prepare_session(s, cfg.train.validation_fraction));
    }
  }
  return c;
}

void write_resolved(const RunConfig& cfg) {
  write_file(fs::path(cfg.run_dir) / "config.resolved.json", to_json(cfg).dump(2) + "\n");
}

std::string log_lines(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) out += to_json(e).dump() + "\n";
  return out;
}

Checkpoint require_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing checkpoint " + path.string());
  return load_checkpoint(path);
}

nlohmann::ordered_json train_meta(int phase, const TrainResult& r) {
  nlohmann::ordered_json m;
  m["phase"] = phase;
  m["best_epoch"] = r.best_epoch;
  m["best_val_f1"] = r.best_val_f1;
  m["epochs_run"] = r.log.size();
  return m;
}

int cmd_generate(const CommonOptions& o) {
  const RunConfig cfg = resolve(o, false);
  const Corpus corpus = generate_corpus(cfg.resolved_templates(), cfg.seed, cfg.corpus_dir);
  std::cout << "wrote " << corpus.sessions.size() << " sessions to " << cfg.corpus_dir << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o, int phase) {
  const RunConfig cfg = resolve(o, true);
  const fs::path run(cfg.run_dir);
  if (!fs::exists(fs::path(cfg.corpus_dir) / "manifest.json")) {
    throw IoError("no corpus at " + cfg.corpus_dir + " (run generate first)");
  }
  const SplitCorpus data = load_split(cfg);
  write_resolved(cfg);

  std::string log;
  TemporalGraphNetwork net = TemporalGraphNetwork::initialize(cfg.model, cfg.model_seed());
  if (phase == 0 || phase == 1) {
    const TrainResult r1 = train_phase1(net, data.train, cfg.train);
    save_checkpoint({cfg.model, net.params(), train_meta(1, r1)}, run / "phase1.ckpt");
    log += log_lines(r1.log);
    std::cout << "phase 1: " << r1.log.size() << " epochs, best val F1 " << r1.best_val_f1 << " at epoch "
              << r1.best_epoch << "\n";
    if (phase == 1) fs::remove(run / "phase2.ckpt");
  } else {
    const Checkpoint c1 = require_checkpoint(run / "phase1.ckpt");
    if (!(c1.config == cfg.model)) throw ConfigError("phase1.ckpt was trained with a different model config");
    net = TemporalGraphNetwork(c1.config, c1.params);
    if (fs::exists(run / "log.jsonl")) {
      std::istringstream in(read_file(run / "log.jsonl"));
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && nlohmann::json::parse(line).value("phase", 0) == 1) log += line + "\n";
      }
    }
  }
  if (phase == 0 || phase == 2) {
    const TrainResult r2 = train_phase2(net, data.train, cfg.train);
    save_checkpoint({cfg.model, net.params(), train_meta(2, r2)}, run / "phase2.ckpt");
    log += log_lines(r2.log);
    std::cout << "phase 2: " << r2.log.size() << " epochs, best val F1 " << r2.best_val_f1 << " at epoch "
              << r2.best_epoch << "\n";
  }
  write_file(run / "log.jsonl", log);
  return 0;
}

int cmd_eval(const CommonOptions& o, bool encodings, const std::string& external) {
  const RunConfig cfg = resolve(o, true, o.out.empty() ? fs::path("run") : fs::path(o.out));
  const fs::path run(cfg.run_dir);
  const Checkpoint c1 = require_checkpoint(run / "phase1.ckpt");
  const SplitCorpus data = load_split(cfg);

  nlohmann::ordered_json metrics;
  metrics["test_sessions"] = data.plan.test;
  const TaskEvaluation gaze = evaluate_link(TemporalGraphNetwork(c1.config, c1.params), data.test, cfg.eval_seed());
  metrics["next_gaze"] = task_json(gaze);
  if (fs::exists(run / "phase2.ckpt")) {
    const Checkpoint c2 = load_checkpoint(run / "phase2.ckpt");
    metrics["next_speaker"] = task_json(evaluate_speaker(TemporalGraphNetwork(c2.config, c2.params), data.test));
  } else {
    metrics["next_speaker"] = nullptr;
  }
  nlohmann::ordered_json notes;
  notes["threshold"] = "positive iff sigmoid(logit) > 0.5";
  notes["speaker_label"] = "speaking status at the next sampled timestamp (t + 1 s at 1 Hz)";
  notes["accuracy_counts"] = "all queries: positives, empty-dst rows and sampled negatives";
  notes["baseline_information"] = "events before the scored batch, same as the model";
  notes["gaze_query_sets_identical"] = gaze.model_query_hash == gaze.baseline_query_hash;
  metrics["notes"] = notes;
  write_file(run / "metrics.json", metrics.dump(2) + "\n");
  std::cout << "next gaze F1: model " << f1(gaze.model) << ", history " << f1(gaze.baseline) << "\n";
  if (!metrics["next_speaker"].is_null()) {
    const auto& sp = metrics["next_speaker"];
    std::cout << "next speaker F1: model " << sp["model"]["f1"].get<double>() << ", history "
              << sp["baseline"]["f1"].get<double>() << "\n";
  }

  if (encodings) {
    std::optional<fs::path> ext;
    if (!external.empty()) {
      ext = external;
    } else if (cfg.external_messages) {
      ext = *cfg.external_messages;
    }
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed();
    const EncodingTable table = compare_encodings(data.sessions, cfg.model, tc, cfg.model_seed(), cfg.eval_seed(), ext);
    write_file(run / "encoding_table.csv", encoding_csv(table));
    std::cout << "wrote " << (run / "encoding_table.csv").string() << "\n";
  }
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_ablate(const CommonOptions& o, const std::string& variants_csv) {
  const RunConfig cfg = resolve(o, true);
  std::vector<std::string> names = variants_csv.empty() ? cfg.ablation_variants : split_csv(variants_csv);
  if (names.empty()) throw ConfigError("no variants selected");
  std::vector<Variant> variants;
  for (const auto& n : names) variants.push_back(variant_by_name(n, cfg.model));
  const SplitCorpus data = load_split(cfg);
  write_resolved(cfg);
  const auto rows = run_ablation(variants, data.train, data.test, cfg.train, cfg.model_seed(), cfg.eval_seed());
  const fs::path out = fs::path(cfg.run_dir) / "ablation.csv";
  write_file(out, ablation_csv(rows));
  std::cout << ablation_csv(rows);
  return 0;
}

int cmd_encode_dump(const CommonOptions& o) {
  nlohmann::ordered_json doc = config_document(o);
  const RunConfig cfg = run_config_from_json(doc);
  const fs::path out = o.out.empty() ? fs::path(cfg.run_dir) / "messages" : fs::path(o.out);
  const auto sessions = load_corpus(cfg.corpus_dir);
  for (const auto& s : sessions) write_file(out / (s.spec.session_id + ".messages.csv"), message_csv(encode_stream(s)));
  std::cout << "wrote " << sessions.size() << " message files to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph network for gaze and speaker prediction in group sessions"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, eval_o, ablate_o, dump_o;
  int phase = 0;
  bool encodings = false;
  std::string external, variants;

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  add_common(gen, gen_o);
  auto* train = app.add_subcommand("train", "train phase 1 and phase 2");
  add_common(train, train_o);
  train->add_option("--phase", phase, "run only this phase")->check(CLI::IsMember({1, 2}));
  auto* eval = app.add_subcommand("eval", "score the test sessions against the history baseline");
  add_common(eval, eval_o);
  eval->add_flag("--encodings", encodings, "also write encoding_table.csv");
  eval->add_option("--external-messages", external, "directory of <session_id>.messages.csv files");
  auto* ablate = app.add_subcommand("ablate", "train and score the named variants");
  add_common(ablate, ablate_o);
  ablate->add_option("--variants", variants, "comma-separated variant names");
  auto* dump = app.add_subcommand("encode-dump", "write the one-hot messages of every event as CSV");
  add_common(dump, dump_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_generate(gen_o);
    if (*train) return cmd_train(train_o, phase);
    if (*eval) return cmd_eval(eval_o, encodings, external);
    if (*ablate) return cmd_ablate(ablate_o, variants);
    if (*dump) return cmd_encode_dump(dump_o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}
