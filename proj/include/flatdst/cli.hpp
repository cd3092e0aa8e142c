// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `flatdst` command: gen, train, eval, infer, gradcheck, ablate.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
// failure.

#ifndef FLATDST_CLI_HPP_
#define FLATDST_CLI_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flatdst/checkpoint.hpp"
#include "flatdst/config.hpp"
#include "flatdst/dataset.hpp"
#include "flatdst/diagnostics.hpp"
#include "flatdst/manifest.hpp"
#include "flatdst/synthetic.hpp"
#include "flatdst/trainer.hpp"

namespace flatdst::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

namespace fs = std::filesystem;

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

inline std::vector<DialogueRecord> load_optional(const fs::path& path, const SchemaPtr& schema) {
  if (!fs::exists(path)) return {};
  return load_dataset(path.string(), schema);
}

// Vocabulary shipped with the data directory, else one built from all
// splits found there.
inline Vocab data_vocab(const fs::path& dir, const Schema& schema,
                        const std::vector<DialogueRecord>& train,
                        const std::vector<DialogueRecord>& dev,
                        const std::vector<DialogueRecord>& test) {
  if (fs::exists(dir / "vocab.txt")) return Vocab::load((dir / "vocab.txt").string());
  return build_vocab(schema, {&train, &dev, &test});
}

struct DataDir {
  SchemaPtr schema;
  std::vector<DialogueRecord> train, dev, test;
  Vocab vocab;
};

inline DataDir load_data_dir(const fs::path& dir, bool need_test) {
  if (!fs::is_directory(dir)) throw ParseError("data directory " + dir.string() + " not found");
  DataDir d;
  d.schema = std::make_shared<const Schema>(load_schema((dir / "schema.json").string()));
  d.train = load_dataset((dir / "train.jsonl").string(), d.schema);
  d.dev = load_optional(dir / "dev.jsonl", d.schema);
  d.test = need_test ? load_dataset((dir / "test.jsonl").string(), d.schema)
                     : load_optional(dir / "test.jsonl", d.schema);
  d.vocab = data_vocab(dir, *d.schema, d.train, d.dev, d.test);
  return d;
}

inline void add_data_inputs(RunManifest& m, const fs::path& dir) {
  for (const char* name : {"schema.json", "vocab.txt", "train.jsonl", "dev.jsonl", "test.jsonl"}) {
    if (fs::exists(dir / name)) m.add_input((dir / name).string());
  }
}

inline void require_empty_out(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) {
    throw ConfigError("output path " + out.string() + " exists and is not a directory");
  }
  if (fs::exists(out) && !fs::is_empty(out) && !force) {
    throw ConfigError("output directory " + out.string() +
                      " is not empty; pass --force to overwrite");
  }
  fs::create_directories(out);
}

inline std::string ops_summary(const Schema& schema, const std::vector<StateOperation>& ops) {
  std::string s;
  for (std::size_t j = 0; j < ops.size(); ++j) {
    if (ops[j] == StateOperation::kCarryover) continue;
    if (!s.empty()) s += ' ';
    s += schema[j].label() + ":" + std::string(to_string(ops[j]));
  }
  return s.empty() ? "(all carryover)" : s;
}

inline std::string state_summary(const DialogueState& state) {
  std::string s;
  for (const auto& e : state.entries()) {
    if (!s.empty()) s += ", ";
    s += e;
  }
  return s.empty() ? "(empty)" : s;
}

inline void print_report(std::ostream& out, const EvalReport& r) {
  out << "mode: " << r.mode << "\n"
      << "turns: " << r.turns << "\n"
      << "joint goal accuracy: " << fixed(r.joint_goal_accuracy) << "\n"
      << "slot accuracy: " << fixed(r.slot_accuracy) << "\n"
      << "operation accuracy: " << fixed(r.op_accuracy) << "\n";
  for (const auto& [d, a] : r.per_domain_joint_accuracy) {
    out << "  " << d << " joint accuracy: " << fixed(a) << "\n";
  }
  out << "mean latency per turn (ms): " << fixed(r.mean_latency_ms, 3)
      << (r.latency_sharded ? " (sharded over " + std::to_string(r.workers) + " workers)" : "")
      << "\n"
      << "decoder invocations: " << r.decoder_invocations << "\n";
  for (const auto& [k, n] : r.decoder_invocations_histogram) {
    out << "  turns with " << k << " decoder calls: " << n << "\n";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string schema_path;  // empty: the default nine-slot schema
  std::size_t n = 0;
  int max_turns = 6;
  std::uint64_t seed = 42;
  std::string out;
};

inline int cmd_gen(const GenOptions& o, std::ostream& out) {
  if (o.n == 0) throw ParseError("empty corpus: --n must be at least 1");
  const Schema base = o.schema_path.empty() ? default_synthetic_schema() : load_schema(o.schema_path);
  auto schema = std::make_shared<const Schema>(base);
  std::vector<DialogueRecord> corpus = generate_synthetic_corpus(schema, o.n, o.max_turns, o.seed);
  const std::size_t n_dev = o.n / 10;
  const std::size_t n_test = o.n / 10;
  const std::size_t n_train = o.n - n_dev - n_test;
  std::vector<DialogueRecord> train(corpus.begin(), corpus.begin() + static_cast<long>(n_train));
  std::vector<DialogueRecord> dev(corpus.begin() + static_cast<long>(n_train),
                                  corpus.begin() + static_cast<long>(n_train + n_dev));
  std::vector<DialogueRecord> test(corpus.begin() + static_cast<long>(n_train + n_dev), corpus.end());

  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_schema(*schema, (dir / "schema.json").string());
  save_dataset(train, (dir / "train.jsonl").string());
  save_dataset(dev, (dir / "dev.jsonl").string());
  save_dataset(test, (dir / "test.jsonl").string());
  build_vocab(*schema, {&corpus}).save((dir / "vocab.txt").string());

  RunManifest m;
  m.command = "gen";
  m.seed = o.seed;
  m.settings = {{"n", std::to_string(o.n)},
                {"max_turns", std::to_string(o.max_turns)},
                {"schema", o.schema_path.empty() ? "default" : o.schema_path}};
  if (!o.schema_path.empty()) m.add_input(o.schema_path);
  m.outputs = {{"schema", "schema.json"}, {"vocab", "vocab.txt"}, {"train", "train.jsonl"},
               {"dev", "dev.jsonl"},      {"test", "test.jsonl"}};
  m.save((dir / "manifest.json").string());
  out << "wrote " << train.size() << "/" << dev.size() << "/" << test.size()
      << " train/dev/test dialogues (" << turn_count(corpus) << " turns, " << schema->size()
      << " slots) to " << dir.string() << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string config;
  std::string data;
  std::string out;
  bool force = false;
};

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const KeyValueConfig kv = KeyValueConfig::load(o.config);
  const TrainConfig config = train_config_from(kv);
  const fs::path data_dir(o.data);
  detail::DataDir data = detail::load_data_dir(data_dir, false);
  const fs::path dir(o.out);
  detail::require_empty_out(dir, o.force);

  RunManifest m;
  m.command = "train";
  m.seed = config.seed;
  m.config = kv.dump();
  detail::add_data_inputs(m, data_dir);
  m.outputs = {{"checkpoint", "model.ckpt"}, {"metrics", "metrics.jsonl"},
               {"timings", "timings.jsonl"}, {"vocab", "vocab.txt"}};

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  std::ofstream timings(dir / "timings.jsonl", std::ios::binary);
  if (!metrics || !timings) throw ParseError("cannot write logs in " + dir.string());
  out << "training on " << data.train.size() << " dialogues (" << turn_count(data.train)
      << " turns), vocabulary " << data.vocab.size() << ", reuse " << config.reuse_spec.name()
      << "\n";
  TrainResult<float> result = train<float>(
      config, data.vocab, data.schema, data.train, data.dev, [&](const EpochMetrics& e) {
        metrics << e.to_json().dump() << '\n' << std::flush;
        nlohmann::ordered_json t;
        t["epoch"] = e.epoch;
        t["wall_time_s"] = e.wall_time_s;
        timings << t.dump() << '\n' << std::flush;
        out << "epoch " << e.epoch << "  loss " << detail::fixed(e.train_loss) << "  train jga "
            << detail::fixed(e.train_jga) << "  dev jga " << detail::fixed(e.dev_jga) << "\n";
      });
  m.settings = {{"best_epoch", std::to_string(result.best_epoch)},
                {"epochs_run", std::to_string(result.log.size())}};
  save_checkpoint(result.model, (dir / "model.ckpt").string(), m.flatten());
  data.vocab.save((dir / "vocab.txt").string());
  m.save((dir / "manifest.json").string());
  out << "best dev jga " << detail::fixed(result.best_dev_jga) << " at epoch "
      << result.best_epoch << "; checkpoint " << (dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string ckpt;
  std::string data;
  std::string mode = "predicted";
  std::size_t workers = 1;
  std::string out;  // report file; default next to the checkpoint
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const EvalMode mode = parse_eval_mode(o.mode);
  if (o.workers < 1) throw ConfigError("--workers must be at least 1");
  LoadedCheckpoint<float> loaded = load_checkpoint<float>(o.ckpt);
  fs::path data(o.data);
  if (fs::is_directory(data)) data /= "test.jsonl";
  const fs::path schema_file = data.parent_path() / "schema.json";
  if (fs::exists(schema_file)) {
    const Schema data_schema = load_schema(schema_file.string());
    if (!(data_schema == *loaded.model.schema())) {
      throw ContractError("dataset schema " + schema_file.string() +
                          " differs from the checkpoint's schema");
    }
  }
  const auto records = load_dataset(data.string(), loaded.model.schema());
  const EvalReport report = evaluate(loaded.model, records, mode, o.workers);

  const fs::path report_path =
      o.out.empty() ? fs::path(o.ckpt).parent_path() / ("eval_" + to_string(mode) + ".json")
                    : fs::path(o.out);
  RunManifest m;
  m.command = "eval";
  m.add_input(o.ckpt);
  m.add_input(data.string());
  m.settings = {{"mode", to_string(mode)}, {"workers", std::to_string(o.workers)}};
  for (const auto& [k, v] : loaded.manifest) {
    if (k == "seed") m.seed = std::stoull(v);
  }
  nlohmann::ordered_json doc = report.to_json();
  doc["manifest"] = m.to_json();
  detail::write_text(report_path, doc.dump(2) + "\n");
  detail::print_report(out, report);
  out << "report written to " << report_path.string() << "\n";
  return kExitOk;
}

struct InferOptions {
  std::string ckpt;
};

// Reads one turn per line as "system <sep> user" where <sep> is "⟂", a tab
// or "|||"; a line without a separator is a user utterance. The line
// "reset" starts a new dialogue.
inline int cmd_infer(const InferOptions& o, std::istream& in, std::ostream& out) {
  LoadedCheckpoint<float> loaded = load_checkpoint<float>(o.ckpt);
  const DstModel<float>& model = loaded.model;
  DialogueState state(model.schema());
  DialogueTurn prev;
  int turn = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (normalize_text(line) == "reset") {
      state = DialogueState(model.schema());
      prev = DialogueTurn{};
      turn = 0;
      out << "state reset\n";
      continue;
    }
    DialogueTurn cur;
    std::size_t cut = std::string::npos, width = 0;
    for (const std::string sep : {"\xE2\x9F\x82", "|||", "\t"}) {
      if (auto p = line.find(sep); p != std::string::npos) {
        cut = p;
        width = sep.size();
        break;
      }
    }
    if (cut == std::string::npos) {
      cur.user = normalize_text(line);
    } else {
      cur.system = normalize_text(line.substr(0, cut));
      cur.user = normalize_text(line.substr(cut + width));
    }
    cur.turn_index = ++turn;
    TurnPrediction pred = model.track_turn(prev, cur, state);
    out << "turn " << turn << "\n"
        << "  ops: " << detail::ops_summary(*model.schema(), pred.ops) << "\n"
        << "  state: " << detail::state_summary(pred.state) << "\n";
    state = std::move(pred.state);
    prev = cur;
  }
  return kExitOk;
}

struct GradCheckCliOptions {
  std::string config;
  double eps = 1e-5;
};

inline constexpr double kGradCheckThreshold = 1e-4;

inline int cmd_gradcheck(const GradCheckCliOptions& o, std::ostream& out) {
  const KeyValueConfig kv = KeyValueConfig::load(o.config);
  const ModelConfig config = model_config_from(kv);
  const auto num_slots = static_cast<std::size_t>(kv.get_int("num_slots", 4));
  const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 42));
  GradCheckOptions opts;
  opts.eps = o.eps;
  opts.max_coords_per_param = static_cast<std::size_t>(kv.get_int("gradcheck_coords", 24));
  const auto start = std::chrono::steady_clock::now();
  GradCheckFixture fixture = make_gradcheck_fixture(config, num_slots, seed);
  const GradCheckSuite suite = run_gradcheck_suite(fixture, opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto line = [&](const char* name, const GradCheckReport& r) {
    out << name << ": max relative error " << std::scientific << std::setprecision(3)
        << r.max_relative_error << std::defaultfloat << " over " << r.coordinates_checked
        << " coordinates (worst " << r.worst_parameter << "[" << r.worst_index << "])\n";
  };
  out << "gradcheck L=" << config.num_layers << " heads=" << config.num_heads
      << " d=" << config.hidden_dim << " J=" << num_slots << " eps=" << o.eps << "\n";
  line("sop_loss", suite.sop);
  line("vg_loss", suite.vg);
  line("joint_loss", suite.joint);
  const bool ok = suite.worst() < kGradCheckThreshold;
  out << (ok ? "PASS" : "FAIL") << " (threshold " << kGradCheckThreshold << ", " << detail::fixed(secs, 1)
      << " s)\n";
  return ok ? kExitOk : kExitNumeric;
}

struct AblateOptions {
  std::string config;
  std::string data;
  std::string specs = "all";
  std::string out;  // directory for ablation.json / ablation.tsv
};

inline int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const KeyValueConfig kv = KeyValueConfig::load(o.config);
  const TrainConfig config = train_config_from(kv);
  std::vector<ReuseSpec> specs;
  try {
    specs = parse_reuse_list(o.specs);
  } catch (const InvalidSpecError& e) {
    throw ConfigError(e.what());
  }
  const fs::path data_dir(o.data);
  const detail::DataDir data = detail::load_data_dir(data_dir, true);

  out << std::left << std::setw(28) << "re-used states" << std::setw(18) << "spec"
      << "test jga\n";
  const auto rows = ablate_reuse<float>(config, specs, data.vocab, data.schema, data.train,
                                        data.dev, data.test, [&](const AblationRow& r) {
                                          out << std::left << std::setw(28) << r.spec.label()
                                              << std::setw(18) << r.spec.name()
                                              << detail::fixed(r.test_jga) << "\n"
                                              << std::flush;
                                        });
  double full = -1, curr_slot = -1;
  for (const auto& r : rows) {
    if (r.spec == ReuseSpec::parse("full")) full = r.test_jga;
    if (r.spec == default_reuse_spec()) curr_slot = r.test_jga;
  }
  std::string trend = "not evaluated (needs both full and curr+slot)";
  if (full >= 0 && curr_slot >= 0) {
    trend = full < curr_slot ? "observed: full re-use below curr+slot"
                             : "not observed: full re-use not below curr+slot";
  }
  out << "expected trend (full < curr+slot): " << trend << "\n";

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    RunManifest m;
    m.command = "ablate";
    m.seed = config.seed;
    m.config = kv.dump();
    detail::add_data_inputs(m, data_dir);
    m.settings = {{"specs", o.specs}};
    m.outputs = {{"table", "ablation.tsv"}, {"report", "ablation.json"}};
    nlohmann::ordered_json doc;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    std::string tsv = "label\tspec\ttest_jga\tbest_dev_jga\tbest_epoch\n";
    for (const auto& r : rows) {
      nlohmann::ordered_json j;
      j["label"] = r.spec.label();
      j["spec"] = r.spec.name();
      j["test_jga"] = r.test_jga;
      j["best_dev_jga"] = r.best_dev_jga;
      j["best_epoch"] = r.best_epoch;
      arr.push_back(j);
      tsv += r.spec.label() + "\t" + r.spec.name() + "\t" + detail::fixed(r.test_jga, 6) + "\t" +
             detail::fixed(r.best_dev_jga, 6) + "\t" + std::to_string(r.best_epoch) + "\n";
    }
    doc["rows"] = arr;
    doc["expected_trend"] = trend;
    doc["manifest"] = m.to_json();
    detail::write_text(dir / "ablation.json", doc.dump(2) + "\n");
    detail::write_text(dir / "ablation.tsv", tsv);
    m.save((dir / "manifest.json").string());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
               std::istream& in) {
  CLI::App app{"flatdst: dialogue state tracking with one shared Transformer"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic train/dev/test corpus");
  g->add_option("--schema", gen.schema_path, "schema JSON with value lists (default: built-in)");
  g->add_option("--n", gen.n, "number of dialogues")->required();
  g->add_option("--max-turns", gen.max_turns, "maximum turns per dialogue")->capture_default_str();
  g->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  g->add_option("--out", gen.out, "output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", tr.config, "config file")->required();
  t->add_option("--data", tr.data, "data directory")->required();
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_flag("--force", tr.force, "overwrite a non-empty output directory");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  e->add_option("--data", ev.data, "dataset file or directory (uses test.jsonl)")->required();
  e->add_option("--mode", ev.mode, "gold or predicted previous state")->capture_default_str();
  e->add_option("--workers", ev.workers, "evaluation threads")->capture_default_str();
  e->add_option("--out", ev.out, "report file");

  InferOptions inf;
  auto* i = app.add_subcommand("infer", "track a dialogue read from stdin");
  i->add_option("--ckpt", inf.ckpt, "checkpoint")->required();

  GradCheckCliOptions gc;
  auto* c = app.add_subcommand("gradcheck", "compare gradients with finite differences");
  c->add_option("--config", gc.config, "config file")->required();
  c->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();

  AblateOptions ab;
  auto* a = app.add_subcommand("ablate", "train once per re-use spec");
  a->add_option("--config", ab.config, "config file")->required();
  a->add_option("--data", ab.data, "data directory")->required();
  a->add_option("--specs", ab.specs, "comma-separated specs or 'all'")->capture_default_str();
  a->add_option("--out", ab.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_eval(ev, out);
    if (*i) return cmd_infer(inf, in, out);
    if (*c) return cmd_gradcheck(gc, out);
    if (*a) return cmd_ablate(ab, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSpecError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const DeterminismError& ex) {
    err << "numeric failure: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const Error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace flatdst::cli

#endif  // FLATDST_CLI_HPP_
