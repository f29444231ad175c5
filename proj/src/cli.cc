// seqfb/cli.cc

// Copyright 2026  The seqfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seqfb/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "seqfb/fst-ops.h"
#include "seqfb/run-config.h"

namespace seqfb {

namespace fs = std::filesystem;

void InitLogging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("seqfb"));
    spdlog::set_pattern("%H:%M:%S %^%l%$ %v");
    done = true;
  }
  const char *env = std::getenv("SEQFB_LOG");
  std::string level = env ? env : "warn";
  auto lv = spdlog::level::from_str(level);
  if (lv == spdlog::level::off && level != "off") lv = spdlog::level::warn;
  spdlog::set_level(lv);
}

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;

  RunConfig Load() const {
    return config.empty() ? RunConfig::Parse("", "", overrides)
                          : RunConfig::Load(config, overrides);
  }
};

void AddCommon(CLI::App *cmd, Common &c) {
  cmd->add_option("-c,--config", c.config, "JSON run configuration");
  cmd->add_option("--set", c.overrides, "override a config key, e.g. --set scales.am=0.1")
      ->take_all();
}

std::string OutPath(const RunConfig &cfg, const std::string &name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void EchoConfig(const RunConfig &cfg) {
  WriteFileAtomic(OutPath(cfg, "effective-config.json"),
                  [&](std::ostream &os) { os << cfg.effective.dump(2) << '\n'; });
}

ToyAcousticModel InitialModel(const RunConfig &cfg, const GraphFactory &f,
                              const SyntheticCorpus &train) {
  ToyAcousticModel m = ToyAcousticModel::Random(f.NumClasses(), cfg.corpus.dim, cfg.init_seed,
                                                cfg.init_scale);
  m.SetPriorScale(cfg.prior_scale);
  m.SetTrainBias(cfg.train_bias);
  m.SetPriorsFromCounts(ClassCounts(train, f.NumClasses()));
  return m;
}

SyntheticCorpus EvalCorpus(const RunConfig &cfg, const GraphFactory &f, const Matrix &means) {
  CorpusConfig ec = cfg.corpus;
  ec.num_utts = cfg.eval_utts;
  return GenerateCorpus(f, ec, means, "eval");
}

// --- build-graph -----------------------------------------------------------

int BuildGraph(const Common &c, const std::string &out_file, std::ostream &out) {
  RunConfig cfg = c.Load();
  GraphFactory f = MakeFactory(cfg);
  const std::string path = out_file.empty() ? OutPath(cfg, "den.fst") : out_file;
  WriteFileAtomic(path, [&](std::ostream &os) { WriteText(os, f.Denominator()); });
  WriteFileAtomic(OutPath(cfg, "words.txt"), [&](std::ostream &os) { f.Lex().words.Write(os); });
  WriteFileAtomic(OutPath(cfg, "graph-stats.csv"),
                  [&](std::ostream &os) { WriteGraphStatsCsv(os, f.Stats()); });
  EchoConfig(cfg);
  out << "states,edges\n"
      << f.Denominator().NumStates() << ',' << f.Denominator().NumArcs() << '\n';
  return 0;
}

// --- fb ----------------------------------------------------------------------

struct FbArgs {
  std::string graph, scores, schedule, gamma;
  int64_t frames = -1;
  bool bench = false;
  std::vector<int64_t> bench_frames = {16, 64, 256, 1024, 4096};
  uint64_t bench_seed = 7;
};

Automaton LoadGraph(const RunConfig &cfg, const std::string &path) {
  if (path.empty()) return MakeFactory(cfg).Denominator();
  std::ifstream is(path);
  if (!is) throw DataError("cannot open graph '" + path + "'");
  return ReadText(is, path);
}

int Fb(const Common &c, const FbArgs &a, std::ostream &out) {
  RunConfig cfg = c.Load();
  Automaton g = LoadGraph(cfg, a.graph);
  FbOptions o;
  o.am_scale = cfg.train.am_scale;
  o.fast = cfg.train.fast;
  o.schedule = a.schedule.empty() ? cfg.train.schedule : CheckpointSchedule::Parse(a.schedule);

  if (a.bench) {
    std::ostringstream csv;
    WriteCountersCsvHeader(csv);
    std::mt19937_64 rng(a.bench_seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int64_t T : a.bench_frames) {
      if (T < 1) throw ConfigError("bench frame counts must be positive");
      Matrix x(static_cast<size_t>(T), static_cast<size_t>(g.InputAlphabetSize()));
      for (double &v : x.Data()) v = n(rng);
      double ref = 0.0;
      for (const char *s : {"naive", "equidistant", "logarithmic"}) {
        FbOptions so = o;
        so.schedule = CheckpointSchedule::Parse(s);
        FbResult r = ForwardBackward(g, x, so);
        if (std::string(s) == "naive") ref = r.log_z;
        else if (std::fabs(r.log_z - ref) > 1e-10)
          throw NumericalError(std::string("schedule ") + s + " disagrees on log_z");
        WriteCountersCsvRow(csv, so.schedule.Name(), static_cast<size_t>(T), g, r.counters);
      }
    }
    WriteFileAtomic(OutPath(cfg, "bench-memory.csv"), [&](std::ostream &os) { os << csv.str(); });
    out << csv.str();
    return 0;
  }

  if (a.scores.empty()) throw ConfigError("fb needs --scores (or --bench-memory)");
  Matrix x = ReadMatrixFile(a.scores);
  if (a.frames >= 0 && static_cast<int64_t>(x.Rows()) != a.frames)
    throw DataError("scores '" + a.scores + "' have " + std::to_string(x.Rows()) +
                    " frames, expected " + std::to_string(a.frames));
  FbResult r = ForwardBackward(g, x, o);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.log_z);
  WriteFileAtomic(OutPath(cfg, "fb.csv"), [&](std::ostream &os) {
    os << "log_z,T,S,E\n"
       << buf << ',' << x.Rows() << ',' << g.NumStates() << ',' << g.NumArcs() << '\n';
  });
  WriteFileAtomic(OutPath(cfg, "counters.csv"), [&](std::ostream &os) {
    WriteCountersCsvHeader(os);
    WriteCountersCsvRow(os, o.schedule.Name(), x.Rows(), g, r.counters);
  });
  if (!a.gamma.empty())
    WriteFileAtomic(a.gamma, [&](std::ostream &os) { WriteMatrixTsv(os, r.gamma); });
  out << "log_z," << buf << '\n';
  WriteCountersCsvHeader(out);
  WriteCountersCsvRow(out, o.schedule.Name(), x.Rows(), g, r.counters);
  return 0;
}

// --- train -------------------------------------------------------------------

void WriteLattices(const RunConfig &cfg, const GraphFactory &f, const SyntheticCorpus &corpus,
                   const std::vector<UtteranceLattices> &lats) {
  WriteFileAtomic(OutPath(cfg, "words.txt"), [&](std::ostream &os) { f.Lex().words.Write(os); });
  for (size_t i = 0; i < lats.size(); i++) {
    if (lats[i].den.node_times.empty()) continue;  // skipped utterance
    WriteFileAtomic(OutPath(cfg, "lattices/" + corpus.utts[i].id + ".lat"),
                    [&](std::ostream &os) { WriteLattice(os, lats[i].den, &f.Lex().words); });
  }
}

int Train(const Common &c, std::ostream &out) {
  RunConfig cfg = c.Load();
  GraphFactory f = MakeFactory(cfg);
  EchoConfig(cfg);
  SyntheticCorpus train = GenerateCorpus(f, cfg.corpus, "train");
  SyntheticCorpus eval = EvalCorpus(cfg, f, train.means);
  ToyAcousticModel model = InitialModel(cfg, f, train);
  TrainResult r = seqfb::Train(f, train, eval, model, cfg.train);
  WriteFileAtomic(OutPath(cfg, "metrics.csv"),
                  [&](std::ostream &os) { WriteMetricsCsv(os, r.evals); });
  WriteFileAtomic(OutPath(cfg, "model.bin"), [&](std::ostream &os) { model.Write(os); });
  if (IsLatticeCriterion(cfg.train.criterion)) WriteLattices(cfg, f, eval, r.eval_lattices);
  WriteMetricsCsv(out, r.evals);
  return 0;
}

// --- gradcheck ---------------------------------------------------------------

struct GradCheckArgs {
  int64_t frames = -1;
  double corrupt = 0.0;
  std::vector<std::string> criteria = {"mmi", "smbr", "lattice_mmi", "lattice_smbr"};
};

int GradCheckCmd(const Common &c, const GradCheckArgs &a, std::ostream &out) {
  RunConfig cfg = c.Load();
  GraphFactory f = MakeFactory(cfg);
  // A one-word utterance of at most 10 frames.
  CorpusConfig mc = cfg.corpus;
  mc.num_utts = 1;
  mc.min_words = mc.max_words = 1;
  mc.silence_prob = 0.0;
  Utterance utt;
  for (uint64_t s = 0;; s++) {
    mc.seed = cfg.corpus.seed + s;
    utt = GenerateCorpus(f, mc, "micro").utts[0];
    if (utt.features.Rows() <= 10) break;
    if (s > 1000) throw ConfigError("no micro-utterance of <= 10 frames; topology too slow");
  }
  if (a.frames >= 0) {
    if (a.frames < 1 || a.frames > 10) throw ConfigError("--frames must be in [1, 10]");
    Matrix x(static_cast<size_t>(a.frames), utt.features.Cols());
    for (size_t t = 0; t < x.Rows(); t++)
      for (size_t d = 0; d < x.Cols(); d++)
        x(t, d) = utt.features(std::min(t, utt.features.Rows() - 1), d);
    utt.features = std::move(x);
  }
  ToyAcousticModel model =
      ToyAcousticModel::Random(f.NumClasses(), mc.dim, cfg.init_seed, std::max(cfg.init_scale, 0.1));
  model.SetPriorScale(cfg.prior_scale);
  model.SetTrainBias(cfg.train_bias);
  GradCheckOptions go;
  go.corrupt = a.corrupt;
  bool ok = true;
  out << "criterion,frames,max_rel_err,status\n";
  for (const std::string &name : a.criteria) {
    TrainConfig tc = cfg.train;
    tc.criterion = ParseCriterion(name);
    out << name << ',' << utt.features.Rows() << ',';
    try {
      double err = GradCheck(f, model, utt, tc, go);
      const bool pass = err < 1e-4;
      ok = ok && pass;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", err);
      out << buf << ',' << (pass ? "ok" : "FAIL") << '\n';
    } catch (const DegenerateUtteranceError &e) {
      // No alignment of this length: the criterion skips the utterance,
      // which is the legal outcome.
      out << "0,skipped\n";
      spdlog::info("{}: {}", name, e.what());
    }
  }
  if (!ok) throw NumericalError("gradient check failed");
  return 0;
}

// --- gen-corpus / make-lattice -------------------------------------------------

int GenCorpus(const Common &c, std::ostream &out) {
  RunConfig cfg = c.Load();
  GraphFactory f = MakeFactory(cfg);
  SyntheticCorpus train = GenerateCorpus(f, cfg.corpus, "train");
  SyntheticCorpus eval = EvalCorpus(cfg, f, train.means);
  WriteFileAtomic(OutPath(cfg, "train-corpus.txt"), [&](std::ostream &os) { WriteCorpus(os, train); });
  WriteFileAtomic(OutPath(cfg, "eval-corpus.txt"), [&](std::ostream &os) { WriteCorpus(os, eval); });
  EchoConfig(cfg);
  out << "train_utts," << train.utts.size() << "\neval_utts," << eval.utts.size() << '\n';
  return 0;
}

int MakeLattice(const Common &c, const std::string &model_path, const std::string &corpus_path,
                std::ostream &out) {
  RunConfig cfg = c.Load();
  GraphFactory f = MakeFactory(cfg);
  SyntheticCorpus train = GenerateCorpus(f, cfg.corpus, "train");
  SyntheticCorpus corpus;
  if (corpus_path.empty()) {
    corpus = EvalCorpus(cfg, f, train.means);
  } else {
    std::ifstream is(corpus_path);
    if (!is) throw DataError("cannot open corpus '" + corpus_path + "'");
    corpus = ReadCorpus(is, corpus_path);
  }
  ToyAcousticModel model;
  if (model_path.empty()) {
    model = InitialModel(cfg, f, train);
    WarmStart(model, train, cfg.train.warm_start_epochs, cfg.train.warm_start_lr);
  } else {
    std::ifstream is(model_path, std::ios::binary);
    if (!is) throw DataError("cannot open model '" + model_path + "'");
    model = ToyAcousticModel::Read(is, model_path);
  }
  std::vector<UtteranceLattices> lats(corpus.utts.size());
  size_t arcs = 0;
  for (size_t i = 0; i < corpus.utts.size(); i++) {
    const Utterance &u = corpus.utts[i];
    try {
      lats[i] = MakeUtteranceLattices(f, u.words, model.Scores(u.features), cfg.train.am_scale,
                                      cfg.train.prune);
    } catch (const DegenerateUtteranceError &e) {
      spdlog::warn("no lattice for {}: {}", u.id, e.what());
    }
    arcs += lats[i].den.arcs.size();
  }
  WriteLattices(cfg, f, corpus, lats);
  EchoConfig(cfg);
  out << "lattices," << lats.size() << "\narcs," << arcs << '\n';
  return 0;
}

}  // namespace

int RunCli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Sequence training with lattice-free and lattice-based criteria"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  std::string graph_out;
  auto *bg = app.add_subcommand("build-graph", "build the denominator graph and report its size");
  AddCommon(bg, common);
  bg->add_option("--out", graph_out, "graph file (default: <output_dir>/den.fst)");

  FbArgs fb;
  auto *fbc = app.add_subcommand("fb", "run forward-backward on a graph and a score matrix");
  AddCommon(fbc, common);
  fbc->add_option("--graph", fb.graph, "text graph (default: build from config)");
  fbc->add_option("--scores", fb.scores, "score matrix, binary or TSV");
  fbc->add_option("--schedule", fb.schedule, "naive | equidistant[:B] | logarithmic");
  fbc->add_option("--frames", fb.frames, "expected number of frames");
  fbc->add_option("--gamma", fb.gamma, "write occupancies to this TSV file");
  fbc->add_flag("--bench-memory", fb.bench, "sweep T and record checkpoint counters");
  fbc->add_option("--bench-frames", fb.bench_frames, "frame counts for the sweep")->delimiter(',');
  fbc->add_option("--bench-seed", fb.bench_seed, "seed of the random scores");

  auto *tr = app.add_subcommand("train", "generate a corpus and train the toy model");
  AddCommon(tr, common);

  GradCheckArgs gc;
  auto *gcc = app.add_subcommand("gradcheck", "finite-difference check through the toy model");
  AddCommon(gcc, common);
  gcc->add_option("--frames", gc.frames, "force the micro-utterance length (1..10)");
  gcc->add_option("--criteria", gc.criteria, "criteria to check")->delimiter(',');
  gcc->add_option("--corrupt-gradient", gc.corrupt)->group("");

  auto *gen = app.add_subcommand("gen-corpus", "write the synthetic train and eval corpora");
  AddCommon(gen, common);

  std::string model_path, corpus_path;
  auto *ml = app.add_subcommand("make-lattice", "generate word lattices for a corpus");
  AddCommon(ml, common);
  ml->add_option("--model", model_path, "model checkpoint (default: warm-started init)");
  ml->add_option("--corpus", corpus_path, "corpus file (default: generated eval set)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (bg->parsed()) return BuildGraph(common, graph_out, out);
    if (fbc->parsed()) return Fb(common, fb, out);
    if (tr->parsed()) return Train(common, out);
    if (gcc->parsed()) return GradCheckCmd(common, gc, out);
    if (gen->parsed()) return GenCorpus(common, out);
    if (ml->parsed()) return MakeLattice(common, model_path, corpus_path, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return e.ExitCode();
  } catch (const fs::filesystem_error &e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}

}  // namespace seqfb
