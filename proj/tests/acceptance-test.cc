// Acceptance checks.  Prints one PASS or FAIL line per criterion and exits
// non-zero if any fails.  Tolerances and seeds are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "fd-check.h"
#include "oracle.h"
#include "seqfb/base.h"
#include "seqfb/cli.h"
#include "seqfb/criteria.h"
#include "seqfb/forward-backward.h"
#include "seqfb/lattice.h"
#include "seqfb/run-config.h"

namespace seqfb {
namespace {

namespace fs = std::filesystem;

const std::string kSourceDir = SEQFB_SOURCE_DIR;
const std::string kToyConfig = kSourceDir + "/configs/toy.json";
const std::string kSilenceConfig = kSourceDir + "/configs/silence-heavy.json";

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void Require(bool ok, const std::string &why) {
    if (!ok && pass) detail << "first failure: " << why << "; ";
    pass = pass && ok;
  }
};

const std::vector<std::string> kSchedules = {"none", "equidistant", "logarithmic"};

FbResult RunFb(const Automaton &g, const Matrix &x, const std::string &sched, double am = 1.0) {
  FbOptions o;
  o.am_scale = am;
  o.schedule = CheckpointSchedule::Parse(sched);
  return ForwardBackward(g, x, o);
}

double MaxAbsDiff(const Matrix &a, const Matrix &b) {
  double m = 0.0;
  for (size_t i = 0; i < a.Data().size(); i++)
    m = std::max(m, std::fabs(a.Data()[i] - b.Data()[i]));
  return m;
}

GraphFactory ToyFactory() { return MakeFactory(RunConfig::Load(kToyConfig, {})); }

CriterionOptions Opts(const GraphFactory &f, double am) {
  CriterionOptions o;
  o.am_scale = am;
  o.silence_classes = f.SilenceClasses();
  return o;
}

// 1 ------------------------------------------------------------------------
void ScheduleEquivalence(Verdict &v) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> states(1, 50), frames(1, 200), classes(2, 12), fan(1, 4);
  int done = 0, degenerate = 0;
  double worst_z = 0.0, worst_g = 0.0;
  while (done < 500) {
    Automaton g = testing::RandomGraph(rng, states(rng), classes(rng), fan(rng));
    Matrix x = testing::RandomScores(rng, frames(rng), g.InputAlphabetSize());
    FbResult ref;
    try {
      ref = RunFb(g, x, "none");
    } catch (const DegenerateUtteranceError &) {
      degenerate++;
      continue;
    }
    for (size_t i = 1; i < kSchedules.size(); i++) {
      FbResult r = RunFb(g, x, kSchedules[i]);
      worst_z = std::max(worst_z, std::fabs(r.log_z - ref.log_z));
      worst_g = std::max(worst_g, MaxAbsDiff(r.gamma, ref.gamma));
    }
    done++;
  }
  v.Require(worst_z <= 1e-10, "log_z");
  v.Require(worst_g <= 1e-12, "gamma");
  v.detail << "instances=" << done << " unreachable_skipped=" << degenerate
           << " max_dlogz=" << worst_z << " max_dgamma=" << worst_g;
}

// 2 and 3 ------------------------------------------------------------------
const std::vector<int64_t> kSweep = {16, 64, 256, 1024, 4096};

std::vector<FbCounters> Sweep(const std::string &sched) {
  GraphFactory f = ToyFactory();
  std::mt19937_64 rng(202);
  std::vector<FbCounters> out;
  for (int64_t T : kSweep) {
    Matrix x = testing::RandomScores(rng, T, f.NumClasses(), 1.0);
    out.push_back(RunFb(f.Denominator(), x, sched).counters);
  }
  return out;
}

void SqrtMemoryLaw(Verdict &v) {
  std::vector<FbCounters> c = Sweep("equidistant");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = kSweep.size();
  for (size_t i = 0; i < kSweep.size(); i++) {
    double lx = std::log(static_cast<double>(kSweep[i]));
    double ly = std::log(static_cast<double>(c[i].stored_alpha_vectors_peak));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    v.Require(c[i].alpha_recompute_frames == kSweep[i],
              "recompute != T at T=" + std::to_string(kSweep[i]));
    v.detail << "T=" << kSweep[i] << ":peak=" << c[i].stored_alpha_vectors_peak
             << ",recompute=" << c[i].alpha_recompute_frames << " ";
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  v.Require(std::fabs(slope - 0.5) <= 0.1, "exponent");
  v.detail << "exponent=" << slope;
}

void LogMemoryLaw(Verdict &v) {
  std::vector<FbCounters> c = Sweep("logarithmic");
  for (size_t i = 0; i < kSweep.size(); i++) {
    const int64_t T = kSweep[i];
    const int64_t lg = static_cast<int64_t>(std::ceil(std::log2(static_cast<double>(T))));
    v.Require(c[i].stored_alpha_vectors_peak <= lg + 2, "peak at T=" + std::to_string(T));
    v.Require(c[i].alpha_frames_computed <= T * lg, "total at T=" + std::to_string(T));
    v.detail << "T=" << T << ":peak=" << c[i].stored_alpha_vectors_peak << "/" << lg + 2
             << ",total=" << c[i].alpha_frames_computed << "/" << T * lg << " ";
  }
}

// 4 ------------------------------------------------------------------------
void OracleCorrectness(Verdict &v) {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> states(1, 8), frames(1, 6), classes(2, 5), fan(1, 3);
  std::uniform_real_distribution<double> am(0.1, 1.5);
  int n = 0, empty = 0;
  double worst_z = 0.0, worst_g = 0.0;
  for (int i = 0; i < 400; i++) {
    Automaton g = testing::RandomGraph(rng, states(rng), classes(rng), fan(rng));
    Matrix x = testing::RandomScores(rng, frames(rng), g.InputAlphabetSize());
    const double a = am(rng);
    testing::PathSum brute = testing::EnumeratePaths(g, x, a);
    for (const std::string &s : kSchedules) {
      if (brute.log_z == kLogZero) {
        bool threw = false;
        try {
          RunFb(g, x, s, a);
        } catch (const DegenerateUtteranceError &) {
          threw = true;
        }
        v.Require(threw, "no path but no error");
        continue;
      }
      FbResult r = RunFb(g, x, s, a);
      worst_z = std::max(worst_z, std::fabs(r.log_z - brute.log_z));
      worst_g = std::max(worst_g, MaxAbsDiff(r.gamma, brute.gamma));
    }
    if (brute.log_z == kLogZero) empty++;
    n++;
  }
  v.Require(worst_z <= 1e-10, "log_z");
  v.Require(worst_g <= 1e-10, "gamma");
  v.detail << "instances=" << n << " (no path: " << empty << ") max_dlogz=" << worst_z
           << " max_dgamma=" << worst_g;
}

// 5 ------------------------------------------------------------------------
using LossFn = std::function<CriterionOutput(const Matrix &)>;

// Returns the error, or -1 if the sMBR reference moved while differencing.
double ScoreFd(const LossFn &fn, const Matrix &x, const std::function<bool(const Matrix &)> &same) {
  bool moved = false;
  auto loss = [&](const Matrix &m) {
    if (!same(m)) moved = true;
    return fn(m).loss;
  };
  double err = testing::MaxFdRelError(loss, x, fn(x).grad);
  return moved ? -1.0 : err;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "seqfb");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void GradientFidelity(Verdict &v) {
  GraphFactory f = ToyFactory();
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int64_t> frames(6, 10);
  std::uniform_int_distribution<Label> word(0, f.VocabSize() - 1);
  std::uniform_real_distribution<double> am(0.3, 1.0);
  const std::vector<std::string> names = {"mmi", "smbr", "lattice_mmi", "lattice_smbr"};
  std::vector<double> worst(4, 0.0);
  std::vector<int> count(4, 0);
  int attempts = 0;
  while (*std::min_element(count.begin(), count.end()) < 6 && attempts++ < 500) {
    std::vector<Label> words = {word(rng)};
    const int64_t T = frames(rng);
    const double a = am(rng);
    Matrix x0 = testing::RandomScores(rng, T, f.NumClasses());
    Matrix x = testing::RandomScores(rng, T, f.NumClasses());
    Automaton num;
    UtteranceLattices lats;
    try {
      num = f.Numerator(words);
      ForwardLogZ(num, x, a);
      PruneConfig pc;
      pc.posterior_beam = 3.0;
      lats = MakeUtteranceLattices(f, words, x0, a, pc);
    } catch (const DegenerateUtteranceError &) {
      continue;
    }
    CriterionOptions o = Opts(f, a);
    o.silence_weight = 0.5;
    const std::vector<Label> ref = ReferenceClasses(num, x, a);
    auto same_ref = [&](const Matrix &m) { return ReferenceClasses(num, m, a) == ref; };
    auto always = [](const Matrix &) { return true; };
    LatticeOptions lo;
    lo.scoring = (attempts % 2) ? ArcScoring::kBestPath : ArcScoring::kFullSum;
    std::vector<double> err = {
        ScoreFd([&](const Matrix &m) { return Mmi(num, f.Denominator(), m, o); }, x, always),
        ScoreFd([&](const Matrix &m) { return Smbr(num, f.Denominator(), m, o); }, x, same_ref),
        ScoreFd([&](const Matrix &m) { return LatticeMmi(lats.den, lats.num, f, m, o, lo); }, x,
                always),
        ScoreFd([&](const Matrix &m) { return LatticeSmbr(lats.den, f, num, m, o, lo); }, x,
                same_ref)};
    for (size_t k = 0; k < 4; k++) {
      if (err[k] < 0.0) continue;  // reference alignment changed under the step
      worst[k] = std::max(worst[k], err[k]);
      count[k]++;
    }
  }
  for (size_t k = 0; k < 4; k++) {
    v.Require(count[k] >= 6, names[k] + " too few instances");
    v.Require(worst[k] < 1e-6, names[k] + " scores");
    v.detail << names[k] << ":scores=" << worst[k] << "(n=" << count[k] << ") ";
  }

  // Through the model parameters, via the gradcheck command.
  std::vector<double> model_worst(4, 0.0);
  std::vector<int> checked(4, 0);
  for (int frames_n = 6; frames_n <= 10; frames_n++) {
    CliRun r = Cli({"gradcheck", "-c", kToyConfig, "--frames", std::to_string(frames_n)});
    v.Require(r.code == 0, "gradcheck exit " + std::to_string(r.code) + " " + r.err);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      std::vector<std::string> col;
      std::stringstream ls(line);
      for (std::string c; std::getline(ls, c, ',');) col.push_back(c);
      if (col.size() != 4) continue;
      size_t k = std::find(names.begin(), names.end(), col[0]) - names.begin();
      if (k >= 4 || col[3] != "ok") continue;
      model_worst[k] = std::max(model_worst[k], std::stod(col[2]));
      checked[k]++;
    }
  }
  for (size_t k = 0; k < 4; k++) {
    v.Require(checked[k] > 0, names[k] + " no model check ran");
    v.Require(model_worst[k] < 1e-5, names[k] + " model");
    v.detail << names[k] << ":model=" << model_worst[k] << "(n=" << checked[k] << ") ";
  }
}

// 6 ------------------------------------------------------------------------
void MmiStructure(Verdict &v) {
  GraphFactory f = ToyFactory();
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int64_t> frames(3, 40);
  std::uniform_int_distribution<int> len(0, 3);
  std::uniform_int_distribution<Label> word(0, f.VocabSize() - 1);
  std::uniform_real_distribution<double> am(0.05, 1.5);
  int n = 0, lat_n = 0;
  double min_loss = INFINITY, worst_row = 0.0, worst_self = 0.0;
  for (int i = 0; i < 300; i++) {
    std::vector<Label> words(len(rng));
    for (Label &w : words) w = word(rng);
    Matrix x = testing::RandomScores(rng, frames(rng), f.NumClasses());
    const double a = am(rng);
    CriterionOptions o = Opts(f, a);
    try {
      CriterionOutput out = Mmi(f.Numerator(words), f.Denominator(), x, o);
      min_loss = std::min(min_loss, out.loss);
      for (size_t t = 0; t < x.Rows(); t++) {
        double s = 0.0;
        for (double g : out.grad.Row(t)) s += g;
        worst_row = std::max(worst_row, std::fabs(s));
      }
      n++;
      PruneConfig pc;
      pc.posterior_beam = 2.0;
      UtteranceLattices u = MakeUtteranceLattices(f, words, x, a, pc);
      min_loss = std::min(min_loss, LatticeMmi(u.den, u.num, f, x, o).loss);
      lat_n++;
    } catch (const DegenerateUtteranceError &) {
    }
    // Numerator graph equal to the denominator graph.
    CriterionOutput self = Mmi(f.Denominator(), f.Denominator(), x, o);
    worst_self = std::max(worst_self, std::fabs(self.loss));
    for (double g : self.grad.Data()) worst_self = std::max(worst_self, std::fabs(g));
  }
  v.Require(n >= 200, "too few instances");
  v.Require(min_loss >= 0.0, "negative loss");
  v.Require(worst_self == 0.0, "num == den not exactly zero");
  v.Require(worst_row <= 1e-9, "row sums");
  v.detail << "instances=" << n << " (lattice " << lat_n << ") min_loss=" << min_loss
           << " max_row_sum=" << worst_row << " num_eq_den_max=" << worst_self;
}

// 7 ------------------------------------------------------------------------
void LatticeBounding(Verdict &v) {
  GraphFactory f = ToyFactory();
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int64_t> frames(3, 30);
  std::uniform_real_distribution<double> am(0.1, 1.0);
  LatticeOptions sum;
  sum.scoring = ArcScoring::kFullSum;
  double worst_excess = -INFINITY, worst_eq = 0.0, worst_viterbi = 0.0;
  int n = 0, viterbi_mismatch = 0;
  for (int i = 0; i < 60; i++) {
    Matrix x = testing::RandomScores(rng, frames(rng), f.NumClasses());
    const double a = am(rng);
    double full;
    try {
      full = ForwardLogZ(f.Denominator(), x, a);
    } catch (const DegenerateUtteranceError &) {
      continue;
    }
    for (double beam : {0.5, 2.0, 8.0, 1e300}) {
      for (int64_t cap : {int64_t{0}, int64_t{3}}) {
        PruneConfig pc;
        pc.posterior_beam = beam;
        pc.max_arcs_per_frame = cap;
        Lattice lat = GenerateLattice(f, x, a, pc);
        for (const LatticeOptions &lo : {LatticeOptions{}, sum}) {
          double z = LatticeLogSum(lat, f, x, a, lo);
          worst_excess = std::max(worst_excess, z - full);
          if (beam == 1e300 && cap == 0 && lo.scoring == ArcScoring::kFullSum)
            worst_eq = std::max(worst_eq, std::fabs(z - full));
        }
      }
    }
    // Vanishing beam: exactly the Viterbi path.
    PruneConfig tiny;
    tiny.posterior_beam = 1e-9;
    Lattice lat = GenerateLattice(f, x, a, tiny);
    ViterbiPath vp = Viterbi(f.Denominator(), x, a);
    std::vector<Label> classes, words;
    int32_t node = 0;
    bool single = true;
    const int32_t end = static_cast<int32_t>(lat.node_times.size()) - 1;
    while (node != end && single) {
      int out = 0;
      const LatticeArc *next = nullptr;
      for (const LatticeArc &arc : lat.arcs)
        if (arc.src == node) {
          out++;
          next = &arc;
        }
      if (out != 1) {
        single = false;
        break;
      }
      classes.insert(classes.end(), next->states.begin(), next->states.end());
      if (next->word != kEpsilon) words.push_back(next->word);
      node = next->dst;
    }
    single = single && lat.arcs.size() == lat.node_times.size() - 1;
    if (!single || classes != vp.classes || words != vp.words) viterbi_mismatch++;
    worst_viterbi = std::max(worst_viterbi, std::fabs(LatticeLogSum(lat, f, x, a) - vp.score));
    n++;
  }
  v.Require(worst_excess <= 1e-10, "lattice sum above graph");
  v.Require(worst_eq <= 1e-10, "unpruned full-sum differs");
  v.Require(viterbi_mismatch == 0, "vanishing beam lattice is not the viterbi path");
  v.Require(worst_viterbi <= 1e-10, "vanishing beam score");
  v.detail << "instances=" << n << " max(lat-full)=" << worst_excess
           << " unpruned_fullsum_gap=" << worst_eq << " viterbi_mismatches=" << viterbi_mismatch
           << " viterbi_score_gap=" << worst_viterbi;
}

// 8, 9, 10 -----------------------------------------------------------------
struct Metrics {
  std::vector<double> wer, silence;
};

fs::path ScratchDir(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("seqfb-accept-" + name);
  fs::remove_all(p);
  return p;
}

std::string ReadAll(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream s;
  s << is.rdbuf();
  return s.str();
}

Metrics TrainRun(const std::string &tag, std::vector<std::string> sets) {
  fs::path dir = ScratchDir(tag);
  sets.push_back("output_dir=" + dir.string());
  std::vector<std::string> args = {"train", "-c", kSilenceConfig, "--set"};
  args.insert(args.end(), sets.begin(), sets.end());
  CliRun r = Cli(args);
  if (r.code != 0) throw std::runtime_error("train " + tag + " failed: " + r.err);
  std::istringstream is(ReadAll(dir / "metrics.csv"));
  Metrics m;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> col;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) col.push_back(c);
    m.wer.push_back(std::stod(col.at(2)));
    m.silence.push_back(std::stod(col.at(3)));
  }
  fs::remove_all(dir);
  if (m.wer.size() < 2) throw std::runtime_error("train " + tag + ": too few evaluations");
  return m;
}

const std::vector<int> kSeeds = {1, 2, 3};
const std::string kUnpruned[] = {"prune.posterior_beam=1e300", "prune.max_arcs_per_frame=0"};

std::vector<Metrics> &LatticeFreeRuns() {
  static std::vector<Metrics> runs;
  if (runs.empty())
    for (int s : kSeeds) runs.push_back(TrainRun("lf", {"seed=" + std::to_string(s)}));
  return runs;
}

void SilenceDrift(Verdict &v) {
  for (size_t i = 0; i < kSeeds.size(); i++) {
    const std::string seed = "seed=" + std::to_string(kSeeds[i]);
    const Metrics &lf1 = LatticeFreeRuns()[i];
    Metrics lf01 = TrainRun("lf01", {seed, "scales.am=0.1"});
    Metrics lb01 = TrainRun("lb01", {seed, "scales.am=0.1", "criterion=lattice_mmi"});
    const double rel = lb01.silence.back() / lb01.silence.front() - 1.0;
    v.Require(lf01.silence.back() > lf1.silence.back(), "lattice-free direction, " + seed);
    v.Require(std::fabs(rel) <= 0.2, "lattice drift, " + seed);
    v.detail << seed << ": lf(am0.1)=" << lf01.silence.back() << " lf(am1)=" << lf1.silence.back()
             << " lattice(am0.1) " << lb01.silence.front() << "->" << lb01.silence.back()
             << " (" << 100.0 * rel << "%)  ";
  }
}

void Parity(Verdict &v) {
  double lf_sum = 0.0, lb_sum = 0.0;
  for (size_t i = 0; i < kSeeds.size(); i++) {
    const std::string seed = "seed=" + std::to_string(kSeeds[i]);
    const Metrics &lf = LatticeFreeRuns()[i];
    Metrics lb = TrainRun("lbu", {seed, "criterion=lattice_mmi", kUnpruned[0], kUnpruned[1]});
    v.Require(lf.wer.back() < lf.wer.front(), "lattice-free did not improve, " + seed);
    v.Require(lb.wer.back() < lb.wer.front(), "lattice did not improve, " + seed);
    lf_sum += lf.wer.back();
    lb_sum += lb.wer.back();
    v.detail << seed << ": start=" << lf.wer.front() << " lf=" << lf.wer.back()
             << " lattice=" << lb.wer.back() << "  ";
  }
  const double gap = (lf_sum - lb_sum) / kSeeds.size();
  v.Require(std::fabs(gap) <= 0.5, "mean gap");
  v.detail << "mean gap=" << gap;
}

void Determinism(Verdict &v) {
  for (const std::string &crit : {"mmi", "smbr", "lattice_mmi"}) {
    std::string first;
    for (int rep = 0; rep < 2; rep++) {
      fs::path dir = ScratchDir("det" + std::to_string(rep));
      CliRun r = Cli({"train", "-c", kToyConfig, "--set", "criterion=" + crit,
                      "output_dir=" + dir.string()});
      v.Require(r.code == 0, "train exit " + std::to_string(r.code));
      std::string csv = ReadAll(dir / "metrics.csv");
      fs::remove_all(dir);
      v.Require(!csv.empty(), "empty metrics.csv");
      if (rep == 0)
        first = csv;
      else
        v.Require(csv == first, crit + " metrics differ");
    }
    v.detail << crit << ":identical ";
  }
}

}  // namespace
}  // namespace seqfb

int main() {
  using namespace seqfb;
  spdlog::set_level(spdlog::level::warn);
  struct Check {
    int id;
    const char *name;
    void (*run)(Verdict &);
  };
  const Check checks[] = {
      {1, "schedule equivalence", ScheduleEquivalence},
      {2, "sqrt(T) memory law", SqrtMemoryLaw},
      {3, "log(T) memory law", LogMemoryLaw},
      {4, "brute-force oracle", OracleCorrectness},
      {5, "gradient fidelity", GradientFidelity},
      {6, "mmi structure", MmiStructure},
      {7, "lattice bounding and degeneracy", LatticeBounding},
      {8, "silence drift", SilenceDrift},
      {9, "lattice-free vs unpruned lattice parity", Parity},
      {10, "determinism", Determinism},
  };
  int failed = 0;
  for (const Check &c : checks) {
    Verdict v;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception &e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1fs] %s\n", c.id, v.pass ? "PASS" : "FAIL", c.name,
                secs, v.detail.str().c_str());
    std::fflush(stdout);
    if (!v.pass) failed++;
  }
  return failed == 0 ? 0 : 1;
}
