// Corpus generation, the toy acoustic model and the training loop.

#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "seqfb/fst-ops.h"
#include "seqfb/trainer.h"
#include "oracle.h"
#include "toy-setup.h"

namespace seqfb {
namespace {

GraphFactory ToyFactory() {
  NGramLM lm;
  lm.unigram = {{"a", std::log(0.5)}, {"b", std::log(0.3)}, {"c", std::log(0.2)}};
  return GraphFactory(testing::LexiconFromString("a x\nb y z\nc z x\n"), lm,
                      ContextMode::kMonophone, testing::LoopTopology(0.5));
}

CorpusConfig SmallCorpus(int64_t n, double noise, uint64_t seed = 1) {
  CorpusConfig c;
  c.num_utts = n;
  c.noise = noise;
  c.seed = seed;
  return c;
}

ToyAcousticModel InitModel(const GraphFactory &f, const SyntheticCorpus &train, int dim) {
  ToyAcousticModel m = ToyAcousticModel::Random(f.NumClasses(), dim, 3, 0.1);
  m.SetPriorsFromCounts(ClassCounts(train, f.NumClasses()));
  return m;
}

std::string MetricsText(const std::vector<EvalMetrics> &evals) {
  std::ostringstream os;
  WriteMetricsCsv(os, evals);
  return os.str();
}

TEST_CASE("corpus is reproducible from its seed") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus a = GenerateCorpus(f, SmallCorpus(20, 0.5));
  SyntheticCorpus b = GenerateCorpus(f, SmallCorpus(20, 0.5));
  std::ostringstream ta, tb;
  WriteCorpus(ta, a);
  WriteCorpus(tb, b);
  CHECK(ta.str() == tb.str());
  CHECK(!(GenerateCorpus(f, SmallCorpus(20, 0.5, 2)) == a));
  std::istringstream is(ta.str());
  CHECK(ReadCorpus(is, "corpus.txt") == a);
  for (const Utterance &u : a.utts) {
    CHECK(u.classes.size() == u.features.Rows());
    CHECK(u.features.Rows() >= static_cast<size_t>(ShortestAcceptedLength(f.Numerator(u.words))));
    CHECK(u.words.size() >= 1);
    CHECK(u.words.size() <= 4);
  }
}

TEST_CASE("corpus rejects impossible settings") {
  GraphFactory f = ToyFactory();
  CorpusConfig c = SmallCorpus(5, 0.5);
  c.min_words = 3;
  c.max_words = 2;
  CHECK_THROWS_AS(GenerateCorpus(f, c), ConfigError);
  c = SmallCorpus(5, -1.0);
  CHECK_THROWS_AS(GenerateCorpus(f, c), ConfigError);
  c = SmallCorpus(5, 0.5);
  c.dim = 0;
  CHECK_THROWS_AS(GenerateCorpus(f, c), ConfigError);
}

TEST_CASE("noiseless corpus is decoded without frame errors by the nearest-mean scorer") {
  GraphFactory f = ToyFactory();
  CorpusConfig c = SmallCorpus(20, 0.0);
  SyntheticCorpus corpus = GenerateCorpus(f, c);
  for (const Utterance &u : corpus.utts)
    for (size_t t = 0; t < u.classes.size(); t++)
      for (int d = 0; d < c.dim; d++) CHECK(u.features(t, d) == corpus.means(u.classes[t], d));
  // Linear discriminant of equal-variance Gaussians, sharpened so the
  // acoustics outweigh every transition and LM weight.
  ToyAcousticModel m(f.NumClasses(), c.dim);
  m.SetPriorScale(0.0);
  const double sharp = 100.0;
  for (Label k = 0; k < f.NumClasses(); k++) {
    double sq = 0.0;
    for (int d = 0; d < c.dim; d++) {
      m.Weights()(k, d) = sharp * corpus.means(k, d);
      sq += corpus.means(k, d) * corpus.means(k, d);
    }
    m.Bias()[k] = -0.5 * sharp * sq;
  }
  for (const Utterance &u : corpus.utts) {
    ViterbiPath vp = Viterbi(f.Denominator(), m.Scores(u.features), 1.0);
    CHECK(vp.classes == u.classes);
  }
}

TEST_CASE("sampled words follow the unigram model") {
  GraphFactory f = ToyFactory();
  CorpusConfig c = SmallCorpus(2500, 0.5);
  c.min_words = c.max_words = 4;
  c.dim = 1;
  SyntheticCorpus corpus = GenerateCorpus(f, c);
  std::map<Label, double> counts;
  double n = 0;
  for (const Utterance &u : corpus.utts)
    for (Label w : u.words) {
      counts[w] += 1;
      n += 1;
    }
  CHECK(n == 10000);
  const double p[] = {0.5, 0.3, 0.2};
  for (Label w = 0; w < 3; w++) {
    const double sd = std::sqrt(n * p[w] * (1 - p[w]));
    CHECK(std::fabs(counts[w] - n * p[w]) <= 3 * sd);
  }
}

TEST_CASE("model checkpoint round trip") {
  ToyAcousticModel m = ToyAcousticModel::Random(6, 4, 9, 0.5);
  m.SetPriorsFromCounts({1, 2, 3, 4, 5, 6});
  m.SetPriorScale(0.7);
  std::ostringstream os;
  m.Write(os);
  std::istringstream is(os.str());
  CHECK(ToyAcousticModel::Read(is, "m.bin") == m);
  std::string bad = os.str();
  bad[0] = 'X';
  std::istringstream bis(bad);
  CHECK_THROWS_AS(ToyAcousticModel::Read(bis, "m.bin"), DataError);
  std::istringstream cut(os.str().substr(0, 40));
  CHECK_THROWS_AS(ToyAcousticModel::Read(cut, "m.bin"), DataError);
}

TEST_CASE("model backward matches finite differences of a linear functional") {
  std::mt19937_64 rng(4);
  ToyAcousticModel m = ToyAcousticModel::Random(5, 3, 2, 0.7);
  Matrix x = testing::RandomScores(rng, 4, 3);
  Matrix g = testing::RandomScores(rng, 4, 5);
  auto f = [&](const ToyAcousticModel &mm) {
    Matrix s = mm.Scores(x);
    double v = 0;
    for (size_t i = 0; i < s.Data().size(); i++) v += s.Data()[i] * g.Data()[i];
    return v;
  };
  std::vector<double> an = m.Backward(x, g), p = m.Params();
  REQUIRE(an.size() == p.size());
  for (size_t i = 0; i < p.size(); i++) {
    ToyAcousticModel probe = m;
    std::vector<double> q = p;
    q[i] += 1e-6;
    probe.SetParams(q);
    const double up = f(probe);
    q[i] -= 2e-6;
    probe.SetParams(q);
    const double down = f(probe);
    CHECK(an[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("gradient check through the model") {
  GraphFactory f = ToyFactory();
  CorpusConfig c = SmallCorpus(1, 0.5);
  c.min_words = c.max_words = 1;
  c.silence_prob = 0.0;
  Utterance u;
  for (uint64_t s = 1;; s++) {
    c.seed = s;
    u = GenerateCorpus(f, c).utts[0];
    if (u.features.Rows() <= 10) break;
  }
  ToyAcousticModel m = ToyAcousticModel::Random(f.NumClasses(), c.dim, 5, 0.3);
  TrainConfig tc;
  for (CriterionKind k : {CriterionKind::kMmi, CriterionKind::kSmbr, CriterionKind::kLatticeMmi,
                          CriterionKind::kLatticeSmbr}) {
    tc.criterion = k;
    CAPTURE(CriterionName(k));
    CHECK(GradCheck(f, m, u, tc) < 1e-5);
    GradCheckOptions bad;
    bad.corrupt = 1e-2;
    CHECK(GradCheck(f, m, u, tc, bad) > 1e-4);
  }
  // No parameters, nothing to get wrong.
  ToyAcousticModel priors_only(f.NumClasses(), 0);
  priors_only.SetTrainBias(false);
  CHECK(priors_only.NumParams() == 0);
  tc.criterion = CriterionKind::kMmi;
  CHECK(GradCheck(f, priors_only, u, tc) == 0.0);
}

TEST_CASE("zero learning rate leaves the metrics unchanged") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus train = GenerateCorpus(f, SmallCorpus(20, 1.0));
  SyntheticCorpus eval = GenerateCorpus(f, SmallCorpus(10, 1.0, 7), train.means, "eval");
  ToyAcousticModel m = InitModel(f, train, 8);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 2;
  TrainResult r = Train(f, train, eval, m, tc);
  REQUIRE(r.evals.size() == 9);
  for (const EvalMetrics &e : r.evals) {
    CHECK(e.loss == r.evals[0].loss);
    CHECK(e.wer_proxy == r.evals[0].wer_proxy);
    CHECK(e.silence_ratio == r.evals[0].silence_ratio);
  }
  CHECK(r.evals.back().epoch == 2.0);
}

TEST_CASE("mmi training lowers the held-out word error") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus train = GenerateCorpus(f, SmallCorpus(100, 1.5));
  SyntheticCorpus eval = GenerateCorpus(f, SmallCorpus(60, 1.5, 7), train.means, "eval");
  ToyAcousticModel m = InitModel(f, train, 8);
  TrainConfig tc;
  tc.learning_rate = 0.2;
  tc.epochs = 2;
  tc.eval_every = 1.0;
  TrainResult r = Train(f, train, eval, m, tc);
  CAPTURE(MetricsText(r.evals));
  CHECK(r.evals.back().wer_proxy < r.evals.front().wer_proxy);
  CHECK(r.evals.back().loss < r.evals.front().loss);
}

TEST_CASE("training does not depend on the schedule, the workers or the run") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus train = GenerateCorpus(f, SmallCorpus(24, 1.0));
  SyntheticCorpus eval = GenerateCorpus(f, SmallCorpus(10, 1.0, 7), train.means, "eval");
  TrainConfig tc;
  tc.learning_rate = 0.2;
  tc.eval_every = 0.5;
  auto run = [&](const TrainConfig &c) {
    ToyAcousticModel m = InitModel(f, train, 8);
    return Train(f, train, eval, m, c).evals;
  };
  const std::vector<EvalMetrics> base = run(tc);
  CHECK(MetricsText(run(tc)) == MetricsText(base));
  for (const char *s : {"equidistant", "equidistant:3", "logarithmic"}) {
    TrainConfig c = tc;
    c.schedule = CheckpointSchedule::Parse(s);
    std::vector<EvalMetrics> e = run(c);
    REQUIRE(e.size() == base.size());
    for (size_t i = 0; i < e.size(); i++) {
      CHECK(std::fabs(e[i].loss - base[i].loss) <= 1e-8);
      CHECK(std::fabs(e[i].wer_proxy - base[i].wer_proxy) <= 1e-8);
      CHECK(std::fabs(e[i].silence_ratio - base[i].silence_ratio) <= 1e-8);
    }
  }
  TrainConfig b = tc;
  b.batch_size = 4;
  const std::string one = MetricsText(run(b));
  b.workers = 3;
  CHECK(MetricsText(run(b)) == one);
}

TEST_CASE("lattice criteria train end to end") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus train = GenerateCorpus(f, SmallCorpus(20, 1.0));
  SyntheticCorpus eval = GenerateCorpus(f, SmallCorpus(8, 1.0, 7), train.means, "eval");
  for (CriterionKind k : {CriterionKind::kLatticeMmi, CriterionKind::kLatticeSmbr}) {
    TrainConfig tc;
    tc.criterion = k;
    tc.learning_rate = 0.1;
    ToyAcousticModel m = InitModel(f, train, 8);
    TrainResult r = Train(f, train, eval, m, tc);
    CHECK(r.eval_lattices.size() == eval.utts.size());
    for (const EvalMetrics &e : r.evals) CHECK(std::isfinite(e.loss));
    if (k == CriterionKind::kLatticeMmi)
      for (const EvalMetrics &e : r.evals) CHECK(e.loss >= -1e-12);
  }
}

TEST_CASE("utterances without an alignment are skipped and counted") {
  GraphFactory f = ToyFactory();
  SyntheticCorpus train = GenerateCorpus(f, SmallCorpus(6, 1.0));
  SyntheticCorpus eval = GenerateCorpus(f, SmallCorpus(4, 1.0, 7), train.means, "eval");
  Utterance bad = train.utts[0];
  bad.id = "short";
  bad.features = Matrix(2, bad.features.Cols());
  bad.classes.resize(2);
  train.utts.push_back(bad);
  for (CriterionKind k : {CriterionKind::kMmi, CriterionKind::kLatticeMmi}) {
    TrainConfig tc;
    tc.criterion = k;
    tc.eval_every = 1.0;
    ToyAcousticModel m = InitModel(f, train, 8);
    TrainResult r = Train(f, train, eval, m, tc);
    CHECK(r.evals.back().skipped_utts == 1);
  }
}

TEST_CASE("criterion names") {
  CHECK(ParseCriterion("lattice_smbr") == CriterionKind::kLatticeSmbr);
  try {
    ParseCriterion("bmmi");
    FAIL("expected an error");
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    for (const char *n : {"mmi", "smbr", "lattice_mmi", "lattice_smbr"})
      CHECK(msg.find(n) != std::string::npos);
  }
  TrainConfig tc;
  tc.learning_rate = 0.0;
  CHECK_NOTHROW(tc.Check());
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(tc.Check(), ConfigError);
  tc = TrainConfig{};
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.Check(), ConfigError);
}

TEST_CASE("edit distance") {
  CHECK(EditDistance({}, {}) == 0);
  CHECK(EditDistance({1, 2, 3}, {1, 3}) == 1);
  CHECK(EditDistance({1, 2}, {2, 1}) == 2);
  CHECK(EditDistance({}, {4, 4}) == 2);
}

}  // namespace
}  // namespace seqfb
