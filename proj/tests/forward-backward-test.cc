#include <random>

#include "doctest.h"
#include "oracle.h"
#include "seqfb/forward-backward.h"
#include "seqfb/fst-ops.h"

namespace seqfb {
namespace {

FbOptions Sched(const std::string &s, double am = 1.0) {
  FbOptions o;
  o.am_scale = am;
  o.schedule = CheckpointSchedule::Parse(s);
  return o;
}

Automaton Chain(const std::vector<double> &w, const std::vector<Label> &cls) {
  AutomatonBuilder b;
  b.AddStates(static_cast<StateId>(w.size()) + 1);
  b.SetStart(0);
  for (size_t i = 0; i < w.size(); i++)
    b.AddArc(static_cast<StateId>(i), static_cast<StateId>(i + 1), cls[i], kEpsilon, w[i]);
  b.SetFinal(static_cast<StateId>(w.size()), 0.0);
  Label c = *std::max_element(cls.begin(), cls.end()) + 1;
  return std::move(b).Build(c, 0);
}

TEST_CASE("forward on a linear chain and on a self-loop") {
  Automaton chain = Chain({-0.1, -0.2, -0.3}, {0, 1, 2});
  CHECK(ForwardLogZ(chain, Matrix(3, 3), 1.0) == doctest::Approx(-0.6).epsilon(1e-15));

  AutomatonBuilder b;
  b.AddState();
  b.SetStart(0);
  b.SetFinal(0, -0.25);
  b.AddArc(0, 0, 0, kEpsilon, std::log(0.5));
  Automaton loop = std::move(b).Build(1, 0);
  for (size_t T : {1, 4, 9})
    CHECK(ForwardLogZ(loop, Matrix(T, 1), 1.0) ==
          doctest::Approx(T * std::log(0.5) - 0.25).epsilon(1e-14));
}

TEST_CASE("degenerate utterances name the shortest accepted length") {
  Automaton chain = Chain({-0.1, -0.2, -0.3}, {0, 1, 2});
  try {
    ForwardBackward(chain, Matrix(2, 3), Sched("none"));
    FAIL("expected an error");
  } catch (const DegenerateUtteranceError &e) {
    CHECK(e.MinLength() == 3);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("input checks") {
  Automaton chain = Chain({-0.1}, {0});
  CHECK_THROWS_AS(ForwardBackward(chain, Matrix(1, 3), Sched("none")), DataError);
  Matrix bad(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(ForwardBackward(chain, bad, Sched("none")), DataError);
  CHECK_THROWS_AS(ForwardBackward(chain, Matrix(1, 1), Sched("none", 0.0)), ConfigError);
  CHECK_THROWS_AS(CheckpointSchedule::Parse("sqrt"), ConfigError);
  CHECK_THROWS_AS(CheckpointSchedule::Parse("equidistant:0"), ConfigError);
  CHECK(CheckpointSchedule::Parse("equidistant:7").block_len == 7);
}

TEST_CASE("one-path graph gives one-hot occupancies") {
  Automaton chain = Chain({-0.1, -0.2, -0.3, -0.4}, {2, 0, 1, 0});
  std::mt19937_64 rng(4);
  Matrix x = testing::RandomScores(rng, 4, 3);
  FbResult r = ForwardBackward(chain, x, Sched("none"));
  std::vector<Label> cls = {2, 0, 1, 0};
  for (size_t t = 0; t < 4; t++)
    for (size_t c = 0; c < 3; c++)
      CHECK(r.gamma(t, c) == doctest::Approx(c == static_cast<size_t>(cls[t]) ? 1.0 : 0.0));
}

TEST_CASE("two symmetric paths split the occupancy evenly") {
  AutomatonBuilder b;
  b.AddStates(4);
  b.SetStart(0);
  b.SetFinal(3, 0.0);
  b.AddArc(0, 1, 0, kEpsilon, std::log(0.5));
  b.AddArc(0, 2, 1, kEpsilon, std::log(0.5));
  b.AddArc(1, 3, 2, kEpsilon, 0.0);
  b.AddArc(2, 3, 2, kEpsilon, 0.0);
  Automaton g = std::move(b).Build(3, 0);
  Matrix x(2, 3);
  x(0, 0) = x(0, 1) = -1.3;
  FbResult r = ForwardBackward(g, x, Sched("none"));
  CHECK(r.gamma(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.gamma(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.gamma(1, 2) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("forward-backward matches path enumeration") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; trial++) {
    std::uniform_int_distribution<StateId> ns(2, 8);
    std::uniform_int_distribution<size_t> nt(1, 6);
    Automaton g = testing::RandomGraph(rng, ns(rng), 4, 3);
    Matrix x = testing::RandomScores(rng, nt(rng), 4);
    testing::PathSum o = testing::EnumeratePaths(g, x, 0.7);
    if (o.log_z == kLogZero) {
      CHECK_THROWS_AS(ForwardBackward(g, x, Sched("none", 0.7)), DegenerateUtteranceError);
      continue;
    }
    for (const char *s : {"none", "equidistant:2", "logarithmic"}) {
      FbResult r = ForwardBackward(g, x, Sched(s, 0.7));
      CHECK(std::fabs(r.log_z - o.log_z) <= 1e-10);
      for (size_t i = 0; i < r.gamma.Data().size(); i++)
        CHECK(std::fabs(r.gamma.Data()[i] - o.gamma.Data()[i]) <= 1e-10);
    }
    ViterbiPath v = Viterbi(g, x, 0.7);
    CHECK(std::fabs(v.score - o.best) <= 1e-10);
    CHECK(v.score <= o.log_z + 1e-12);
  }
}

TEST_CASE("schedules agree bit for bit and report their counters") {
  std::mt19937_64 rng(123);
  Automaton g = testing::RandomGraph(rng, 20, 6, 3, 0.5);
  Matrix x = testing::RandomScores(rng, 100, 6);
  FbResult naive = ForwardBackward(g, x, Sched("none"));
  FbResult eq = ForwardBackward(g, x, Sched("equidistant:10"));
  FbResult lg = ForwardBackward(g, x, Sched("logarithmic"));
  CHECK(naive.log_z == eq.log_z);
  CHECK(naive.log_z == lg.log_z);
  CHECK(naive.gamma == eq.gamma);
  CHECK(naive.gamma == lg.gamma);

  CHECK(naive.counters.stored_alpha_vectors_peak == 101);
  CHECK(naive.counters.alpha_recompute_frames == 0);
  CHECK(naive.counters.arc_visits == static_cast<int64_t>(100 * g.NumArcs()));
  CHECK(eq.counters.stored_alpha_vectors_peak <= 21);
  CHECK(eq.counters.alpha_recompute_frames == 100);
  CHECK(lg.counters.stored_alpha_vectors_peak <= 7 + 2);
  CHECK(lg.counters.alpha_frames_computed <= 100 * 7);

  FbResult whole = ForwardBackward(g, x, Sched("equidistant:100"));
  CHECK(whole.counters.stored_alpha_vectors_peak == naive.counters.stored_alpha_vectors_peak);
  CHECK(whole.counters.alpha_recompute_frames == 0);
}

TEST_CASE("logarithmic schedule on one frame and on 1024 frames") {
  std::mt19937_64 rng(8);
  Automaton g = testing::RandomGraph(rng, 6, 3, 3, 0.8);
  Matrix x1 = testing::RandomScores(rng, 1, 3);
  FbResult r1 = ForwardBackward(g, x1, Sched("logarithmic"));
  CHECK(r1.counters.stored_alpha_vectors_peak == 2);
  CHECK(r1.log_z == ForwardBackward(g, x1, Sched("none")).log_z);

  Matrix x = testing::RandomScores(rng, 1024, 3);
  FbResult r = ForwardBackward(g, x, Sched("logarithmic"));
  CHECK(r.counters.stored_alpha_vectors_peak <= 12);
  CHECK(r.counters.alpha_frames_computed <= 10240);
  CHECK(r.gamma == ForwardBackward(g, x, Sched("none")).gamma);
}

TEST_CASE("occupancies normalize per frame and stay in range") {
  std::mt19937_64 rng(31);
  Automaton g = testing::RandomGraph(rng, 15, 5, 3, 0.5);
  Matrix x = testing::RandomScores(rng, 40, 5);
  for (const char *s : {"none", "equidistant", "logarithmic"}) {
    FbResult r = ForwardBackward(g, x, Sched(s));
    for (size_t t = 0; t < 40; t++) {
      double sum = 0.0;
      for (double v : r.gamma.Row(t)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
        sum += v;
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("state occupancy debug output sums to one per frame") {
  std::mt19937_64 rng(32);
  Automaton g = testing::RandomGraph(rng, 10, 4, 3, 0.5);
  Matrix x = testing::RandomScores(rng, 12, 4);
  FbOptions o = Sched("none");
  o.state_occupancy = true;
  FbResult r = ForwardBackward(g, x, o);
  REQUIRE(r.state_gamma.Rows() == 12);
  for (size_t t = 0; t < 12; t++) {
    double sum = 0.0;
    for (double v : r.state_gamma.Row(t)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("fast mode stays close to the exact result") {
  std::mt19937_64 rng(33);
  Automaton g = testing::RandomGraph(rng, 20, 5, 3, 0.5);
  Matrix x = testing::RandomScores(rng, 50, 5, 10.0);
  FbOptions o = Sched("none");
  FbResult exact = ForwardBackward(g, x, o);
  o.fast = true;
  FbResult fast = ForwardBackward(g, x, o);
  CHECK(std::fabs(exact.log_z - fast.log_z) <= 1e-9);
  for (size_t i = 0; i < exact.gamma.Data().size(); i++)
    CHECK(std::fabs(exact.gamma.Data()[i] - fast.gamma.Data()[i]) <= 1e-9);
}

TEST_CASE("expected reward and its gradient match enumeration") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; trial++) {
    Automaton g = testing::RandomGraph(rng, 6, 3, 3, 0.5);
    Matrix x = testing::RandomScores(rng, 5, 3);
    Matrix reward = testing::RandomScores(rng, 5, 3, 1.0);
    testing::PathSum o = testing::EnumeratePaths(g, x, 1.0);
    if (o.log_z == kLogZero) continue;
    // Brute force E[R] and gamma * (E[R | c at t] - E[R]).
    std::vector<std::pair<double, std::vector<Label>>> paths;
    std::vector<Label> cls;
    std::function<void(StateId, size_t, double)> dfs = [&](StateId s, size_t t, double w) {
      if (t == 5) {
        if (g.IsFinal(s)) paths.push_back({w + g.Final(s), cls});
        return;
      }
      for (const Arc &a : g.ArcsFrom(s)) {
        cls.push_back(a.emit);
        dfs(a.dst, t + 1, w + a.weight + x(t, a.emit));
        cls.pop_back();
      }
    };
    dfs(g.Start(), 0, 0.0);
    double er = 0.0;
    for (auto &p : paths) {
      double r = 0.0;
      for (size_t t = 0; t < 5; t++) r += reward(t, p.second[t]);
      er += std::exp(p.first - o.log_z) * r;
    }
    Matrix grad(5, 3);
    for (auto &p : paths) {
      double r = 0.0;
      for (size_t t = 0; t < 5; t++) r += reward(t, p.second[t]);
      for (size_t t = 0; t < 5; t++) grad(t, p.second[t]) += std::exp(p.first - o.log_z) * (r - er);
    }
    for (const char *s : {"none", "equidistant:2", "logarithmic"}) {
      FbResult fr = ForwardBackward(g, x, Sched(s), &reward);
      CHECK(fr.expected_reward == doctest::Approx(er).epsilon(1e-10));
      for (size_t i = 0; i < grad.Data().size(); i++)
        CHECK(std::fabs(fr.reward_grad.Data()[i] - grad.Data()[i]) <= 1e-10);
    }
  }
}

TEST_CASE("viterbi picks the better path with the exact margin and breaks ties low") {
  AutomatonBuilder b;
  b.AddStates(3);
  b.SetStart(0);
  b.SetFinal(1, 0.0);
  b.SetFinal(2, 0.0);
  b.AddArc(0, 1, 0, 5, -1.0);
  b.AddArc(0, 2, 1, 6, -1.0);
  Automaton g = std::move(b).Build(2, 7);
  Matrix x(1, 2);
  x(0, 1) = 0.75;
  ViterbiPath v = Viterbi(g, x, 1.0);
  CHECK(v.classes == std::vector<Label>{1});
  CHECK(v.words == std::vector<Label>{6});
  CHECK(v.score == doctest::Approx(-0.25));
  x(0, 1) = 0.0;
  CHECK(Viterbi(g, x, 1.0).arcs == std::vector<size_t>{0});
}

TEST_CASE("viterbi score never exceeds log_z") {
  std::mt19937_64 rng(55);
  int n = 0;
  while (n < 100) {
    Automaton g = testing::RandomGraph(rng, 12, 4, 3, 0.5);
    Matrix x = testing::RandomScores(rng, 20, 4);
    double lz;
    try {
      lz = ForwardLogZ(g, x, 1.0);
    } catch (const DegenerateUtteranceError &) {
      continue;
    }
    CHECK(Viterbi(g, x, 1.0).score <= lz + 1e-12);
    n++;
  }
}

}  // namespace
}  // namespace seqfb
