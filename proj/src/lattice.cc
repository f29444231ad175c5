// seqfb/lattice.cc

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

#include "seqfb/lattice.h"

#include <algorithm>
#include <istream>
#include <map>
#include <set>
#include <tuple>
#include <numeric>
#include <ostream>
#include <sstream>

#include "seqfb/fst-ops.h"

namespace seqfb {

void Lattice::Check() const {
  if (node_times.empty()) throw DataError("lattice has no nodes");
  if (node_times[0] != 0) throw DataError("lattice node 0 must be at time 0");
  const int32_t n = static_cast<int32_t>(node_times.size());
  for (int32_t i = 1; i < n; i++)
    if (node_times[i] < node_times[i - 1])
      throw DataError("lattice node times must not decrease with node id");
  if (n > 1 && node_times[n - 1] == node_times[n - 2])
    throw DataError("lattice end node shares its time with another node");
  std::vector<bool> reach(n, false);
  reach[0] = true;
  std::vector<size_t> order(arcs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return arcs[a].src < arcs[b].src; });
  for (size_t i : order) {
    const LatticeArc &a = arcs[i];
    if (a.src < 0 || a.src >= n || a.dst < 0 || a.dst >= n)
      throw DataError("lattice arc " + std::to_string(i) + " has an invalid node");
    if (node_times[a.src] >= node_times[a.dst])
      throw DataError("lattice arc " + std::to_string(i) + " does not advance in time");
    if (static_cast<int64_t>(a.states.size()) != node_times[a.dst] - node_times[a.src])
      throw DataError("lattice arc " + std::to_string(i) + " state path has wrong length");
    if (!std::isfinite(a.am_score) || !std::isfinite(a.lm_score))
      throw DataError("lattice arc " + std::to_string(i) + " has a non-finite score");
    if (reach[a.src]) reach[a.dst] = true;
  }
  if (!reach[n - 1]) throw DataError("lattice has no complete path");
}

void WriteLattice(std::ostream &os, const Lattice &lat, const SymbolTable *words) {
  for (size_t i = 0; i < lat.node_times.size(); i++)
    os << "N " << i << ' ' << lat.node_times[i] << '\n';
  for (const LatticeArc &a : lat.arcs) {
    os << "A " << a.src << ' ' << a.dst << ' '
       << (words && a.word != kEpsilon ? words->Name(a.word) : FormatLabel(a.word)) << ' '
       << FormatWeight(a.am_score) << ' ' << FormatWeight(a.lm_score) << ' ';
    for (size_t j = 0; j < a.states.size(); j++) os << (j ? "," : "") << a.states[j];
    os << '\n';
  }
  os << "F " << FormatWeight(lat.final_lm) << '\n';
}

namespace {

double ParseDouble(const std::string &tok, const std::string &where) {
  char *end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size())
    throw DataError(where + ": bad number '" + tok + "'");
  return v;
}

int64_t ParseInt64(const std::string &tok, const std::string &where) {
  char *end = nullptr;
  long long v = std::strtoll(tok.c_str(), &end, 10);
  if (tok.empty() || end != tok.c_str() + tok.size())
    throw DataError(where + ": bad integer '" + tok + "'");
  return v;
}

}  // namespace

Lattice ReadLattice(std::istream &is, const std::string &source_name, const SymbolTable *words) {
  Lattice lat;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (tok[0] == "N" && tok.size() == 3) {
      if (ParseInt64(tok[1], where) != static_cast<int64_t>(lat.node_times.size()))
        throw DataError(where + ": node ids must be consecutive from 0");
      lat.node_times.push_back(ParseInt64(tok[2], where));
    } else if (tok[0] == "A" && (tok.size() == 7 || tok.size() == 6)) {
      LatticeArc a;
      a.src = static_cast<int32_t>(ParseInt64(tok[1], where));
      a.dst = static_cast<int32_t>(ParseInt64(tok[2], where));
      if (tok[3] == "<eps>") {
        a.word = kEpsilon;
      } else if (words) {
        auto id = words->Find(tok[3]);
        if (!id) throw DataError(where + ": unknown word '" + tok[3] + "'");
        a.word = *id;
      } else {
        a.word = static_cast<Label>(ParseInt64(tok[3], where));
      }
      a.am_score = ParseDouble(tok[4], where);
      a.lm_score = ParseDouble(tok[5], where);
      if (tok.size() == 7) {
        std::istringstream ss(tok[6]);
        for (std::string s; std::getline(ss, s, ',');)
          a.states.push_back(static_cast<Label>(ParseInt64(s, where)));
      }
      lat.arcs.push_back(std::move(a));
    } else if (tok[0] == "F" && tok.size() == 2) {
      lat.final_lm = ParseDouble(tok[1], where);
    } else {
      throw DataError(where + ": unrecognized lattice line");
    }
  }
  try {
    lat.Check();
  } catch (const DataError &e) {
    throw DataError(source_name + ": " + e.what());
  }
  return lat;
}

void PruneConfig::Check() const {
  if (!(posterior_beam > 0.0)) throw ConfigError("posterior_beam must be positive");
  if (max_arcs_per_frame < 0) throw ConfigError("max_arcs_per_frame must be >= 0");
}

namespace {

// Score of every path through `g` that starts at frame ts, indexed by
// te - ts - 1 for end frames te in (ts, T].  Log-sum or max.
std::vector<double> SegmentScores(const Automaton &g, ScoreView x, size_t ts, double am,
                                  bool best) {
  const size_t T = x.NumFrames(), S = g.NumStates();
  std::vector<double> a(S, kLogZero), b(S), out(T - ts, kLogZero);
  a[g.Start()] = kLogOne;
  for (size_t t = ts; t < T; t++) {
    std::fill(b.begin(), b.end(), kLogZero);
    bool alive = false;
    const auto xt = x.Row(t);
    for (size_t s = 0; s < S; s++) {
      if (a[s] == kLogZero) continue;
      for (const Arc &arc : g.ArcsFrom(s)) {
        double v = a[s] + arc.weight + am * xt[arc.emit];
        if (best) {
          if (v > b[arc.dst]) b[arc.dst] = v;
        } else {
          b[arc.dst] = LogAdd(b[arc.dst], v);
        }
        alive = true;
      }
    }
    std::swap(a, b);
    if (!alive) break;
    double tot = kLogZero;
    for (size_t s = 0; s < S; s++) {
      double v = a[s] + g.Final(s);
      tot = best ? std::max(tot, v) : LogAdd(tot, v);
    }
    out[t - ts] = tot;
  }
  return out;
}

// Best transition weight (final weight included) of a path through g that
// emits exactly `classes`.
double PathGraphWeight(const Automaton &g, const std::vector<Label> &classes) {
  const size_t S = g.NumStates();
  std::vector<double> a(S, kLogZero), b(S);
  a[g.Start()] = kLogOne;
  for (Label c : classes) {
    std::fill(b.begin(), b.end(), kLogZero);
    for (size_t s = 0; s < S; s++) {
      if (a[s] == kLogZero) continue;
      for (const Arc &arc : g.ArcsFrom(s))
        if (arc.emit == c) b[arc.dst] = std::max(b[arc.dst], a[s] + arc.weight);
    }
    std::swap(a, b);
  }
  double best = kLogZero;
  for (size_t s = 0; s < S; s++) best = std::max(best, a[s] + g.Final(s));
  return best;
}

// Word histories used by the lattice DPs: index 0 is the sentence start,
// index w + 1 the word w.  A unigram model needs only index 0.
struct Histories {
  const GraphFactory &f;
  bool bigram;
  const NGramLM *lm;  // model providing the LM weights

  int Count() const { return bigram ? f.VocabSize() + 1 : 1; }
  static Label Word(int h) { return h == 0 ? kEpsilon : h - 1; }
  int Next(int h, Label word) const {
    if (word == kEpsilon) return h;
    return bigram ? word + 1 : 0;
  }
  double Lm(int h, Label word) const {
    if (word == kEpsilon) return kLogOne;
    const std::string &hn = h == 0 ? kSentenceBegin : f.Lex().words.Name(Word(h));
    return f.Options().lm_scale * lm->Score(hn, f.Lex().words.Name(word));
  }
  double End(int h) const {
    const std::string &hn = h == 0 ? kSentenceBegin : f.Lex().words.Name(Word(h));
    return f.Options().lm_scale * lm->EndScore(hn);
  }
};

}  // namespace

Lattice GenerateLattice(const GraphFactory &factory, ScoreView scores, double am_scale,
                        const PruneConfig &cfg) {
  cfg.Check();
  if (!(am_scale > 0.0)) throw ConfigError("am_scale must be positive");
  CheckScores(scores, static_cast<size_t>(factory.NumClasses()));
  const size_t T = scores.NumFrames();
  std::vector<Label> types;
  if (factory.Options().lexicon.allow_optional_silence) types.push_back(kEpsilon);
  for (Label w = 0; w < factory.VocabSize(); w++) types.push_back(w);
  const size_t K = types.size();

  // best[k][ts][te - ts - 1]: best path of segment type k over [ts, te).
  std::vector<std::vector<std::vector<double>>> best(K, std::vector<std::vector<double>>(T));
  for (size_t k = 0; k < K; k++)
    for (size_t ts = 0; ts < T; ts++)
      best[k][ts] = SegmentScores(factory.Segment(types[k]), scores, ts, am_scale, true);

  const Histories hist{factory, factory.Lm().order == 2, &factory.Lm()};
  const int H = hist.Count();
  std::vector<double> fwd((T + 1) * H, kLogZero), bwd((T + 1) * H, kLogZero);
  fwd[0] = kLogOne;
  for (size_t ts = 0; ts < T; ts++) {
    for (int h = 0; h < H; h++) {
      const double f = fwd[ts * H + h];
      if (f == kLogZero) continue;
      for (size_t k = 0; k < K; k++) {
        const double lm = hist.Lm(h, types[k]);
        const int nh = hist.Next(h, types[k]);
        for (size_t te = ts + 1; te <= T; te++) {
          double v = f + best[k][ts][te - ts - 1] + lm;
          double &dst = fwd[te * H + nh];
          if (v > dst) dst = v;
        }
      }
    }
  }
  for (int h = 0; h < H; h++) bwd[T * H + h] = hist.End(h);
  for (size_t ts = T; ts-- > 0;) {
    for (int h = 0; h < H; h++) {
      double b = kLogZero;
      for (size_t k = 0; k < K; k++) {
        const double lm = hist.Lm(h, types[k]);
        const int nh = hist.Next(h, types[k]);
        for (size_t te = ts + 1; te <= T; te++)
          b = std::max(b, best[k][ts][te - ts - 1] + lm + bwd[te * H + nh]);
      }
      bwd[ts * H + h] = b;
    }
  }
  const double best_score = bwd[0];
  if (best_score == kLogZero) {
    int64_t min_len = ShortestAcceptedLength(factory.Denominator());
    throw DegenerateUtteranceError("no denominator path of " + std::to_string(T) + " frames",
                                   min_len);
  }

  struct Cand {
    size_t ts, te, k;
    double mm, lm;
  };
  std::vector<Cand> cands;
  for (size_t ts = 0; ts < T; ts++) {
    std::vector<Cand> here;
    for (size_t k = 0; k < K; k++) {
      for (size_t te = ts + 1; te <= T; te++) {
        const double v = best[k][ts][te - ts - 1];
        if (v == kLogZero) continue;
        Cand c{ts, te, k, kLogZero, 0.0};
        for (int h = 0; h < H; h++) {
          if (fwd[ts * H + h] == kLogZero) continue;
          const double lm = hist.Lm(h, types[k]);
          double m = fwd[ts * H + h] + v + lm + bwd[te * H + hist.Next(h, types[k])];
          if (m > c.mm) {
            c.mm = m;
            c.lm = lm;
          }
        }
        if (c.mm == kLogZero) continue;
        if (std::isinf(cfg.posterior_beam) || c.mm >= best_score - cfg.posterior_beam)
          here.push_back(c);
      }
    }
    if (cfg.max_arcs_per_frame > 0 &&
        here.size() > static_cast<size_t>(cfg.max_arcs_per_frame)) {
      std::stable_sort(here.begin(), here.end(),
                       [](const Cand &a, const Cand &b) { return a.mm > b.mm; });
      here.resize(static_cast<size_t>(cfg.max_arcs_per_frame));
    }
    cands.insert(cands.end(), here.begin(), here.end());
  }
  std::sort(cands.begin(), cands.end(), [](const Cand &a, const Cand &b) {
    return std::tie(a.ts, a.te, a.k) < std::tie(b.ts, b.te, b.k);
  });

  // Keep only arcs on complete paths.
  std::vector<bool> from_start(T + 1, false), to_end(T + 1, false);
  from_start[0] = true;
  for (const Cand &c : cands)
    if (from_start[c.ts]) from_start[c.te] = true;
  to_end[T] = true;
  for (size_t i = cands.size(); i-- > 0;)
    if (to_end[cands[i].te]) to_end[cands[i].ts] = true;

  Lattice lat;
  std::vector<int32_t> node_of(T + 1, -1);
  for (size_t t = 0; t <= T; t++) {
    if (from_start[t] && to_end[t]) {
      node_of[t] = static_cast<int32_t>(lat.node_times.size());
      lat.node_times.push_back(static_cast<int64_t>(t));
    }
  }
  for (const Cand &c : cands) {
    if (node_of[c.ts] < 0 || node_of[c.te] < 0) continue;
    LatticeArc a;
    a.src = node_of[c.ts];
    a.dst = node_of[c.te];
    a.word = types[c.k];
    a.lm_score = c.lm;
    ViterbiPath p = Viterbi(factory.Segment(a.word), scores.Frames(c.ts, c.te), am_scale);
    a.am_score = p.score;
    a.states = std::move(p.classes);
    lat.arcs.push_back(std::move(a));
  }
  double best_end = kLogZero;
  int best_h = 0;
  for (int h = 0; h < H; h++) {
    double v = fwd[T * H + h] + hist.End(h);
    if (v > best_end) {
      best_end = v;
      best_h = h;
    }
  }
  lat.final_lm = hist.End(best_h);
  if (node_of[0] != 0 || node_of[T] < 0)
    throw NumericalError("lattice lost the best path during pruning");
  lat.Check();
  return lat;
}

Lattice ReferenceLattice(const GraphFactory &factory, const std::vector<Label> &words,
                         ScoreView scores, double am_scale) {
  if (!(am_scale > 0.0)) throw ConfigError("am_scale must be positive");
  CheckScores(scores, static_cast<size_t>(factory.NumClasses()));
  for (Label w : words)
    if (w < 0 || w >= factory.VocabSize())
      throw DataError("reference contains out-of-vocabulary word id " + std::to_string(w));
  const size_t T = scores.NumFrames(), N = words.size();
  const bool sil = factory.Options().lexicon.allow_optional_silence;
  const bool use_lm = factory.Options().numerator_lm;

  // Segment feasibility, by the same best-path scores the den lattice uses.
  std::map<Label, std::vector<std::vector<double>>> best;
  auto segs = [&](Label w) -> const std::vector<std::vector<double>> & {
    auto it = best.find(w);
    if (it != best.end()) return it->second;
    std::vector<std::vector<double>> b(T);
    for (size_t ts = 0; ts < T; ts++)
      b[ts] = SegmentScores(factory.Segment(w), scores, ts, am_scale, true);
    return best.emplace(w, std::move(b)).first->second;
  };
  struct Seg {
    size_t i, ts, te;  // position before the arc, times
    Label word;
  };
  std::vector<Seg> all;
  for (size_t i = 0; i <= N; i++) {
    std::vector<Label> kinds;
    if (sil) kinds.push_back(kEpsilon);
    if (i < N) kinds.push_back(words[i]);
    for (Label w : kinds) {
      const auto &b = segs(w);
      for (size_t ts = 0; ts < T; ts++)
        for (size_t te = ts + 1; te <= T; te++)
          if (b[ts][te - ts - 1] != kLogZero) all.push_back({i, ts, te, w});
    }
  }
  // Nodes (i, t) on complete paths from (0, 0) to (N, T).
  auto id = [&](size_t i, size_t t) { return t * (N + 1) + i; };
  std::vector<char> fwd((T + 1) * (N + 1), 0), bwd((T + 1) * (N + 1), 0);
  auto next = [&](const Seg &s) { return s.word == kEpsilon ? s.i : s.i + 1; };
  std::sort(all.begin(), all.end(), [](const Seg &a, const Seg &b) {
    return std::tie(a.ts, a.te, a.i, a.word) < std::tie(b.ts, b.te, b.i, b.word);
  });
  fwd[id(0, 0)] = 1;
  for (const Seg &s : all)
    if (fwd[id(s.i, s.ts)]) fwd[id(next(s), s.te)] = 1;
  bwd[id(N, T)] = 1;
  for (size_t k = all.size(); k-- > 0;)
    if (bwd[id(next(all[k]), all[k].te)]) bwd[id(all[k].i, all[k].ts)] = 1;
  if (!fwd[id(N, T)]) {
    int64_t min_len = ShortestAcceptedLength(factory.Numerator(words));
    throw DegenerateUtteranceError("no alignment of the reference in " + std::to_string(T) +
                                       " frames",
                                   min_len);
  }

  Lattice lat;
  std::vector<int32_t> node_of((T + 1) * (N + 1), -1);
  for (size_t t = 0; t <= T; t++)
    for (size_t i = 0; i <= N; i++)
      if (fwd[id(i, t)] && bwd[id(i, t)]) {
        node_of[id(i, t)] = static_cast<int32_t>(lat.node_times.size());
        lat.node_times.push_back(static_cast<int64_t>(t));
      }
  for (const Seg &s : all) {
    const int32_t a = node_of[id(s.i, s.ts)], b = node_of[id(next(s), s.te)];
    if (a < 0 || b < 0) continue;
    LatticeArc arc;
    arc.src = a;
    arc.dst = b;
    arc.word = s.word;
    if (use_lm && s.word != kEpsilon)
      arc.lm_score = factory.SegmentLmScore(s.i == 0 ? kEpsilon : words[s.i - 1], s.word);
    ViterbiPath p = Viterbi(factory.Segment(s.word), scores.Frames(s.ts, s.te), am_scale);
    arc.am_score = p.score;
    arc.states = std::move(p.classes);
    lat.arcs.push_back(std::move(arc));
  }
  if (use_lm) lat.final_lm = factory.EndLmScore(N == 0 ? kEpsilon : words[N - 1]);
  lat.Check();
  return lat;
}

Lattice UnionArcs(const Lattice &lat, const Lattice &extra) {
  lat.Check();
  extra.Check();
  if (lat.NumFrames() != extra.NumFrames())
    throw DataError("cannot merge lattices of " + std::to_string(lat.NumFrames()) + " and " +
                    std::to_string(extra.NumFrames()) + " frames");
  const size_t T = static_cast<size_t>(lat.NumFrames());
  for (size_t i = 1; i < lat.node_times.size(); i++)
    if (lat.node_times[i] == lat.node_times[i - 1])
      throw DataError("UnionArcs needs one node per time in its first lattice");
  std::vector<LatticeArc> arcs;
  std::set<std::tuple<int64_t, int64_t, Label>> have;
  for (const Lattice *l : {&lat, &extra}) {
    for (const LatticeArc &a : l->arcs) {
      auto key = std::make_tuple(l->node_times[a.src], l->node_times[a.dst], a.word);
      if (!have.insert(key).second) continue;
      LatticeArc c = a;
      c.src = static_cast<int32_t>(std::get<0>(key));  // times for now
      c.dst = static_cast<int32_t>(std::get<1>(key));
      arcs.push_back(std::move(c));
    }
  }
  // Both inputs consist of complete paths, so every time used is on one.
  std::vector<int32_t> node_of(T + 1, -1);
  for (const LatticeArc &a : arcs) node_of[a.src] = node_of[a.dst] = 0;
  Lattice out;
  for (size_t t = 0; t <= T; t++)
    if (node_of[t] == 0) {
      node_of[t] = static_cast<int32_t>(out.node_times.size());
      out.node_times.push_back(static_cast<int64_t>(t));
    }
  std::stable_sort(arcs.begin(), arcs.end(), [](const LatticeArc &a, const LatticeArc &b) {
    return std::tie(a.src, a.dst, a.word) < std::tie(b.src, b.dst, b.word);
  });
  for (LatticeArc &a : arcs) {
    a.src = node_of[a.src];
    a.dst = node_of[a.dst];
  }
  out.arcs = std::move(arcs);
  out.final_lm = lat.final_lm;
  out.Check();
  return out;
}

UtteranceLattices MakeUtteranceLattices(const GraphFactory &factory,
                                        const std::vector<Label> &words, ScoreView scores,
                                        double am_scale, const PruneConfig &cfg) {
  UtteranceLattices u;
  u.num = ReferenceLattice(factory, words, scores, am_scale);
  u.den = UnionArcs(GenerateLattice(factory, scores, am_scale, cfg), u.num);
  return u;
}

namespace {

struct ArcEval {
  double score = kLogZero;  // transition + acoustic, no LM
  double reward = 0.0;      // (expected) within-arc reward
  Matrix gamma;             // full-sum only: len x C
  Matrix reward_grad;       // full-sum with reward only
};

std::vector<ArcEval> EvaluateArcs(const Lattice &lat, const GraphFactory &factory,
                                  ScoreView x, double am, ArcScoring scoring,
                                  const Matrix *reward) {
  std::vector<ArcEval> ev(lat.arcs.size());
  for (size_t i = 0; i < lat.arcs.size(); i++) {
    const LatticeArc &a = lat.arcs[i];
    const size_t ts = static_cast<size_t>(lat.node_times[a.src]);
    const size_t te = static_cast<size_t>(lat.node_times[a.dst]);
    const Automaton &seg = factory.Segment(a.word);
    if (scoring == ArcScoring::kBestPath) {
      double gw = PathGraphWeight(seg, a.states);
      if (gw == kLogZero)
        throw DataError("lattice arc " + std::to_string(i) +
                        " has a state path its word cannot produce");
      double s = gw;
      for (size_t j = 0; j < a.states.size(); j++) {
        s += am * x(ts + j, a.states[j]);
        if (reward) ev[i].reward += (*reward)(ts + j, a.states[j]);
      }
      ev[i].score = s;
    } else {
      FbOptions fb;
      fb.am_scale = am;
      Matrix sub;
      if (reward) {
        sub = Matrix(te - ts, x.NumClasses());
        for (size_t t = ts; t < te; t++)
          std::copy(reward->Row(t).begin(), reward->Row(t).end(), sub.Row(t - ts).begin());
      }
      FbResult r = ForwardBackward(seg, x.Frames(ts, te), fb, reward ? &sub : nullptr);
      ev[i].score = r.log_z;
      ev[i].gamma = std::move(r.gamma);
      if (reward) {
        ev[i].reward = r.expected_reward;
        ev[i].reward_grad = std::move(r.reward_grad);
      }
    }
  }
  return ev;
}

// Forward-backward over the lattice expanded with LM histories.
struct DagResult {
  double log_z = kLogZero;
  double expected_reward = 0.0;
  std::vector<double> arc_post;  // per lattice arc, summed over histories
  std::vector<double> arc_post_gain;  // per lattice arc: sum P * (E[R|x] - E[R])
};

DagResult LatticeDag(const Lattice &lat, const GraphFactory &factory,
                     const std::vector<ArcEval> &ev, const LatticeOptions &lopts,
                     bool with_reward) {
  const bool rescore = lopts.rescore_lm != nullptr;
  if (rescore) lopts.rescore_lm->Check();
  const Histories hist{factory, rescore && lopts.rescore_lm->order == 2, lopts.rescore_lm};
  const int H = rescore ? hist.Count() : 1;
  const size_t N = lat.node_times.size();
  std::vector<size_t> order(lat.arcs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return lat.arcs[a].src < lat.arcs[b].src; });

  struct DagArc {
    size_t from, to, arc;
    double w, r;
  };
  std::vector<DagArc> dag;
  std::vector<double> alpha(N * H, kLogZero), ahat(N * H, 0.0);
  alpha[0] = kLogOne;
  size_t next = 0;
  for (size_t n = 0; n < N; n++) {
    while (next < order.size() && static_cast<size_t>(lat.arcs[order[next]].src) < n) next++;
    for (int h = 0; h < H; h++) {
      const size_t u = n * H + h;
      if (alpha[u] == kLogZero) continue;
      for (size_t j = next; j < order.size() && static_cast<size_t>(lat.arcs[order[j]].src) == n;
           j++) {
        const size_t i = order[j];
        const LatticeArc &a = lat.arcs[i];
        if (ev[i].score == kLogZero) continue;
        const double lm = rescore ? hist.Lm(h, a.word) : a.lm_score;
        const int nh = rescore ? hist.Next(h, a.word) : 0;
        DagArc d{u, static_cast<size_t>(a.dst) * H + nh, i, ev[i].score + lm, ev[i].reward};
        alpha[d.to] = LogAdd(alpha[d.to], alpha[u] + d.w);
        dag.push_back(d);
      }
    }
  }
  DagResult out;
  const size_t last = N - 1;
  std::vector<double> fin(H);
  for (int h = 0; h < H; h++) {
    fin[h] = rescore ? hist.End(h) : lat.final_lm;
    out.log_z = LogAdd(out.log_z, alpha[last * H + h] + fin[h]);
  }
  if (out.log_z == kLogZero)
    throw DegenerateUtteranceError("lattice has no path with the current scores", -1);
  if (with_reward) {
    for (const DagArc &d : dag)
      ahat[d.to] += std::exp(alpha[d.from] + d.w - alpha[d.to]) * (ahat[d.from] + d.r);
    for (int h = 0; h < H; h++) {
      const size_t u = last * H + h;
      if (alpha[u] != kLogZero)
        out.expected_reward += std::exp(alpha[u] + fin[h] - out.log_z) * ahat[u];
    }
  }
  std::vector<double> beta(N * H, kLogZero), bhat(N * H, 0.0);
  for (int h = 0; h < H; h++) beta[last * H + h] = fin[h];
  for (size_t j = dag.size(); j-- > 0;)
    beta[dag[j].from] = LogAdd(beta[dag[j].from], dag[j].w + beta[dag[j].to]);
  if (with_reward) {
    for (size_t j = dag.size(); j-- > 0;) {
      const DagArc &d = dag[j];
      if (beta[d.from] == kLogZero || beta[d.to] == kLogZero) continue;
      bhat[d.from] += std::exp(d.w + beta[d.to] - beta[d.from]) * (d.r + bhat[d.to]);
    }
  }
  out.arc_post.assign(lat.arcs.size(), 0.0);
  out.arc_post_gain.assign(lat.arcs.size(), 0.0);
  for (const DagArc &d : dag) {
    if (beta[d.to] == kLogZero) continue;
    const double p = std::exp(alpha[d.from] + d.w + beta[d.to] - out.log_z);
    out.arc_post[d.arc] += p;
    if (with_reward)
      out.arc_post_gain[d.arc] += p * (ahat[d.from] + d.r + bhat[d.to] - out.expected_reward);
  }
  return out;
}

void CheckLatticeLength(const Lattice &lat, ScoreView scores) {
  lat.Check();
  if (lat.NumFrames() != static_cast<int64_t>(scores.NumFrames()))
    throw DataError("lattice covers " + std::to_string(lat.NumFrames()) +
                    " frames but the utterance has " + std::to_string(scores.NumFrames()));
}

// Adds coef * (occupancy of arc i) into m at the arc's frames.
void AddArcOccupancy(const Lattice &lat, size_t i, const ArcEval &ev, double coef,
                     const Matrix *within, Matrix *m) {
  const LatticeArc &a = lat.arcs[i];
  const size_t ts = static_cast<size_t>(lat.node_times[a.src]);
  if (ev.gamma.Rows() == 0) {
    for (size_t j = 0; j < a.states.size(); j++) (*m)(ts + j, a.states[j]) += coef;
    return;
  }
  const Matrix &g = within ? *within : ev.gamma;
  for (size_t j = 0; j < g.Rows(); j++)
    for (size_t c = 0; c < g.Cols(); c++) (*m)(ts + j, c) += coef * g(j, c);
}

}  // namespace

double LatticeLogSum(const Lattice &lat, const GraphFactory &factory, ScoreView scores,
                     double am_scale, const LatticeOptions &lopts) {
  CheckLatticeLength(lat, scores);
  CheckScores(scores, static_cast<size_t>(factory.NumClasses()));
  auto ev = EvaluateArcs(lat, factory, scores, am_scale, lopts.scoring, nullptr);
  return LatticeDag(lat, factory, ev, lopts, false).log_z;
}

CriterionOutput LatticeMmi(const Lattice &den, const Lattice &num, const GraphFactory &factory,
                           ScoreView scores, const CriterionOptions &opts,
                           const LatticeOptions &lopts) {
  CheckLatticeLength(den, scores);
  CheckLatticeLength(num, scores);
  CheckScores(scores, static_cast<size_t>(factory.NumClasses()));
  // The numerator follows the numerator graph: no LM unless it has one.
  LatticeOptions nopts = lopts;
  if (!factory.Options().numerator_lm) nopts.rescore_lm = nullptr;
  auto evn = EvaluateArcs(num, factory, scores, opts.am_scale, lopts.scoring, nullptr);
  DagResult n = LatticeDag(num, factory, evn, nopts, false);
  auto evd = EvaluateArcs(den, factory, scores, opts.am_scale, lopts.scoring, nullptr);
  DagResult d = LatticeDag(den, factory, evd, lopts, false);
  Matrix occ(scores.NumFrames(), scores.NumClasses());
  for (size_t i = 0; i < den.arcs.size(); i++)
    if (d.arc_post[i] != 0.0) AddArcOccupancy(den, i, evd[i], d.arc_post[i], nullptr, &occ);
  for (size_t i = 0; i < num.arcs.size(); i++)
    if (n.arc_post[i] != 0.0) AddArcOccupancy(num, i, evn[i], -n.arc_post[i], nullptr, &occ);
  CriterionOutput out;
  out.loss = d.log_z - n.log_z;
  out.grad = std::move(occ);
  for (double &v : out.grad.Data()) v *= opts.am_scale;
  out.aux["log_z_num"] = n.log_z;
  out.aux["log_z_den"] = d.log_z;
  return out;
}

CriterionOutput LatticeSmbr(const Lattice &lat, const GraphFactory &factory,
                            const Automaton &num, ScoreView scores, const CriterionOptions &opts,
                            const LatticeOptions &lopts) {
  CheckLatticeLength(lat, scores);
  const double log_z_num = ForwardLogZ(num, scores, opts.am_scale);
  std::vector<Label> ref = ReferenceClasses(num, scores, opts.am_scale);
  Matrix reward =
      FrameAccuracyReward(ref, scores.NumClasses(), opts.silence_classes, opts.silence_weight);
  auto ev = EvaluateArcs(lat, factory, scores, opts.am_scale, lopts.scoring, &reward);
  DagResult d = LatticeDag(lat, factory, ev, lopts, true);
  // d E[A] / d score = am * sum_a [gain_a * occ_a + P_a * within-arc reward gradient].
  Matrix dexp(scores.NumFrames(), scores.NumClasses());
  for (size_t i = 0; i < lat.arcs.size(); i++) {
    if (d.arc_post[i] == 0.0) continue;
    AddArcOccupancy(lat, i, ev[i], d.arc_post_gain[i], nullptr, &dexp);
    if (ev[i].reward_grad.Rows() > 0)
      AddArcOccupancy(lat, i, ev[i], d.arc_post[i], &ev[i].reward_grad, &dexp);
  }
  CriterionOutput out;
  out.loss = -d.expected_reward;
  out.grad = Matrix(scores.NumFrames(), scores.NumClasses());
  auto g = out.grad.Data();
  auto de = dexp.Data();
  for (size_t i = 0; i < g.size(); i++) g[i] = -opts.am_scale * de[i];
  out.aux["log_z_num"] = log_z_num;
  out.aux["log_z_den"] = d.log_z;
  out.aux["expected_accuracy"] = d.expected_reward;
  return out;
}

}  // namespace seqfb
