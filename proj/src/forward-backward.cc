// seqfb/forward-backward.cc

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

#include "seqfb/forward-backward.h"

#include <algorithm>
#include <cstring>
#include <ostream>

#include "seqfb/fst-ops.h"

namespace seqfb {

CheckpointSchedule CheckpointSchedule::Parse(const std::string &spec) {
  CheckpointSchedule s;
  if (spec == "none" || spec == "naive") return s;
  if (spec == "logarithmic" || spec == "recursive") {
    s.kind = ScheduleKind::kLogarithmic;
    return s;
  }
  if (spec.rfind("equidistant", 0) == 0) {
    s.kind = ScheduleKind::kEquidistant;
    if (spec.size() == 11) return s;
    if (spec[11] == ':') {
      char *end = nullptr;
      long long b = std::strtoll(spec.c_str() + 12, &end, 10);
      if (*end == '\0' && end != spec.c_str() + 12 && b >= 1) {
        s.block_len = b;
        return s;
      }
    }
  }
  throw ConfigError("unknown checkpoint schedule '" + spec +
                    "' (expected none, equidistant[:B] or logarithmic)");
}

std::string CheckpointSchedule::Name() const {
  switch (kind) {
    case ScheduleKind::kNone: return "none";
    case ScheduleKind::kEquidistant:
      return block_len > 0 ? "equidistant:" + std::to_string(block_len) : "equidistant";
    case ScheduleKind::kLogarithmic: return "logarithmic";
  }
  return "?";
}

int64_t CheckpointSchedule::BlockLen(int64_t num_frames) const {
  if (block_len > 0) return block_len;
  int64_t b = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(num_frames))));
  while (b * b < num_frames) b++;
  return std::max<int64_t>(b, 1);
}

namespace {

class AlphaPool;

// An alpha vector owned by the pool's live count until destroyed.
class AlphaVec {
 public:
  AlphaVec() = default;
  AlphaVec(AlphaPool *pool, std::vector<double> v) : pool_(pool), v_(std::move(v)) {}
  AlphaVec(AlphaVec &&o) noexcept : pool_(o.pool_), v_(std::move(o.v_)) { o.pool_ = nullptr; }
  AlphaVec &operator=(AlphaVec &&o) noexcept {
    if (this != &o) {
      Release();
      pool_ = o.pool_;
      v_ = std::move(o.v_);
      o.pool_ = nullptr;
    }
    return *this;
  }
  AlphaVec(const AlphaVec &) = delete;
  AlphaVec &operator=(const AlphaVec &) = delete;
  ~AlphaVec() { Release(); }

  double *data() { return v_.data(); }
  const double *data() const { return v_.data(); }
  inline void Release();

 private:
  AlphaPool *pool_ = nullptr;
  std::vector<double> v_;
};

class AlphaPool {
 public:
  explicit AlphaPool(size_t dim) : dim_(dim) {}
  AlphaVec New() {
    live_++;
    peak_ = std::max(peak_, live_);
    if (free_.empty()) return AlphaVec(this, std::vector<double>(dim_));
    std::vector<double> v = std::move(free_.back());
    free_.pop_back();
    return AlphaVec(this, std::move(v));
  }
  void Return(std::vector<double> v) {
    live_--;
    free_.push_back(std::move(v));
  }
  int64_t Peak() const { return peak_; }

 private:
  size_t dim_;
  int64_t live_ = 0, peak_ = 0;
  std::vector<std::vector<double>> free_;
};

void AlphaVec::Release() {
  if (pool_) pool_->Return(std::move(v_));
  pool_ = nullptr;
}

void CheckInputs(const Automaton &graph, ScoreView scores, double am_scale) {
  if (!(am_scale > 0.0) || !std::isfinite(am_scale))
    throw ConfigError("am_scale must be positive and finite");
  if (graph.Empty()) throw ConfigError("forward-backward on an empty graph");
  if (!graph.IsEmissionReady())
    throw ConfigError("graph has epsilon emission arcs; remove them first");
  CheckScores(scores, static_cast<size_t>(graph.InputAlphabetSize()));
  for (const Arc &arc : graph.Arcs())
    if (static_cast<size_t>(arc.emit) >= scores.NumClasses())
      throw DataError("graph emits class " + std::to_string(arc.emit) + " but scores have " +
                      std::to_string(scores.NumClasses()) + " classes");
}

[[noreturn]] void ThrowDegenerate(const Automaton &graph, size_t num_frames) {
  int64_t min_len = ShortestAcceptedLength(graph);
  throw DegenerateUtteranceError(
      "no path of " + std::to_string(num_frames) + " frames reaches a final state " +
          (min_len < 0 ? std::string("(graph accepts nothing)")
                       : "(shortest accepted length " + std::to_string(min_len) + ")"),
      min_len);
}

// Shared arithmetic of all schedules.  A vector holds S log-alphas, followed
// by S expected prefix rewards when rewards are tracked.
class FbEngine {
 public:
  FbEngine(const Automaton &g, ScoreView x, const FbOptions &opts, const Matrix *reward)
      : g_(g), x_(x), opts_(opts), reward_(reward), S_(g.NumStates()),
        dim_(reward ? 2 * S_ : S_) {}

  size_t Dim() const { return dim_; }
  int64_t FramesComputed() const { return frames_; }
  double LogZ() const { return log_z_; }

  void Init(double *alpha) const {
    std::fill(alpha, alpha + S_, kLogZero);
    if (reward_) std::fill(alpha + S_, alpha + 2 * S_, 0.0);
    alpha[g_.Start()] = kLogOne;
  }

  void Step(size_t t, const double *in, double *out) {
    frames_++;
    std::fill(out, out + S_, kLogZero);
    const auto xt = x_.Row(t);
    const double am = opts_.am_scale;
    double floor = kLogZero;
    if (opts_.fast) floor = *std::max_element(in, in + S_) - 80.0;
    for (size_t s = 0; s < S_; s++) {
      const double a = in[s];
      if (a == kLogZero || a < floor) continue;
      for (const Arc &arc : g_.ArcsFrom(s))
        out[arc.dst] = LogAdd(out[arc.dst], a + arc.weight + am * xt[arc.emit]);
    }
    if (!reward_) return;
    std::fill(out + S_, out + 2 * S_, 0.0);
    const auto rt = reward_->Row(t);
    for (size_t s = 0; s < S_; s++) {
      const double a = in[s];
      if (a == kLogZero || a < floor) continue;
      for (const Arc &arc : g_.ArcsFrom(s)) {
        double v = a + arc.weight + am * xt[arc.emit];
        out[S_ + arc.dst] += std::exp(v - out[arc.dst]) * (in[S_ + s] + rt[arc.emit]);
      }
    }
  }

  // Starts the backward pass from alpha_T.
  void Begin(const double *alpha_T) {
    const size_t T = x_.NumFrames(), C = x_.NumClasses();
    log_z_ = kLogZero;
    for (size_t s = 0; s < S_; s++) log_z_ = LogAdd(log_z_, alpha_T[s] + g_.Final(s));
    if (log_z_ == kLogZero) ThrowDegenerate(g_, T);
    if (!std::isfinite(log_z_)) throw NumericalError("log partition function is not finite");
    beta_.assign(dim_, 0.0);
    next_.assign(dim_, 0.0);
    for (size_t s = 0; s < S_; s++) beta_[s] = g_.Final(s);
    gamma_ = Matrix(T, C);
    if (opts_.state_occupancy) state_gamma_ = Matrix(T, S_);
    if (reward_) {
      reward_grad_ = Matrix(T, C);
      expected_reward_ = 0.0;
      for (size_t s = 0; s < S_; s++)
        if (alpha_T[s] != kLogZero && g_.IsFinal(s))
          expected_reward_ += std::exp(alpha_T[s] + g_.Final(s) - log_z_) * alpha_T[S_ + s];
    }
  }

  // Accumulates the posteriors of frame t and moves beta from t+1 to t.
  void Backward(size_t t, const double *alpha) {
    const auto xt = x_.Row(t);
    const double am = opts_.am_scale;
    auto gt = gamma_.Row(t);
    std::fill(next_.begin(), next_.begin() + S_, kLogZero);
    for (size_t s = 0; s < S_; s++) {
      double b = kLogZero;
      const double a = alpha[s];
      for (const Arc &arc : g_.ArcsFrom(s)) {
        const double bd = beta_[arc.dst];
        if (bd == kLogZero) continue;
        const double v = arc.weight + am * xt[arc.emit] + bd;
        b = LogAdd(b, v);
        if (a == kLogZero) continue;
        const double lp = a + v - log_z_;
        if (opts_.fast && lp < -80.0) continue;
        const double post = std::exp(lp);
        gt[arc.emit] += post;
        if (opts_.state_occupancy) state_gamma_(t, s) += post;
        if (reward_)
          reward_grad_(t, arc.emit) +=
              post * (alpha[S_ + s] + (*reward_)(t, arc.emit) + beta_[S_ + arc.dst] -
                      expected_reward_);
      }
      next_[s] = b;
    }
    if (reward_) {
      const auto rt = reward_->Row(t);
      for (size_t s = 0; s < S_; s++) {
        double acc = 0.0;
        if (next_[s] != kLogZero) {
          for (const Arc &arc : g_.ArcsFrom(s)) {
            const double bd = beta_[arc.dst];
            if (bd == kLogZero) continue;
            const double v = arc.weight + am * xt[arc.emit] + bd;
            acc += std::exp(v - next_[s]) * (rt[arc.emit] + beta_[S_ + arc.dst]);
          }
        }
        next_[S_ + s] = acc;
      }
    }
    std::swap(beta_, next_);
  }

  void Collect(FbResult *r) {
    r->log_z = log_z_;
    r->gamma = std::move(gamma_);
    r->state_gamma = std::move(state_gamma_);
    if (reward_) {
      r->expected_reward = expected_reward_;
      r->reward_grad = std::move(reward_grad_);
    }
  }

 private:
  const Automaton &g_;
  ScoreView x_;
  const FbOptions &opts_;
  const Matrix *reward_;
  const size_t S_, dim_;
  int64_t frames_ = 0;
  double log_z_ = kLogZero;
  double expected_reward_ = 0.0;
  std::vector<double> beta_, next_;
  Matrix gamma_, state_gamma_, reward_grad_;
};

void RunNaive(FbEngine &eng, AlphaPool &pool, size_t T) {
  std::vector<AlphaVec> alpha;
  alpha.reserve(T + 1);
  alpha.push_back(pool.New());
  eng.Init(alpha[0].data());
  for (size_t t = 0; t < T; t++) {
    alpha.push_back(pool.New());
    eng.Step(t, alpha[t].data(), alpha[t + 1].data());
  }
  eng.Begin(alpha[T].data());
  for (size_t t = T; t-- > 0;) eng.Backward(t, alpha[t].data());
}

void RunEquidistant(FbEngine &eng, AlphaPool &pool, size_t T, size_t B) {
  const size_t dim = eng.Dim();
  std::vector<AlphaVec> ckpt;
  ckpt.reserve((T + B - 1) / B);
  ckpt.push_back(pool.New());
  eng.Init(ckpt[0].data());
  const double *prev = ckpt[0].data();
  AlphaVec roll;
  for (size_t t = 0; t < T; t++) {
    if ((t + 1) % B == 0 && t + 1 < T) {
      ckpt.push_back(pool.New());
      eng.Step(t, prev, ckpt.back().data());
      prev = ckpt.back().data();
    } else {
      AlphaVec next = pool.New();
      eng.Step(t, prev, next.data());
      roll = std::move(next);
      prev = roll.data();
    }
  }
  eng.Begin(prev);
  roll.Release();

  for (size_t k = ckpt.size(); k-- > 0;) {
    const size_t begin = k * B, end = std::min(begin + B, T);
    std::vector<AlphaVec> block;
    block.reserve(end - begin);
    const double *cur = ckpt[k].data();
    for (size_t t = begin; t < end; t++) {
      block.push_back(pool.New());
      eng.Step(t, cur, block.back().data());
      cur = block.back().data();
    }
    if (end < T && std::memcmp(cur, ckpt[k + 1].data(), dim * sizeof(double)) != 0)
      throw NumericalError("recomputed alpha differs from its checkpoint at frame " +
                           std::to_string(end));
    for (size_t t = end; t-- > begin;)
      eng.Backward(t, t == begin ? ckpt[k].data() : block[t - begin - 1].data());
    if (k + 1 < ckpt.size()) ckpt[k + 1].Release();
  }
}

class Bisection {
 public:
  Bisection(FbEngine &eng, AlphaPool &pool, size_t T) : eng_(eng), pool_(pool), T_(T) {}

  void Run() {
    AlphaVec a0 = pool_.New();
    eng_.Init(a0.data());
    Rec(0, T_, a0.data(), 0);
  }

 private:
  // alpha_a is held by the caller for the whole call.
  void Rec(size_t a, size_t b, const double *alpha_a, int depth) {
    if (depth > 64) throw NumericalError("checkpoint recursion too deep");
    if (b - a == 1) {
      if (!begun_) {
        AlphaVec last = pool_.New();
        eng_.Step(a, alpha_a, last.data());
        eng_.Begin(last.data());
        begun_ = true;
      }
      eng_.Backward(a, alpha_a);
      return;
    }
    const size_t m = a + (b - a) / 2;
    AlphaVec cur = pool_.New();
    eng_.Step(a, alpha_a, cur.data());
    for (size_t t = a + 1; t < m; t++) {
      AlphaVec next = pool_.New();
      eng_.Step(t, cur.data(), next.data());
      cur = std::move(next);
    }
    Rec(m, b, cur.data(), depth + 1);
    cur.Release();
    Rec(a, m, alpha_a, depth + 1);
  }

  FbEngine &eng_;
  AlphaPool &pool_;
  size_t T_;
  bool begun_ = false;
};

}  // namespace

double ForwardLogZ(const Automaton &graph, ScoreView scores, double am_scale) {
  CheckInputs(graph, scores, am_scale);
  FbOptions opts;
  opts.am_scale = am_scale;
  FbEngine eng(graph, scores, opts, nullptr);
  std::vector<double> a(eng.Dim()), b(eng.Dim());
  eng.Init(a.data());
  for (size_t t = 0; t < scores.NumFrames(); t++) {
    eng.Step(t, a.data(), b.data());
    std::swap(a, b);
  }
  double log_z = kLogZero;
  for (StateId s = 0; s < graph.NumStates(); s++) log_z = LogAdd(log_z, a[s] + graph.Final(s));
  if (log_z == kLogZero) ThrowDegenerate(graph, scores.NumFrames());
  return log_z;
}

FbResult ForwardBackward(const Automaton &graph, ScoreView scores, const FbOptions &opts,
                         const Matrix *reward) {
  CheckInputs(graph, scores, opts.am_scale);
  const size_t T = scores.NumFrames();
  if (reward) {
    if (reward->Rows() != T || reward->Cols() != scores.NumClasses())
      throw DataError("reward matrix shape does not match the scores");
    CheckScores(*reward);
  }
  FbEngine eng(graph, scores, opts, reward);
  AlphaPool pool(eng.Dim());
  switch (opts.schedule.kind) {
    case ScheduleKind::kNone:
      RunNaive(eng, pool, T);
      break;
    case ScheduleKind::kEquidistant: {
      size_t B = static_cast<size_t>(opts.schedule.BlockLen(static_cast<int64_t>(T)));
      if (B >= T) RunNaive(eng, pool, T);
      else RunEquidistant(eng, pool, T, B);
      break;
    }
    case ScheduleKind::kLogarithmic:
      Bisection(eng, pool, T).Run();
      break;
  }
  FbResult r;
  eng.Collect(&r);
  r.counters.stored_alpha_vectors_peak = pool.Peak();
  r.counters.alpha_frames_computed = eng.FramesComputed();
  r.counters.alpha_recompute_frames = eng.FramesComputed() - static_cast<int64_t>(T);
  r.counters.arc_visits = eng.FramesComputed() * static_cast<int64_t>(graph.NumArcs());
  return r;
}

ViterbiPath Viterbi(const Automaton &graph, ScoreView scores, double am_scale) {
  CheckInputs(graph, scores, am_scale);
  const size_t T = scores.NumFrames(), S = graph.NumStates();
  std::vector<double> d(S, kLogZero), nd(S);
  std::vector<int64_t> back(T * S, -1);
  d[graph.Start()] = kLogOne;
  for (size_t t = 0; t < T; t++) {
    std::fill(nd.begin(), nd.end(), kLogZero);
    const auto xt = scores.Row(t);
    for (size_t s = 0; s < S; s++) {
      if (d[s] == kLogZero) continue;
      const size_t off = graph.ArcOffset(s);
      auto arcs = graph.ArcsFrom(s);
      for (size_t j = 0; j < arcs.size(); j++) {
        const Arc &arc = arcs[j];
        double v = d[s] + arc.weight + am_scale * xt[arc.emit];
        if (v > nd[arc.dst]) {
          nd[arc.dst] = v;
          back[t * S + arc.dst] = static_cast<int64_t>(off + j);
        }
      }
    }
    std::swap(d, nd);
  }
  ViterbiPath best;
  StateId best_state = kNoState;
  for (size_t s = 0; s < S; s++) {
    double v = d[s] + graph.Final(s);
    if (v > best.score) {
      best.score = v;
      best_state = static_cast<StateId>(s);
    }
  }
  if (best_state == kNoState) ThrowDegenerate(graph, T);
  best.arcs.resize(T);
  best.classes.resize(T);
  StateId s = best_state;
  for (size_t t = T; t-- > 0;) {
    const size_t i = static_cast<size_t>(back[t * S + s]);
    const Arc &arc = graph.Arcs()[i];
    best.arcs[t] = i;
    best.classes[t] = arc.emit;
    s = arc.src;
  }
  for (size_t i : best.arcs)
    if (graph.Arcs()[i].word != kEpsilon) best.words.push_back(graph.Arcs()[i].word);
  return best;
}

void WriteCountersCsvHeader(std::ostream &os) {
  os << "algo,T,S,E,peak_vectors,recompute_frames,arc_visits\n";
}

void WriteCountersCsvRow(std::ostream &os, const std::string &algo, int64_t num_frames,
                         const Automaton &graph, const FbCounters &c) {
  os << algo << ',' << num_frames << ',' << graph.NumStates() << ',' << graph.NumArcs() << ','
     << c.stored_alpha_vectors_peak << ',' << c.alpha_recompute_frames << ',' << c.arc_visits
     << '\n';
}

}  // namespace seqfb
