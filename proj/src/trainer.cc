// seqfb/trainer.cc

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

#include "seqfb/trainer.h"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <thread>

#include <spdlog/spdlog.h>

namespace seqfb {

CriterionKind ParseCriterion(const std::string &name) {
  if (name == "mmi") return CriterionKind::kMmi;
  if (name == "smbr") return CriterionKind::kSmbr;
  if (name == "lattice_mmi") return CriterionKind::kLatticeMmi;
  if (name == "lattice_smbr") return CriterionKind::kLatticeSmbr;
  throw ConfigError("unknown criterion '" + name +
                    "' (valid: mmi, smbr, lattice_mmi, lattice_smbr)");
}

std::string CriterionName(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::kMmi: return "mmi";
    case CriterionKind::kSmbr: return "smbr";
    case CriterionKind::kLatticeMmi: return "lattice_mmi";
    case CriterionKind::kLatticeSmbr: return "lattice_smbr";
  }
  return "?";
}

void TrainConfig::Check() const {
  if (!(am_scale > 0.0)) throw ConfigError("am_scale must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(eval_every > 0.0)) throw ConfigError("eval_every must be positive");
  if (!(warm_start_epochs >= 0.0 && warm_start_epochs <= 1.0))
    throw ConfigError("warm_start_epochs must be in [0, 1]");
  if (!(warm_start_lr >= 0.0)) throw ConfigError("warm_start_lr must be >= 0");
  if (!(silence_weight >= 0.0 && silence_weight <= 1.0))
    throw ConfigError("silence_weight must be in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(decode_am_scale > 0.0)) throw ConfigError("decode_am_scale must be positive");
  prune.Check();
}

CriterionOptions TrainConfig::Criterion(const GraphFactory &f) const {
  CriterionOptions o;
  o.am_scale = am_scale;
  o.schedule = schedule;
  o.fast = fast;
  o.silence_classes = f.SilenceClasses();
  o.silence_weight = silence_weight;
  return o;
}

void WriteMetricsCsv(std::ostream &os, const std::vector<EvalMetrics> &evals) {
  os << "eval_epoch,loss,wer_proxy,silence_ratio,skipped_utts\n";
  char buf[256];
  for (const EvalMetrics &m : evals) {
    std::snprintf(buf, sizeof buf, "%.4f,%.10g,%.10g,%.10g,%lld\n", m.epoch, m.loss, m.wer_proxy,
                  m.silence_ratio, static_cast<long long>(m.skipped_utts));
    os << buf;
  }
}

int64_t EditDistance(const std::vector<Label> &a, const std::vector<Label> &b) {
  std::vector<int64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); j++) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= a.size(); i++) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= b.size(); j++)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void WarmStart(ToyAcousticModel &model, const SyntheticCorpus &corpus, double epochs, double lr) {
  const size_t n = static_cast<size_t>(std::ceil(epochs * corpus.utts.size()));
  for (size_t i = 0; i < n && i < corpus.utts.size(); i++) {
    const Utterance &u = corpus.utts[i];
    const size_t T = u.classes.size();
    Matrix g(T, model.NumClasses());
    // d(-log softmax[ref]) / d score: the prior term is constant
    for (size_t t = 0; t < T; t++) g(t, u.classes[t]) = -1.0 / static_cast<double>(T);
    model.Step(model.Backward(u.features, g), lr);
  }
  model.Check();
}

CriterionOutput EvaluateCriterion(const GraphFactory &f, const TrainConfig &cfg,
                                  const Automaton &num, const UtteranceLattices *lat,
                                  ScoreView scores) {
  CriterionOptions o = cfg.Criterion(f);
  LatticeOptions lo;
  lo.scoring = cfg.lattice_scoring;
  switch (cfg.criterion) {
    case CriterionKind::kMmi: return Mmi(num, f.Denominator(), scores, o);
    case CriterionKind::kSmbr: return Smbr(num, f.Denominator(), scores, o);
    case CriterionKind::kLatticeMmi:
    case CriterionKind::kLatticeSmbr:
      if (!lat) throw ConfigError("lattice criterion without a lattice");
      if (lat->den.node_times.empty())
        throw DegenerateUtteranceError("utterance has no lattice", -1);
      if (cfg.criterion == CriterionKind::kLatticeMmi)
        return LatticeMmi(lat->den, lat->num, f, scores, o, lo);
      return LatticeSmbr(lat->den, f, num, scores, o, lo);
  }
  throw ConfigError("bad criterion");
}

namespace {

struct UttGrad {
  bool skipped = false;
  double loss = 0.0;
  std::vector<double> grad;
};

UttGrad UtteranceGradient(const GraphFactory &f, const TrainConfig &cfg,
                          const ToyAcousticModel &model, const Utterance &u, const Automaton &num,
                          const UtteranceLattices *lat) {
  UttGrad r;
  Matrix scores = model.Scores(u.features);
  try {
    CriterionOutput out = EvaluateCriterion(f, cfg, num, lat, scores);
    const double T = static_cast<double>(u.features.Rows());
    for (double &g : out.grad.Data()) g /= T;
    r.loss = out.loss;
    r.grad = model.Backward(u.features, out.grad);
  } catch (const DegenerateUtteranceError &e) {
    spdlog::debug("skipping {}: {}", u.id, e.what());
    r.skipped = true;
  }
  return r;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void ParallelFor(size_t n, int workers, const std::function<void(size_t)> &fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; i++) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n);
  const size_t nw = std::min<size_t>(static_cast<size_t>(workers), n);
  for (size_t w = 0; w < nw; w++) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += nw) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

class Evaluator {
 public:
  Evaluator(const GraphFactory &f, const SyntheticCorpus &train, const SyntheticCorpus &eval,
            const TrainConfig &cfg, const std::vector<Automaton> &nums,
            const std::vector<UtteranceLattices> &lats)
      : f_(f), train_(train), eval_(eval), cfg_(cfg), nums_(nums), lats_(lats) {}

  EvalMetrics Run(const ToyAcousticModel &model, double epoch, int64_t skipped) const {
    const size_t n = eval_.utts.size();
    std::vector<double> loss(n, 0.0);
    std::vector<int64_t> errors(n, 0), frames(n, 0);
    std::vector<char> counted(n, 0);
    ParallelFor(n, cfg_.workers, [&](size_t i) {
      const Utterance &u = eval_.utts[i];
      Matrix scores = model.Scores(u.features);
      frames[i] = static_cast<int64_t>(u.features.Rows());
      try {
        ViterbiPath vp = Viterbi(f_.Denominator(), scores, cfg_.decode_am_scale);
        errors[i] = EditDistance(u.words, vp.words);
      } catch (const DegenerateUtteranceError &) {
        errors[i] = static_cast<int64_t>(u.words.size());  // empty hypothesis
      }
      try {
        const UtteranceLattices *lat = lats_.empty() ? nullptr : &lats_[i];
        loss[i] = EvaluateCriterion(f_, cfg_, nums_[i], lat, scores).loss;
        counted[i] = 1;
      } catch (const DegenerateUtteranceError &) {
      }
    });
    // Silence is tracked on the training frames.
    const size_t nt = train_.utts.size();
    std::vector<double> sil(nt, 0.0);
    std::vector<int64_t> train_frames(nt, 0);
    ParallelFor(nt, cfg_.workers, [&](size_t i) {
      const Utterance &u = train_.utts[i];
      try {
        sil[i] = SilenceRatio(f_.Denominator(), model.Scores(u.features), cfg_.decode_am_scale,
                              f_.SilenceClasses(), cfg_.silence_posterior_argmax) *
                 static_cast<double>(u.features.Rows());
        train_frames[i] = static_cast<int64_t>(u.features.Rows());
      } catch (const DegenerateUtteranceError &) {
      }
    });
    EvalMetrics m;
    m.epoch = epoch;
    m.skipped_utts = skipped;
    int64_t ref_words = 0, loss_frames = 0, sil_total = 0;
    int64_t err = 0;
    double sil_frames = 0.0, loss_sum = 0.0;
    for (size_t i = 0; i < n; i++) {
      ref_words += static_cast<int64_t>(eval_.utts[i].words.size());
      err += errors[i];
      if (counted[i]) {
        loss_sum += loss[i];
        loss_frames += frames[i];
      }
    }
    m.loss = loss_frames ? loss_sum / static_cast<double>(loss_frames) : 0.0;
    m.wer_proxy = ref_words ? 100.0 * static_cast<double>(err) / static_cast<double>(ref_words) : 0.0;
    for (size_t i = 0; i < nt; i++) {
      sil_frames += sil[i];
      sil_total += train_frames[i];
    }
    m.silence_ratio = sil_total ? sil_frames / static_cast<double>(sil_total) : 0.0;
    return m;
  }

 private:
  const GraphFactory &f_;
  const SyntheticCorpus &train_;
  const SyntheticCorpus &eval_;
  const TrainConfig &cfg_;
  const std::vector<Automaton> &nums_;
  const std::vector<UtteranceLattices> &lats_;
};

std::vector<Automaton> Numerators(const GraphFactory &f, const SyntheticCorpus &c) {
  std::vector<Automaton> out;
  out.reserve(c.utts.size());
  for (const Utterance &u : c.utts) out.push_back(f.Numerator(u.words));
  return out;
}

std::vector<UtteranceLattices> Lattices(const GraphFactory &f, const SyntheticCorpus &c,
                                        const ToyAcousticModel &model, const TrainConfig &cfg) {
  std::vector<UtteranceLattices> out(c.utts.size());
  ParallelFor(c.utts.size(), cfg.workers, [&](size_t i) {
    const Utterance &u = c.utts[i];
    try {
      out[i] = MakeUtteranceLattices(f, u.words, model.Scores(u.features), cfg.am_scale, cfg.prune);
    } catch (const DegenerateUtteranceError &e) {
      spdlog::debug("no lattice for {}: {}", u.id, e.what());
    }
  });
  return out;
}

}  // namespace

TrainResult Train(const GraphFactory &f, const SyntheticCorpus &train, const SyntheticCorpus &eval,
                  ToyAcousticModel &model, const TrainConfig &cfg,
                  const std::function<void(const EvalMetrics &)> &on_eval) {
  cfg.Check();
  if (model.NumClasses() != static_cast<size_t>(f.NumClasses()))
    throw ConfigError("acoustic model has " + std::to_string(model.NumClasses()) +
                      " classes, graph has " + std::to_string(f.NumClasses()));
  WarmStart(model, train, cfg.warm_start_epochs, cfg.warm_start_lr);

  const std::vector<Automaton> train_nums = Numerators(f, train), eval_nums = Numerators(f, eval);
  std::vector<UtteranceLattices> train_lats, eval_lats;
  if (IsLatticeCriterion(cfg.criterion)) {
    train_lats = Lattices(f, train, model, cfg);
    eval_lats = Lattices(f, eval, model, cfg);
    size_t arcs = 0;
    for (const UtteranceLattices &l : train_lats) arcs += l.den.arcs.size();
    spdlog::info("generated {} training lattices ({} arcs)", train_lats.size(), arcs);
  }

  TrainResult result;
  Evaluator evaluator(f, train, eval, cfg, eval_nums, eval_lats);
  auto record = [&](double epoch, int64_t skipped) {
    EvalMetrics m = evaluator.Run(model, epoch, skipped);
    spdlog::info("epoch {:.3f}: loss {:.6f} wer {:.2f} silence {:.4f} skipped {}", m.epoch, m.loss,
                 m.wer_proxy, m.silence_ratio, m.skipped_utts);
    result.evals.push_back(m);
    if (on_eval) on_eval(m);
  };

  const size_t N = train.utts.size();
  const size_t total = N * static_cast<size_t>(cfg.epochs);
  const size_t interval =
      std::max<size_t>(1, static_cast<size_t>(std::llround(cfg.eval_every * static_cast<double>(N))));
  int64_t skipped = 0;
  record(0.0, 0);
  size_t step = 0;
  while (step < total) {
    const size_t batch = std::min<size_t>(static_cast<size_t>(cfg.batch_size), total - step);
    std::vector<UttGrad> grads(batch);
    ParallelFor(batch, cfg.workers, [&](size_t b) {
      const size_t i = (step + b) % N;
      grads[b] = UtteranceGradient(f, cfg, model, train.utts[i], train_nums[i],
                                   train_lats.empty() ? nullptr : &train_lats[i]);
    });
    std::vector<double> sum(model.NumParams(), 0.0);
    for (size_t b = 0; b < batch; b++) {
      if (grads[b].skipped) {
        skipped++;
        continue;
      }
      for (size_t k = 0; k < sum.size(); k++) sum[k] += grads[b].grad[k];
    }
    model.Step(sum, cfg.learning_rate);
    model.Check();
    const size_t before = step;
    step += batch;
    if (step / interval != before / interval || step == total) {
      record(static_cast<double>(step) / static_cast<double>(N), skipped);
    }
  }
  result.eval_lattices = std::move(eval_lats);
  return result;
}

double GradCheck(const GraphFactory &f, const ToyAcousticModel &model, const Utterance &utt,
                 const TrainConfig &cfg, const GradCheckOptions &opts) {
  if (model.NumParams() == 0) return 0.0;
  Automaton num = f.Numerator(utt.words);
  UtteranceLattices lat;
  const UtteranceLattices *lp = nullptr;
  if (IsLatticeCriterion(cfg.criterion)) {
    lat = MakeUtteranceLattices(f, utt.words, model.Scores(utt.features), cfg.am_scale, cfg.prune);
    lp = &lat;
  }
  auto loss_at = [&](const ToyAcousticModel &m) {
    return EvaluateCriterion(f, cfg, num, lp, m.Scores(utt.features)).loss;
  };
  CriterionOutput out = EvaluateCriterion(f, cfg, num, lp, model.Scores(utt.features));
  std::vector<double> analytic = model.Backward(utt.features, out.grad);
  if (opts.corrupt != 0.0)
    for (double &a : analytic) a += opts.corrupt * std::max(1.0, std::fabs(a));

  ToyAcousticModel probe = model;
  std::vector<double> p = model.Params();
  double worst = 0.0;
  for (size_t i = 0; i < p.size(); i++) {
    const double keep = p[i];
    p[i] = keep + opts.step;
    probe.SetParams(p);
    const double up = loss_at(probe);
    p[i] = keep - opts.step;
    probe.SetParams(p);
    const double down = loss_at(probe);
    p[i] = keep;
    const double numeric = (up - down) / (2 * opts.step);
    const double err = std::fabs(analytic[i] - numeric) /
                       std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-3});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace seqfb
