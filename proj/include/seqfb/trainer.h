// seqfb/trainer.h

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

#ifndef SEQFB_TRAINER_H_
#define SEQFB_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqfb/acoustic-model.h"
#include "seqfb/corpus.h"
#include "seqfb/criteria.h"
#include "seqfb/lattice.h"

namespace seqfb {

enum class CriterionKind { kMmi, kSmbr, kLatticeMmi, kLatticeSmbr };

/// Throws ConfigError listing the valid names.
CriterionKind ParseCriterion(const std::string &name);
std::string CriterionName(CriterionKind kind);
inline bool IsLatticeCriterion(CriterionKind k) {
  return k == CriterionKind::kLatticeMmi || k == CriterionKind::kLatticeSmbr;
}

struct TrainConfig {
  CriterionKind criterion = CriterionKind::kMmi;
  double am_scale = 1.0;
  CheckpointSchedule schedule;
  bool fast = false;
  double learning_rate = 0.05;
  int epochs = 1;
  /// Evaluate every this fraction of an epoch (and at start and end).
  double eval_every = 0.25;
  /// Frame-level warm start on the generating labels, in epochs.
  double warm_start_epochs = 0.2;
  double warm_start_lr = 0.1;
  double silence_weight = 1.0;
  PruneConfig prune;
  ArcScoring lattice_scoring = ArcScoring::kBestPath;
  /// Utterances whose gradients are summed before one update.  Results do
  /// not depend on `workers`.
  int batch_size = 1;
  int workers = 1;
  /// Acoustic scale for held-out decoding.
  double decode_am_scale = 1.0;
  bool silence_posterior_argmax = false;

  void Check() const;
  CriterionOptions Criterion(const GraphFactory &f) const;
};

struct EvalMetrics {
  double epoch = 0.0;
  double loss = 0.0;  // criterion loss per frame on the held-out set
  double wer_proxy = 0.0;  // percent, held-out set
  double silence_ratio = 0.0;  // share of training frames decoded as silence
  int64_t skipped_utts = 0;
};

void WriteMetricsCsv(std::ostream &os, const std::vector<EvalMetrics> &evals);

struct TrainResult {
  std::vector<EvalMetrics> evals;
  /// Lattice criteria only: lattices of the held-out set, made with the
  /// warm-started model.  Empty for utterances that were skipped.
  std::vector<UtteranceLattices> eval_lattices;
};

/// Levenshtein distance between word sequences.
int64_t EditDistance(const std::vector<Label> &a, const std::vector<Label> &b);

/// Frame-level training on the generating classes for the first
/// `epochs` fraction of the corpus (in order).
void WarmStart(ToyAcousticModel &model, const SyntheticCorpus &corpus, double epochs, double lr);

/// Criterion value and score gradient for one utterance.  `lat` is needed
/// by lattice criteria only.
CriterionOutput EvaluateCriterion(const GraphFactory &f, const TrainConfig &cfg,
                                  const Automaton &num, const UtteranceLattices *lat,
                                  ScoreView scores);

/// Warm start, then sequence training with plain SGD; the utterance
/// gradient is divided by its frame count.  Lattices for lattice criteria
/// are generated once, after the warm start.  Utterances too short for
/// their numerator are skipped and counted.
TrainResult Train(const GraphFactory &f, const SyntheticCorpus &train, const SyntheticCorpus &eval,
                  ToyAcousticModel &model, const TrainConfig &cfg,
                  const std::function<void(const EvalMetrics &)> &on_eval = {});

struct GradCheckOptions {
  double step = 1e-5;
  /// Test hook: perturbs the analytic gradient by this relative amount.
  double corrupt = 0.0;
};

/// Largest relative error |a - n| / max(|a|, |n|, 1e-3) between the
/// analytic parameter gradient of the criterion and central differences.
double GradCheck(const GraphFactory &f, const ToyAcousticModel &model, const Utterance &utt,
                 const TrainConfig &cfg, const GradCheckOptions &opts = {});

}  // namespace seqfb

#endif  // SEQFB_TRAINER_H_
