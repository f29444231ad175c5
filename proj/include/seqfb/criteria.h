// seqfb/criteria.h

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

#ifndef SEQFB_CRITERIA_H_
#define SEQFB_CRITERIA_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "seqfb/forward-backward.h"

namespace seqfb {

/// The LM scale is applied when graphs are built (GraphOptions::lm_scale);
/// the AM scale multiplies the scores in every forward-backward.
struct Scales {
  double am_scale = 1.0;
  double lm_scale = 1.0;
  void Check() const;
};

struct CriterionOutput {
  double loss = 0.0;  // to be minimized
  Matrix grad;        // d loss / d score, T x C
  std::map<std::string, double> aux;
};

/// Per-utterance options shared by the criteria.
struct CriterionOptions {
  double am_scale = 1.0;
  CheckpointSchedule schedule;
  bool fast = false;
  /// Classes counted as silence (indexed by class id).
  std::vector<bool> silence_classes;
  /// sMBR only: accuracy weight of frames whose reference is silence.
  double silence_weight = 1.0;

  FbOptions Fb() const;
};

/// loss = log_z_den - log_z_num, grad = am_scale * (gamma_den - gamma_num).
/// A numerator that cannot be aligned at this length throws
/// DegenerateUtteranceError, which callers treat as "skip the utterance".
CriterionOutput Mmi(const Automaton &num, const Automaton &den, ScoreView scores,
                    const CriterionOptions &opts);

/// Per-frame reference classes from the best numerator path.
std::vector<Label> ReferenceClasses(const Automaton &num, ScoreView scores, double am_scale);

/// reward(t, c) = w_t [c == ref_t], w_t = silence_weight on silence frames.
Matrix FrameAccuracyReward(const std::vector<Label> &ref, size_t num_classes,
                           const std::vector<bool> &silence_classes, double silence_weight);

/// State-level MBR: loss = -E_den[sum_t reward(t, c_t)], reference frames
/// taken from the best numerator path.  The gradient is the exact
/// derivative am_scale * gamma(t,c) * (E[A] - E[A | c at t]).
CriterionOutput Smbr(const Automaton &num, const Automaton &den, ScoreView scores,
                     const CriterionOptions &opts);

/// Fraction of frames whose class on the best path (or, with
/// `posterior_argmax`, the most likely class of the frame) is silence.
double SilenceRatio(const Automaton &graph, ScoreView scores, double am_scale,
                    const std::vector<bool> &silence_classes, bool posterior_argmax = false);

void WriteAuxCsvHeader(std::ostream &os);
void WriteAuxCsvRow(std::ostream &os, const std::string &utt, const CriterionOutput &out);

}  // namespace seqfb

#endif  // SEQFB_CRITERIA_H_
