// seqfb/forward-backward.h

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

#ifndef SEQFB_FORWARD_BACKWARD_H_
#define SEQFB_FORWARD_BACKWARD_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "seqfb/automaton.h"
#include "seqfb/matrix.h"

namespace seqfb {

enum class ScheduleKind { kNone, kEquidistant, kLogarithmic };

/// Which alpha vectors are kept between the forward and the backward pass.
///  kNone         all T+1 vectors.
///  kEquidistant  one checkpoint every block_len frames; each block is
///                recomputed from its checkpoint during the backward pass.
///  kLogarithmic  recursive bisection, O(log T) vectors.
struct CheckpointSchedule {
  ScheduleKind kind = ScheduleKind::kNone;
  int64_t block_len = 0;  // equidistant only; 0 means ceil(sqrt(T))

  /// "none", "equidistant", "equidistant:B" or "logarithmic".
  static CheckpointSchedule Parse(const std::string &spec);
  std::string Name() const;
  int64_t BlockLen(int64_t num_frames) const;
};

struct FbCounters {
  int64_t stored_alpha_vectors_peak = 0;
  int64_t alpha_frames_computed = 0;  // every alpha step, first pass included
  int64_t alpha_recompute_frames = 0;  // alpha_frames_computed - T
  int64_t arc_visits = 0;              // arcs touched by alpha steps
};

struct FbOptions {
  double am_scale = 1.0;
  CheckpointSchedule schedule;
  /// Drops alpha entries more than 80 nats below the frame maximum and
  /// arc posteriors below exp(-80).  Results are then no longer exact.
  bool fast = false;
  /// Also fill FbResult::state_gamma (T x S).
  bool state_occupancy = false;
};

struct FbResult {
  double log_z = kLogZero;
  Matrix gamma;  // T x C occupancies, linear domain
  FbCounters counters;
  Matrix state_gamma;  // T x S, only with FbOptions::state_occupancy

  // Filled when a reward matrix is given.  A path earns the sum of
  // reward(t, c_t) over its frames.
  double expected_reward = 0.0;
  Matrix reward_grad;  // gamma(t,c) * (E[reward | c at t] - E[reward])
};

/// Forward pass only; returns log_z.  Throws DegenerateUtteranceError if
/// no final state is reachable in exactly T frames.
double ForwardLogZ(const Automaton &graph, ScoreView scores, double am_scale);

/// Posteriors under the requested schedule.  All schedules execute the same
/// arithmetic in the same order, so log_z and gamma agree bit for bit.
FbResult ForwardBackward(const Automaton &graph, ScoreView scores, const FbOptions &opts,
                         const Matrix *reward = nullptr);

struct ViterbiPath {
  double score = kLogZero;
  std::vector<size_t> arcs;     // global arc indices, one per frame
  std::vector<Label> classes;   // emission class per frame
  std::vector<Label> words;     // non-epsilon word labels in order
};

/// Best path; among equal scores the lowest arc index wins at every step.
ViterbiPath Viterbi(const Automaton &graph, ScoreView scores, double am_scale);

void WriteCountersCsvHeader(std::ostream &os);
void WriteCountersCsvRow(std::ostream &os, const std::string &algo, int64_t num_frames,
                         const Automaton &graph, const FbCounters &c);

}  // namespace seqfb

#endif  // SEQFB_FORWARD_BACKWARD_H_
