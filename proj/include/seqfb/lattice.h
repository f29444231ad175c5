// seqfb/lattice.h

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

#ifndef SEQFB_LATTICE_H_
#define SEQFB_LATTICE_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "seqfb/criteria.h"
#include "seqfb/graph-builder.h"

namespace seqfb {

/// A word (or, with word == kEpsilon, a silence) hypothesis between two
/// nodes.  `states` is the best emission-class path inside the word, one
/// class per frame.  `am_score` is that path's acoustic plus transition
/// score when the lattice was generated; `lm_score` is the scaled LM weight.
struct LatticeArc {
  int32_t src = 0;
  int32_t dst = 0;
  Label word = kEpsilon;
  double am_score = 0.0;
  double lm_score = 0.0;
  std::vector<Label> states;

  bool operator==(const LatticeArc &) const = default;
};

/// Node 0 is the start; the last node, alone at the largest time, is the
/// end.  Several nodes may share a time (reference lattices keep one node
/// per word position).
struct Lattice {
  std::vector<int64_t> node_times;
  std::vector<LatticeArc> arcs;
  double final_lm = 0.0;  // sentence-end LM weight

  int64_t NumFrames() const { return node_times.empty() ? 0 : node_times.back(); }
  /// Throws DataError on unordered nodes, a shared end time, arcs not
  /// advancing in time, state paths of the wrong length, or no complete path.
  void Check() const;

  bool operator==(const Lattice &) const = default;
};

/// Lines "N id time", "A src dst word am lm s1,s2,..." and "F lm".
void WriteLattice(std::ostream &os, const Lattice &lat, const SymbolTable *words = nullptr);
Lattice ReadLattice(std::istream &is, const std::string &source_name,
                    const SymbolTable *words = nullptr);

struct PruneConfig {
  /// Keep a word arc if the best complete path through it scores within
  /// this many nats of the overall best path.  Infinity disables pruning.
  double posterior_beam = 10.0;
  /// Keep at most this many arcs starting at each frame (0: no cap).
  int64_t max_arcs_per_frame = 50;
  void Check() const;
};

/// Word lattice of the denominator graph for one utterance.  Every arc is a
/// (word, start, end) segment; the lattice always contains the best path.
Lattice GenerateLattice(const GraphFactory &factory, ScoreView scores, double am_scale,
                        const PruneConfig &cfg);

/// All segmentations of `words` into word arcs and optional silences, as
/// the numerator graph allows them, each arc holding its best state path
/// under `scores`.  LM weights are those of the numerator graph: the
/// reference history if numerator_lm is set, none otherwise.  Throws
/// DegenerateUtteranceError if the reference does not fit.
Lattice ReferenceLattice(const GraphFactory &factory, const std::vector<Label> &words,
                         ScoreView scores, double am_scale);

/// `lat` plus the arcs of `extra` it lacks, matched on (start, end, word).
/// `lat` must have one node per time.
Lattice UnionArcs(const Lattice &lat, const Lattice &extra);

/// What a lattice criterion needs for one utterance: the pruned
/// denominator lattice with the reference merged in, so the reference is
/// always a competing hypothesis, and the reference lattice itself.
struct UtteranceLattices {
  Lattice den;
  Lattice num;
};

UtteranceLattices MakeUtteranceLattices(const GraphFactory &factory,
                                        const std::vector<Label> &words, ScoreView scores,
                                        double am_scale, const PruneConfig &cfg);

enum class ArcScoring {
  kBestPath,  // fixed state path per arc, scored with the current scores
  kFullSum,   // sum over all state paths of the word between its times
};

struct LatticeOptions {
  ArcScoring scoring = ArcScoring::kBestPath;
  /// If set, arc and sentence-end LM weights are recomputed from this
  /// model (order <= 2, exact histories) with the factory's LM scale.
  const NGramLM *rescore_lm = nullptr;
};

/// Log of the sum over lattice paths with the current scores.
double LatticeLogSum(const Lattice &lat, const GraphFactory &factory, ScoreView scores,
                     double am_scale, const LatticeOptions &lopts = {});

/// MMI with the denominator restricted to `den` and the numerator to the
/// reference lattice `num`, both scored the same way.
CriterionOutput LatticeMmi(const Lattice &den, const Lattice &num, const GraphFactory &factory,
                           ScoreView scores, const CriterionOptions &opts,
                           const LatticeOptions &lopts = {});

/// sMBR over lattice paths, reference frames from the best numerator path.
CriterionOutput LatticeSmbr(const Lattice &lat, const GraphFactory &factory,
                            const Automaton &num, ScoreView scores, const CriterionOptions &opts,
                            const LatticeOptions &lopts = {});

}  // namespace seqfb

#endif  // SEQFB_LATTICE_H_
