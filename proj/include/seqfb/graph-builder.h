// seqfb/graph-builder.h

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

#ifndef SEQFB_GRAPH_BUILDER_H_
#define SEQFB_GRAPH_BUILDER_H_

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "seqfb/automaton.h"
#include "seqfb/hmm-topology.h"
#include "seqfb/language-model.h"
#include "seqfb/lexicon.h"

namespace seqfb {

struct GraphOptions {
  LexiconFstOptions lexicon;
  /// Multiplies every LM log-probability in the graphs.
  double lm_scale = 1.0;
  /// Numerator graphs carry the LM score of the reference, so that a
  /// numerator path weighs exactly what the same path weighs in the
  /// denominator graph.
  bool numerator_lm = true;
};

struct GraphStats {
  std::string graph;
  StateId states = 0;
  size_t edges = 0;
};

void WriteGraphStatsCsv(std::ostream &os, const std::vector<GraphStats> &stats);

/// Linear acceptor for a word sequence.
Automaton BuildWordAcceptor(const std::vector<Label> &words, Label vocab_size);

/// Holds the lexicon, LM, context and topology of one setup together with
/// the component transducers built from them, and produces training graphs.
/// Immutable after construction, so one factory may serve many threads.
class GraphFactory {
 public:
  GraphFactory(Lexicon lex, NGramLM lm, ContextMode mode, HmmTopology topo,
               GraphOptions opts = {});

  const Lexicon &Lex() const { return lex_; }
  const NGramLM &Lm() const { return lm_; }
  const ContextConfig &Context() const { return ctx_; }
  const HmmTopology &Topology() const { return topo_; }
  const GraphOptions &Options() const { return opts_; }
  Label NumClasses() const { return ctx_.NumClasses(); }
  Label VocabSize() const { return lex_.words.Size(); }
  const std::vector<bool> &SilenceClasses() const { return silence_classes_; }

  /// Emission-ready, trimmed H o C o L o G.
  const Automaton &Denominator() const { return den_; }
  /// All alignments of `words` with optional silence; throws DataError
  /// listing out-of-vocabulary ids.
  Automaton Numerator(const std::vector<Label> &words) const;

  /// Emission-ready graph of one word (or, for kEpsilon, one silence) from
  /// loop state to loop state, without the LM score.  Denominator paths are
  /// exactly the concatenations of such segments.
  const Automaton &Segment(Label word) const;
  /// LM weight (already scaled) of the word `word` after `history`; for a
  /// unigram model the history is ignored.  kEpsilon as word means silence
  /// and scores zero.
  double SegmentLmScore(Label history, Label word) const;
  double EndLmScore(Label history) const;

  std::vector<GraphStats> Stats() const { return stats_; }

 private:
  Automaton Finish(const Automaton &a, const std::string &what) const;

  Lexicon lex_;
  NGramLM lm_;
  ContextConfig ctx_;
  HmmTopology topo_;
  GraphOptions opts_;
  std::vector<bool> silence_classes_;
  Automaton h_, l_, g_, den_;
  std::vector<Automaton> segments_;  // index word + 1, silence at 0
  std::vector<GraphStats> stats_;
};

Automaton BuildDenominatorGraph(const NGramLM &lm, const Lexicon &lex, ContextMode mode,
                                const HmmTopology &topo, const GraphOptions &opts = {});
Automaton BuildNumeratorGraph(const std::vector<Label> &words, const Lexicon &lex,
                              ContextMode mode, const HmmTopology &topo,
                              const NGramLM *lm = nullptr, const GraphOptions &opts = {});

}  // namespace seqfb

#endif  // SEQFB_GRAPH_BUILDER_H_
