// seqfb/graph-builder.cc

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

#include "seqfb/graph-builder.h"

#include <ostream>

#include "seqfb/fst-ops.h"

namespace seqfb {

void WriteGraphStatsCsv(std::ostream &os, const std::vector<GraphStats> &stats) {
  os << "graph,states,edges\n";
  for (const GraphStats &s : stats) os << s.graph << ',' << s.states << ',' << s.edges << '\n';
}

Automaton BuildWordAcceptor(const std::vector<Label> &words, Label vocab_size) {
  AutomatonBuilder b;
  StateId cur = b.AddState();
  b.SetStart(cur);
  for (Label w : words) {
    StateId next = b.AddState();
    b.AddArc(cur, next, w, w, kLogOne);
    cur = next;
  }
  b.SetFinal(cur, kLogOne);
  return std::move(b).Build(vocab_size, vocab_size);
}

namespace {

GraphStats StatsOf(const std::string &name, const Automaton &a) {
  return {name, a.NumStates(), a.NumArcs()};
}

Automaton ComposeNonEmpty(const Automaton &a, const Automaton &b, const std::string &what) {
  Automaton c = Compose(a, b);
  if (c.Empty()) throw ConfigError("graph construction failed: " + what + " is empty");
  return c;
}

}  // namespace

GraphFactory::GraphFactory(Lexicon lex, NGramLM lm, ContextMode mode, HmmTopology topo,
                           GraphOptions opts)
    : lex_(std::move(lex)), lm_(std::move(lm)), topo_(topo), opts_(opts) {
  lex_.Check();
  topo_.Check();
  if (!(opts_.lm_scale > 0.0)) throw ConfigError("lm_scale must be positive");
  ctx_ = ContextConfig::FromLexicon(lex_, mode);
  silence_classes_ = ctx_.SilenceClasses(lex_);
  h_ = BuildTopologyFst(topo_, ctx_.NumUnits());
  l_ = ExpandContext(BuildLexiconFst(lex_, opts_.lexicon), ctx_);
  g_ = BuildLmAcceptor(lm_, lex_.words, opts_.lm_scale);
  stats_.push_back(StatsOf("H", h_));
  stats_.push_back(StatsOf("CL", l_));
  stats_.push_back(StatsOf("G", g_));
  Automaton lg = ComposeNonEmpty(l_, g_, "lexicon o LM");
  stats_.push_back(StatsOf("CLG", lg));
  Automaton hlg = ComposeNonEmpty(h_, lg, "topology o lexicon o LM");
  stats_.push_back(StatsOf("HCLG", hlg));
  den_ = Finish(hlg, "denominator graph");
  stats_.push_back(StatsOf("den", den_));

  segments_.reserve(lex_.words.Size() + 1);
  for (Label w = kEpsilon; w < lex_.words.Size(); w++) {
    if (w == kEpsilon && !opts_.lexicon.allow_optional_silence) {
      segments_.emplace_back();
      continue;
    }
    Automaton lw = ExpandContext(BuildLexiconSegmentFst(lex_, opts_.lexicon, w), ctx_);
    std::string what = "segment graph of " + (w == kEpsilon ? std::string("silence")
                                                              : "'" + lex_.words.Name(w) + "'");
    segments_.push_back(Finish(ComposeNonEmpty(h_, lw, what), what));
  }
}

Automaton GraphFactory::Finish(const Automaton &a, const std::string &what) const {
  Automaton out = Trim(RemoveEmissionEpsilons(a));
  if (out.Empty()) throw ConfigError("graph construction failed: " + what + " is empty");
  Diagnostics d = Validate(out, {.require_emission_ready = true});
  if (!d.ok) throw NumericalError(what + " failed validation: " + d.Summary());
  return out;
}

Automaton GraphFactory::Numerator(const std::vector<Label> &words) const {
  std::string oov;
  for (Label w : words)
    if (w < 0 || w >= lex_.words.Size()) oov += (oov.empty() ? "" : ",") + std::to_string(w);
  if (!oov.empty()) throw DataError("reference contains out-of-vocabulary word ids: " + oov);
  Automaton w = BuildWordAcceptor(words, lex_.words.Size());
  if (opts_.numerator_lm) w = ComposeNonEmpty(w, g_, "reference o LM");
  Automaton lw = ComposeNonEmpty(l_, w, "lexicon o reference");
  return Finish(ComposeNonEmpty(h_, lw, "topology o lexicon o reference"), "numerator graph");
}

const Automaton &GraphFactory::Segment(Label word) const {
  if (word < kEpsilon || word >= lex_.words.Size())
    throw ConfigError("no segment graph for word id " + std::to_string(word));
  const Automaton &seg = segments_[word + 1];
  if (seg.Empty()) throw ConfigError("silence segments are disabled");
  return seg;
}

double GraphFactory::SegmentLmScore(Label history, Label word) const {
  if (word == kEpsilon) return kLogOne;
  const std::string &h = history == kEpsilon ? kSentenceBegin : lex_.words.Name(history);
  return opts_.lm_scale * lm_.Score(h, lex_.words.Name(word));
}

double GraphFactory::EndLmScore(Label history) const {
  const std::string &h = history == kEpsilon ? kSentenceBegin : lex_.words.Name(history);
  return opts_.lm_scale * lm_.EndScore(h);
}

Automaton BuildDenominatorGraph(const NGramLM &lm, const Lexicon &lex, ContextMode mode,
                                const HmmTopology &topo, const GraphOptions &opts) {
  return GraphFactory(lex, lm, mode, topo, opts).Denominator();
}

Automaton BuildNumeratorGraph(const std::vector<Label> &words, const Lexicon &lex,
                              ContextMode mode, const HmmTopology &topo, const NGramLM *lm,
                              const GraphOptions &opts) {
  GraphOptions o = opts;
  o.numerator_lm = lm != nullptr;
  std::vector<std::string> names = lex.words.Names();
  return GraphFactory(lex, lm ? *lm : NGramLM::Uniform(names), mode, topo, o).Numerator(words);
}

}  // namespace seqfb
