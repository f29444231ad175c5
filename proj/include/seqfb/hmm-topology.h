// seqfb/hmm-topology.h

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

#ifndef SEQFB_HMM_TOPOLOGY_H_
#define SEQFB_HMM_TOPOLOGY_H_

#include <array>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "seqfb/automaton.h"
#include "seqfb/lexicon.h"

namespace seqfb {

inline constexpr int kStatesPerUnit = 3;

/// Three-state left-to-right HMM shared by every context unit.
///
/// probs[k] = {loop, forward, skip} as linear probabilities.  For the last
/// state "forward" means leaving the unit and skip must be zero; a skip from
/// the middle state leaves the unit directly.
struct HmmTopology {
  std::array<std::array<double, 3>, kStatesPerUnit> probs = {{
      {0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}}};

  void Check() const;
  /// Fewest frames needed to traverse one unit.
  int MinFrames() const;
};

enum class ContextMode { kMonophone, kTriphone };

ContextMode ParseContextMode(const std::string &name);
std::string ContextModeName(ContextMode mode);

/// A phone in context; kEpsilon on either side stands for a word boundary.
struct ContextUnit {
  Label left = kEpsilon;
  Label center = kEpsilon;
  Label right = kEpsilon;

  auto operator<=>(const ContextUnit &) const = default;
};

/// The set of context units and their emission classes.  Unit u owns the
/// classes 3u, 3u+1, 3u+2, one per HMM state.
class ContextConfig {
 public:
  ContextConfig() = default;
  ContextConfig(ContextMode mode, std::vector<ContextUnit> units);

  /// Monophone: one unit per phone.  Triphone: every within-word triphone
  /// the lexicon can produce, plus the silence phone without context.
  static ContextConfig FromLexicon(const Lexicon &lex, ContextMode mode);

  ContextMode Mode() const { return mode_; }
  Label NumUnits() const { return static_cast<Label>(units_.size()); }
  Label NumClasses() const { return NumUnits() * kStatesPerUnit; }
  const ContextUnit &Unit(Label u) const { return units_.at(u); }

  /// Throws ConfigError for a unit that has no class.
  Label UnitId(const ContextUnit &unit) const;
  static Label ClassOf(Label unit, int state) { return unit * kStatesPerUnit + state; }
  static Label UnitOfClass(Label cls) { return cls / kStatesPerUnit; }

  /// Mask over classes, true for classes of units centered on silence.
  std::vector<bool> SilenceClasses(const Lexicon &lex) const;
  std::string UnitName(Label u, const SymbolTable &phones) const;

 private:
  ContextMode mode_ = ContextMode::kMonophone;
  std::vector<ContextUnit> units_;
  std::map<ContextUnit, Label> ids_;
};

/// Relabels the phone (emission) side of a lexicon-like transducer with
/// context units.  A state is inside a word when it is neither start nor
/// final and has exactly one incoming and one outgoing arc, both emitting;
/// any other state is a word boundary.  Weights and word labels are kept.
Automaton ExpandContext(const Automaton &phone_graph, const ContextConfig &cfg);

/// Transducer from emission classes to context units built around a loop
/// state (start and final).  Entering unit u emits its first class and
/// outputs u; leaving the unit is an epsilon arc back to the loop state.
Automaton BuildTopologyFst(const HmmTopology &topo, Label num_units);

}  // namespace seqfb

#endif  // SEQFB_HMM_TOPOLOGY_H_
