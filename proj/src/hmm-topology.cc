// seqfb/hmm-topology.cc

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

#include "seqfb/hmm-topology.h"

#include <algorithm>
#include <set>

namespace seqfb {

void HmmTopology::Check() const {
  for (int k = 0; k < kStatesPerUnit; k++) {
    double sum = 0.0;
    for (double p : probs[k]) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("HMM transition probability out of [0, 1] in state " +
                          std::to_string(k));
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("HMM state " + std::to_string(k) + " transitions sum to " +
                        std::to_string(sum));
  }
  if (probs[2][2] != 0.0) throw ConfigError("the last HMM state cannot skip");
  if (probs[0][1] + probs[0][2] == 0.0 || probs[1][1] + probs[1][2] == 0.0 || probs[2][1] == 0.0)
    throw ConfigError("HMM topology has a state that can never be left");
}

int HmmTopology::MinFrames() const {
  // Shortest walk from state 0 to the exit; skips save one state each.
  int from1 = probs[1][2] > 0.0 ? 1 : 2;  // frames spent from state 1 onwards
  int best = 1 + from1;
  if (probs[0][2] > 0.0) best = std::min(best, 2);
  return best;
}

ContextMode ParseContextMode(const std::string &name) {
  if (name == "monophone") return ContextMode::kMonophone;
  if (name == "triphone") return ContextMode::kTriphone;
  throw ConfigError("unknown context mode '" + name + "' (expected monophone or triphone)");
}

std::string ContextModeName(ContextMode mode) {
  return mode == ContextMode::kMonophone ? "monophone" : "triphone";
}

ContextConfig::ContextConfig(ContextMode mode, std::vector<ContextUnit> units)
    : mode_(mode), units_(std::move(units)) {
  for (Label u = 0; u < NumUnits(); u++) {
    if (!ids_.emplace(units_[u], u).second) throw ConfigError("duplicate context unit");
  }
}

ContextConfig ContextConfig::FromLexicon(const Lexicon &lex, ContextMode mode) {
  std::set<ContextUnit> units;
  if (mode == ContextMode::kMonophone) {
    for (Label p = 0; p < lex.phones.Size(); p++) units.insert({kEpsilon, p, kEpsilon});
  } else {
    units.insert({kEpsilon, lex.silence_phone, kEpsilon});
    for (const Pronunciation &pron : lex.prons) {
      const auto &ph = pron.phones;
      for (size_t i = 0; i < ph.size(); i++) {
        Label l = i > 0 ? ph[i - 1] : kEpsilon;
        Label r = i + 1 < ph.size() ? ph[i + 1] : kEpsilon;
        units.insert({l, ph[i], r});
      }
    }
  }
  return ContextConfig(mode, std::vector<ContextUnit>(units.begin(), units.end()));
}

Label ContextConfig::UnitId(const ContextUnit &unit) const {
  ContextUnit key = unit;
  if (mode_ == ContextMode::kMonophone) key.left = key.right = kEpsilon;
  auto it = ids_.find(key);
  if (it == ids_.end())
    throw ConfigError("no emission class for context unit (" + FormatLabel(unit.left) + "," +
                      FormatLabel(unit.center) + "," + FormatLabel(unit.right) + ")");
  return it->second;
}

std::vector<bool> ContextConfig::SilenceClasses(const Lexicon &lex) const {
  std::vector<bool> mask(NumClasses(), false);
  for (Label u = 0; u < NumUnits(); u++)
    if (lex.IsSilence(units_[u].center))
      for (int k = 0; k < kStatesPerUnit; k++) mask[ClassOf(u, k)] = true;
  return mask;
}

std::string ContextConfig::UnitName(Label u, const SymbolTable &phones) const {
  const ContextUnit &cu = units_.at(u);
  auto name = [&](Label p) { return p == kEpsilon ? std::string("#") : phones.Name(p); };
  if (mode_ == ContextMode::kMonophone) return name(cu.center);
  return name(cu.left) + "-" + name(cu.center) + "+" + name(cu.right);
}

Automaton ExpandContext(const Automaton &g, const ContextConfig &cfg) {
  const StateId n = g.NumStates();
  std::vector<int> in_degree(n, 0);
  std::vector<Label> in_phone(n, kEpsilon);
  for (const Arc &arc : g.Arcs()) {
    in_degree[arc.dst]++;
    in_phone[arc.dst] = arc.emit;
  }
  std::vector<bool> inside(n, false);
  for (StateId s = 0; s < n; s++) {
    auto out = g.ArcsFrom(s);
    inside[s] = s != g.Start() && !g.IsFinal(s) && in_degree[s] == 1 && out.size() == 1 &&
                in_phone[s] != kEpsilon && out[0].emit != kEpsilon;
  }
  std::vector<Arc> arcs;
  arcs.reserve(g.NumArcs());
  for (Arc arc : g.Arcs()) {
    if (arc.emit != kEpsilon) {
      ContextUnit unit{kEpsilon, arc.emit, kEpsilon};
      if (inside[arc.src]) unit.left = in_phone[arc.src];
      if (inside[arc.dst]) unit.right = g.ArcsFrom(arc.dst)[0].emit;
      arc.emit = cfg.UnitId(unit);
    }
    arcs.push_back(arc);
  }
  return Automaton(n, g.Start(), std::move(arcs), g.Finals(), cfg.NumUnits(),
                   g.OutputAlphabetSize());
}

Automaton BuildTopologyFst(const HmmTopology &topo, Label num_units) {
  topo.Check();
  const auto &p = topo.probs;
  auto ln = [](double x) { return x > 0.0 ? std::log(x) : kLogZero; };
  AutomatonBuilder b;
  StateId loop = b.AddState();
  b.SetStart(loop);
  b.SetFinal(loop, kLogOne);
  for (Label u = 0; u < num_units; u++) {
    StateId q0 = b.AddState(), q1 = b.AddState(), q2 = b.AddState();
    auto cls = [u](int k) { return ContextConfig::ClassOf(u, k); };
    b.AddArc(loop, q0, cls(0), u, kLogOne);
    b.AddArc(q0, q0, cls(0), kEpsilon, ln(p[0][0]));
    b.AddArc(q0, q1, cls(1), kEpsilon, ln(p[0][1]));
    b.AddArc(q0, q2, cls(2), kEpsilon, ln(p[0][2]));
    b.AddArc(q1, q1, cls(1), kEpsilon, ln(p[1][0]));
    b.AddArc(q1, q2, cls(2), kEpsilon, ln(p[1][1]));
    b.AddArc(q1, loop, kEpsilon, kEpsilon, ln(p[1][2]));
    b.AddArc(q2, q2, cls(2), kEpsilon, ln(p[2][0]));
    b.AddArc(q2, loop, kEpsilon, kEpsilon, ln(p[2][1]));
  }
  return std::move(b).Build(num_units * kStatesPerUnit, num_units);
}

}  // namespace seqfb
