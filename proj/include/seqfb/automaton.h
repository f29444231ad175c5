// seqfb/automaton.h

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

#ifndef SEQFB_AUTOMATON_H_
#define SEQFB_AUTOMATON_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqfb/base.h"

namespace seqfb {

/// One transition.  `emit` is the input side (phone, context unit or
/// emission class depending on the graph), `word` the output side.
struct Arc {
  StateId src = 0;
  StateId dst = 0;
  Label emit = kEpsilon;
  Label word = kEpsilon;
  double weight = kLogOne;

  bool operator==(const Arc &) const = default;
};

/// Immutable weighted transducer over the log semiring.
///
/// Arcs are stored grouped by source state in one contiguous array with an
/// offset table, so a time-synchronous sweep touches every arc exactly once
/// in index order.  An automaton with zero states is the empty automaton.
class Automaton {
 public:
  Automaton() = default;

  /// Arcs with an out-of-range source are rejected; an out-of-range
  /// destination is kept so that Validate() can report it.  Arcs are sorted
  /// stably by source.
  Automaton(StateId num_states, StateId start, std::vector<Arc> arcs,
            std::vector<double> finals, Label input_alphabet_size = 0,
            Label output_alphabet_size = 0);

  StateId NumStates() const { return num_states_; }
  size_t NumArcs() const { return arcs_.size(); }
  StateId Start() const { return start_; }
  bool Empty() const { return num_states_ == 0; }

  std::span<const Arc> Arcs() const { return arcs_; }
  std::span<const Arc> ArcsFrom(StateId s) const {
    return std::span<const Arc>(arcs_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
  }
  /// Global index of the first arc leaving `s`.
  size_t ArcOffset(StateId s) const { return offsets_[s]; }

  double Final(StateId s) const { return finals_[s]; }
  bool IsFinal(StateId s) const { return finals_[s] != kLogZero; }
  const std::vector<double> &Finals() const { return finals_; }

  /// Alphabet sizes; labels are 0-based, 0 means "not declared".
  Label InputAlphabetSize() const { return input_size_; }
  Label OutputAlphabetSize() const { return output_size_; }
  Automaton WithAlphabets(Label input_size, Label output_size) const;

  /// True when no arc carries an epsilon emission label.
  bool IsEmissionReady() const;

  bool operator==(const Automaton &other) const;

 private:
  StateId num_states_ = 0;
  StateId start_ = kNoState;
  std::vector<Arc> arcs_;
  std::vector<size_t> offsets_ = {0};
  std::vector<double> finals_;
  Label input_size_ = 0;
  Label output_size_ = 0;
};

/// Incremental construction of an Automaton.  Arcs of weight -inf are
/// dropped since they contribute nothing to any sum.
class AutomatonBuilder {
 public:
  StateId AddState();
  StateId AddStates(StateId n);
  StateId NumStates() const { return num_states_; }
  void SetStart(StateId s) { start_ = s; }
  void SetFinal(StateId s, double weight);
  void AddArc(StateId src, StateId dst, Label emit, Label word, double weight);
  Automaton Build(Label input_alphabet_size = 0, Label output_alphabet_size = 0) &&;

 private:
  StateId num_states_ = 0;
  StateId start_ = kNoState;
  std::vector<Arc> arcs_;
  std::vector<double> finals_;
};

struct ValidateOptions {
  bool require_emission_ready = false;
};

/// Findings of Validate().  `ok` is true iff every count is zero.
struct Diagnostics {
  bool ok = true;
  int64_t nan_weights = 0;
  int64_t dangling_arcs = 0;
  int64_t unreachable_states = 0;  // not accessible from the start state
  int64_t dead_end_states = 0;     // accessible but cannot reach a final state
  int64_t epsilon_emit_arcs = 0;   // only counted as a finding if required
  bool missing_start = false;
  bool missing_final = false;

  std::string Summary() const;
};

Diagnostics Validate(const Automaton &a, const ValidateOptions &opts = {});

/// id <-> name mapping; ids are dense and 0-based.  Epsilon (-1) is implicit
/// and printed as "<eps>".
class SymbolTable {
 public:
  Label AddSymbol(const std::string &name);
  std::optional<Label> Find(const std::string &name) const;
  const std::string &Name(Label id) const;
  Label Size() const { return static_cast<Label>(names_.size()); }
  const std::vector<std::string> &Names() const { return names_; }

  void Write(std::ostream &os) const;
  static SymbolTable Read(std::istream &is, const std::string &source_name);

  bool operator==(const SymbolTable &other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Label> ids_;
};

/// Text format, one record per line: "src dst emit word weight" for arcs and
/// "state weight" for final states.  The start state is listed first.
/// Weights are printed with 17 significant digits so the text round-trips.
void WriteText(std::ostream &os, const Automaton &a);
Automaton ReadText(std::istream &is, const std::string &source_name);

std::string FormatWeight(double w);
std::string FormatLabel(Label l);

}  // namespace seqfb

#endif  // SEQFB_AUTOMATON_H_
