// seqfb/automaton.cc

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

#include "seqfb/automaton.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "seqfb/fst-ops.h"

namespace seqfb {

Automaton::Automaton(StateId num_states, StateId start, std::vector<Arc> arcs,
                     std::vector<double> finals, Label input_alphabet_size,
                     Label output_alphabet_size)
    : num_states_(num_states),
      start_(start),
      arcs_(std::move(arcs)),
      finals_(std::move(finals)),
      input_size_(input_alphabet_size),
      output_size_(output_alphabet_size) {
  if (num_states_ < 0) throw ConfigError("negative state count");
  finals_.resize(num_states_, kLogZero);
  if (num_states_ == 0) {
    start_ = kNoState;
    if (!arcs_.empty()) throw ConfigError("arcs in an automaton without states");
  }
  for (const Arc &arc : arcs_) {
    if (arc.src < 0 || arc.src >= num_states_)
      throw ConfigError("arc source " + std::to_string(arc.src) + " out of range");
  }
  std::stable_sort(arcs_.begin(), arcs_.end(),
                   [](const Arc &x, const Arc &y) { return x.src < y.src; });
  offsets_.assign(num_states_ + 1, 0);
  for (const Arc &arc : arcs_) offsets_[arc.src + 1]++;
  for (StateId s = 0; s < num_states_; s++) offsets_[s + 1] += offsets_[s];
}

Automaton Automaton::WithAlphabets(Label input_size, Label output_size) const {
  Automaton copy = *this;
  copy.input_size_ = input_size;
  copy.output_size_ = output_size;
  return copy;
}

bool Automaton::IsEmissionReady() const {
  return std::none_of(arcs_.begin(), arcs_.end(),
                      [](const Arc &arc) { return arc.emit == kEpsilon; });
}

bool Automaton::operator==(const Automaton &other) const {
  return num_states_ == other.num_states_ && start_ == other.start_ &&
         arcs_ == other.arcs_ && finals_ == other.finals_ &&
         input_size_ == other.input_size_ && output_size_ == other.output_size_;
}

StateId AutomatonBuilder::AddState() {
  finals_.push_back(kLogZero);
  return num_states_++;
}

StateId AutomatonBuilder::AddStates(StateId n) {
  StateId first = num_states_;
  for (StateId i = 0; i < n; i++) AddState();
  return first;
}

void AutomatonBuilder::SetFinal(StateId s, double weight) { finals_.at(s) = weight; }

void AutomatonBuilder::AddArc(StateId src, StateId dst, Label emit, Label word,
                              double weight) {
  if (weight == kLogZero) return;
  arcs_.push_back(Arc{src, dst, emit, word, weight});
}

Automaton AutomatonBuilder::Build(Label input_alphabet_size,
                                  Label output_alphabet_size) && {
  return Automaton(num_states_, num_states_ == 0 ? kNoState : start_,
                   std::move(arcs_), std::move(finals_), input_alphabet_size,
                   output_alphabet_size);
}

std::string Diagnostics::Summary() const {
  std::ostringstream os;
  os << (ok ? "pass" : "fail") << ": nan_weights=" << nan_weights
     << " dangling_arcs=" << dangling_arcs
     << " unreachable_states=" << unreachable_states
     << " dead_end_states=" << dead_end_states
     << " epsilon_emit_arcs=" << epsilon_emit_arcs
     << " missing_start=" << missing_start << " missing_final=" << missing_final;
  return os.str();
}

Diagnostics Validate(const Automaton &a, const ValidateOptions &opts) {
  Diagnostics d;
  const StateId n = a.NumStates();
  for (const Arc &arc : a.Arcs()) {
    if (std::isnan(arc.weight)) d.nan_weights++;
    if (arc.dst < 0 || arc.dst >= n) d.dangling_arcs++;
    if (arc.emit == kEpsilon) d.epsilon_emit_arcs++;
  }
  bool any_final = false;
  for (StateId s = 0; s < n; s++) {
    double f = a.Final(s);
    if (std::isnan(f)) d.nan_weights++;
    else if (f != kLogZero) any_final = true;
  }
  d.missing_final = !any_final;
  d.missing_start = n > 0 && (a.Start() < 0 || a.Start() >= n);
  if (n > 0 && !d.missing_start) {
    std::vector<bool> acc = Accessible(a), coacc = Coaccessible(a);
    for (StateId s = 0; s < n; s++) {
      if (!acc[s]) d.unreachable_states++;
      else if (!coacc[s]) d.dead_end_states++;
    }
  }
  d.ok = d.nan_weights == 0 && d.dangling_arcs == 0 && d.unreachable_states == 0 &&
         d.dead_end_states == 0 && !d.missing_final && !d.missing_start &&
         (!opts.require_emission_ready || d.epsilon_emit_arcs == 0);
  return d;
}

Label SymbolTable::AddSymbol(const std::string &name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  Label id = Size();
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

std::optional<Label> SymbolTable::Find(const std::string &name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string &SymbolTable::Name(Label id) const {
  static const std::string eps = "<eps>";
  if (id == kEpsilon) return eps;
  return names_.at(id);
}

void SymbolTable::Write(std::ostream &os) const {
  for (Label i = 0; i < Size(); i++) os << names_[i] << ' ' << i << '\n';
}

SymbolTable SymbolTable::Read(std::istream &is, const std::string &source_name) {
  SymbolTable table;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    std::istringstream ls(line);
    std::string name;
    Label id;
    if (!(ls >> name)) continue;
    if (!(ls >> id) || id != table.Size() || table.Find(name))
      throw DataError(source_name + ":" + std::to_string(line_no) +
                      ": expected '<name> " + std::to_string(table.Size()) + "'");
    table.AddSymbol(name);
  }
  return table;
}

std::string FormatWeight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

std::string FormatLabel(Label l) { return l == kEpsilon ? "<eps>" : std::to_string(l); }

void WriteText(std::ostream &os, const Automaton &a) {
  if (a.Empty()) return;
  auto write_state = [&](StateId s) {
    for (const Arc &arc : a.ArcsFrom(s)) {
      os << arc.src << ' ' << arc.dst << ' ' << FormatLabel(arc.emit) << ' '
         << FormatLabel(arc.word) << ' ' << FormatWeight(arc.weight) << '\n';
    }
    if (a.IsFinal(s)) os << s << ' ' << FormatWeight(a.Final(s)) << '\n';
  };
  write_state(a.Start());
  for (StateId s = 0; s < a.NumStates(); s++)
    if (s != a.Start()) write_state(s);
}

namespace {

int64_t ParseInt(const std::string &tok, const std::string &where) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw DataError(where + ": bad integer '" + tok + "'");
  return v;
}

Label ParseLabel(const std::string &tok, const std::string &where) {
  if (tok == "<eps>") return kEpsilon;
  int64_t v = ParseInt(tok, where);
  if (v < 0) throw DataError(where + ": negative label");
  return static_cast<Label>(v);
}

double ParseWeight(const std::string &tok, const std::string &where) {
  char *end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size())
    throw DataError(where + ": bad weight '" + tok + "'");
  return v;
}

}  // namespace

Automaton ReadText(std::istream &is, const std::string &source_name) {
  std::vector<Arc> arcs;
  std::vector<std::pair<StateId, double>> finals;
  StateId start = kNoState, max_state = -1;
  Label max_emit = -1, max_word = -1;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    const std::string where = source_name + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() == 5) {
      Arc arc;
      arc.src = static_cast<StateId>(ParseInt(tok[0], where));
      arc.dst = static_cast<StateId>(ParseInt(tok[1], where));
      arc.emit = ParseLabel(tok[2], where);
      arc.word = ParseLabel(tok[3], where);
      arc.weight = ParseWeight(tok[4], where);
      if (arc.src < 0 || arc.dst < 0) throw DataError(where + ": negative state id");
      if (!std::isfinite(arc.weight)) throw DataError(where + ": non-finite arc weight");
      if (start == kNoState) start = arc.src;
      max_state = std::max({max_state, arc.src, arc.dst});
      max_emit = std::max(max_emit, arc.emit);
      max_word = std::max(max_word, arc.word);
      arcs.push_back(arc);
    } else if (tok.size() == 2 || tok.size() == 1) {
      StateId s = static_cast<StateId>(ParseInt(tok[0], where));
      double w = tok.size() == 2 ? ParseWeight(tok[1], where) : kLogOne;
      if (s < 0) throw DataError(where + ": negative state id");
      if (start == kNoState) start = s;
      max_state = std::max(max_state, s);
      finals.emplace_back(s, w);
    } else {
      throw DataError(where + ": expected 'src dst emit word weight' or 'state weight'");
    }
  }
  if (start == kNoState) return Automaton();
  std::vector<double> final_weights(max_state + 1, kLogZero);
  for (auto [s, w] : finals) final_weights[s] = w;
  return Automaton(max_state + 1, start, std::move(arcs), std::move(final_weights),
                   max_emit + 1, max_word + 1);
}

}  // namespace seqfb
