// seqfb/fst-ops.h

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

#ifndef SEQFB_FST_OPS_H_
#define SEQFB_FST_OPS_H_

#include <vector>

#include "seqfb/automaton.h"

namespace seqfb {

std::vector<bool> Accessible(const Automaton &a);
std::vector<bool> Coaccessible(const Automaton &a);

/// Removes every state that is not both accessible and coaccessible.  The
/// surviving states keep their relative order.  Returns the empty automaton
/// if the start state does not survive.
Automaton Trim(const Automaton &a);

/// Composition of a (x:y) with b (y:z), matching a's word labels against b's
/// emission labels.  Epsilon moves go through the usual three-state filter
/// (simultaneous epsilon moves first, then one-sided moves of a single
/// side), so every epsilon path is counted once.  The result is trimmed and
/// may be empty.  Throws ConfigError when both alphabets are declared and
/// differ.
Automaton Compose(const Automaton &a, const Automaton &b);

/// Returns an equivalent automaton without emission-epsilon arcs.
///
/// Weights of epsilon paths are folded into the following emitting arc; the
/// closure over epsilon cycles is computed exactly per strongly connected
/// component as (I - A)^-1, and a DivergenceError is raised if that series
/// does not converge.  Word labels met on epsilon paths are carried forward
/// to the next emitting arcs; when more than one word is pending, auxiliary
/// states hold the overflow so every arc keeps a single word label.
/// Word-labelled epsilon cycles raise DivergenceError, and words still
/// pending at a final state raise ConfigError.
Automaton RemoveEmissionEpsilons(const Automaton &a);

/// Fewest emitting arcs on any start-to-final path, or -1 if no final state
/// is reachable.
int64_t ShortestAcceptedLength(const Automaton &a);

}  // namespace seqfb

#endif  // SEQFB_FST_OPS_H_
