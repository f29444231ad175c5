// seqfb/lexicon.h

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

#ifndef SEQFB_LEXICON_H_
#define SEQFB_LEXICON_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "seqfb/automaton.h"

namespace seqfb {

struct Pronunciation {
  Label word = kEpsilon;
  std::vector<Label> phones;
  double log_prob = kLogOne;
};

/// Words, phones and pronunciations.  The silence phone is a phone, not a
/// word: it is inserted between words by the lexicon transducer.
struct Lexicon {
  SymbolTable words;
  SymbolTable phones;
  Label silence_phone = kEpsilon;
  std::vector<Pronunciation> prons;

  /// Throws ConfigError on an empty lexicon, a word without pronunciation,
  /// an empty pronunciation, pronunciation probabilities of one word summing
  /// above one, or a missing silence phone.
  void Check() const;

  std::vector<const Pronunciation *> PronunciationsOf(Label word) const;
  bool IsSilence(Label phone) const { return phone == silence_phone; }

  /// Lines "word phone1 phone2 ... [prob]"; the optional trailing token is a
  /// linear probability.  `silence_phone` is added to the phone table if no
  /// pronunciation uses it.
  static Lexicon Read(std::istream &is, const std::string &source_name,
                      const std::string &silence_phone = "sil");
  void Write(std::ostream &os) const;
};

struct LexiconFstOptions {
  bool allow_optional_silence = true;
  /// Log-probability of taking a silence instead of a word at each word
  /// boundary.  Words then carry log(1 - exp(silence_log_prob)).
  double silence_log_prob = -0.69314718055994531;  // ln 0.5
};

/// Phone-to-word transducer built around a single loop state, which is both
/// start and final.  Each pronunciation is a path leaving and re-entering the
/// loop state; the word label and the pronunciation log-prob sit on its first
/// arc.  With optional silence, a silence-phone self-loop with epsilon output
/// competes with the words at the loop state.
Automaton BuildLexiconFst(const Lexicon &lex, const LexiconFstOptions &opts);

/// Same construction restricted to one word (or, for kEpsilon, to a single
/// silence), with separate start and final states.  Concatenations of these
/// segments reproduce exactly the paths of BuildLexiconFst.
Automaton BuildLexiconSegmentFst(const Lexicon &lex, const LexiconFstOptions &opts,
                                 Label word);

}  // namespace seqfb

#endif  // SEQFB_LEXICON_H_
