// seqfb/language-model.h

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

#ifndef SEQFB_LANGUAGE_MODEL_H_
#define SEQFB_LANGUAGE_MODEL_H_

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqfb/automaton.h"

namespace seqfb {

inline const std::string kSentenceBegin = "<s>";
inline const std::string kSentenceEnd = "</s>";

/// Word n-gram model of order 1 or 2 in natural-log probabilities.
///
/// Order 1: `unigram` sums to one over the vocabulary, plus "</s>" if it is
/// listed (without it, sentence end costs nothing).  Order 2: a history h
/// with explicit successors W(h) satisfies
///   sum_{w in W(h)} p(w|h) + bo(h) * sum_{w not in W(h)} p_uni(w) = 1,
/// where "</s>" counts as a successor and "<s>" is only a history.
struct NGramLM {
  int order = 1;
  std::map<std::string, double> unigram;
  std::map<std::string, double> backoff;
  std::map<std::pair<std::string, std::string>, double> bigram;

  /// Throws ConfigError if a normalization invariant is off by more than
  /// 1e-6 or the order is unsupported.
  void Check() const;

  /// ln p(word | history): the explicit bigram if there is one, else
  /// backoff(history) + unigram.  Order-1 models ignore the history.
  double Score(const std::string &history, const std::string &word) const;
  /// Log weight of ending the sentence after `history`.
  double EndScore(const std::string &history) const;

  static NGramLM Uniform(const std::vector<std::string> &words);

  /// ARPA-style text restricted to orders 1 and 2; probabilities are log10.
  static NGramLM ReadArpa(std::istream &is, const std::string &source_name);
  void WriteArpa(std::ostream &os) const;
};

/// Word acceptor for the LM with weights multiplied by `lm_scale`.
///
/// A unigram becomes one looping state whose final weight is the sentence
/// end score.  A bigram gets one state per history ("<s>" is the start);
/// a history with mass left for the unigram also gets a private backoff
/// state, reached by an epsilon-word arc weighted by its backoff weight, that
/// reads only the words lacking an explicit bigram.  Every word string thus
/// has exactly the model's probability.  Throws ConfigError if a vocabulary word
/// has no unigram entry.
Automaton BuildLmAcceptor(const NGramLM &lm, const SymbolTable &vocab, double lm_scale = 1.0);

}  // namespace seqfb

#endif  // SEQFB_LANGUAGE_MODEL_H_
