// Small lexicons and language models shared by the tests.

#ifndef SEQFB_TESTS_TOY_SETUP_H_
#define SEQFB_TESTS_TOY_SETUP_H_

#include <sstream>
#include <string>

#include "seqfb/graph-builder.h"

namespace seqfb::testing {

inline Lexicon LexiconFromString(const std::string &text, const std::string &sil = "sil") {
  std::istringstream is(text);
  return Lexicon::Read(is, "<test>", sil);
}

inline NGramLM ArpaFromString(const std::string &text) {
  std::istringstream is(text);
  return NGramLM::ReadArpa(is, "<test>");
}

// Three words over two phones; small enough for path enumeration.
inline Lexicon TinyLexicon() { return LexiconFromString("a x\nb y\nab x y\n"); }

inline NGramLM TinyUnigram() {
  NGramLM lm;
  lm.unigram = {{"a", std::log(0.5)}, {"b", std::log(0.3)}, {"ab", std::log(0.2)}};
  return lm;
}

inline HmmTopology OneStateLikeTopology() {
  // Every HMM state passes on immediately: each unit lasts exactly 3 frames.
  HmmTopology t;
  t.probs = {{{0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}}};
  return t;
}

inline HmmTopology LoopTopology(double loop = 0.5) {
  HmmTopology t;
  t.probs = {{{loop, 1 - loop, 0.0}, {loop, 1 - loop, 0.0}, {loop, 1 - loop, 0.0}}};
  return t;
}

}  // namespace seqfb::testing

#endif  // SEQFB_TESTS_TOY_SETUP_H_
