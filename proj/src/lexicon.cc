// seqfb/lexicon.cc

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

#include "seqfb/lexicon.h"

#include <istream>
#include <ostream>
#include <sstream>

namespace seqfb {

void Lexicon::Check() const {
  if (words.Size() == 0) throw ConfigError("lexicon has no words");
  if (silence_phone == kEpsilon || silence_phone >= phones.Size())
    throw ConfigError("lexicon has no valid silence phone");
  std::vector<double> mass(words.Size(), 0.0);
  std::vector<int> count(words.Size(), 0);
  for (const Pronunciation &p : prons) {
    if (p.word < 0 || p.word >= words.Size())
      throw ConfigError("pronunciation for unknown word id " + std::to_string(p.word));
    if (p.phones.empty())
      throw ConfigError("empty pronunciation for word '" + words.Name(p.word) + "'");
    for (Label ph : p.phones)
      if (ph < 0 || ph >= phones.Size())
        throw ConfigError("unknown phone id in pronunciation of '" + words.Name(p.word) + "'");
    if (!(p.log_prob <= 0.0))
      throw ConfigError("pronunciation probability above one for '" + words.Name(p.word) + "'");
    mass[p.word] += std::exp(p.log_prob);
    count[p.word]++;
  }
  for (Label w = 0; w < words.Size(); w++) {
    if (count[w] == 0) throw ConfigError("word '" + words.Name(w) + "' has no pronunciation");
    if (mass[w] > 1.0 + 1e-9)
      throw ConfigError("pronunciation probabilities of '" + words.Name(w) + "' sum to " +
                        std::to_string(mass[w]));
  }
}

std::vector<const Pronunciation *> Lexicon::PronunciationsOf(Label word) const {
  std::vector<const Pronunciation *> out;
  for (const Pronunciation &p : prons)
    if (p.word == word) out.push_back(&p);
  return out;
}

Lexicon Lexicon::Read(std::istream &is, const std::string &source_name,
                      const std::string &silence_phone) {
  Lexicon lex;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    Pronunciation p;
    p.word = lex.words.AddSymbol(tok[0]);
    size_t end = tok.size();
    if (end >= 2) {
      char *stop = nullptr;
      double prob = std::strtod(tok.back().c_str(), &stop);
      if (stop == tok.back().c_str() + tok.back().size()) {
        if (!(prob > 0.0 && prob <= 1.0))
          throw ConfigError(where + ": pronunciation probability must be in (0, 1]");
        p.log_prob = std::log(prob);
        end--;
      }
    }
    if (end < 2) throw ConfigError(where + ": empty pronunciation for '" + tok[0] + "'");
    for (size_t i = 1; i < end; i++) p.phones.push_back(lex.phones.AddSymbol(tok[i]));
    lex.prons.push_back(std::move(p));
  }
  if (lex.words.Size() == 0) throw ConfigError(source_name + ": lexicon is empty");
  lex.silence_phone = lex.phones.AddSymbol(silence_phone);
  lex.Check();
  return lex;
}

void Lexicon::Write(std::ostream &os) const {
  for (const Pronunciation &p : prons) {
    os << words.Name(p.word);
    for (Label ph : p.phones) os << ' ' << phones.Name(ph);
    os << ' ' << FormatWeight(std::exp(p.log_prob)) << '\n';
  }
}

namespace {

double WordEntryLogProb(const LexiconFstOptions &opts) {
  if (!opts.allow_optional_silence) return kLogOne;
  if (!(opts.silence_log_prob < 0.0))
    throw ConfigError("silence insertion probability must be below one");
  return std::log1p(-std::exp(opts.silence_log_prob));
}

// Adds the path of one pronunciation from `from` to `to`.
void AddPronunciationPath(AutomatonBuilder &b, StateId from, StateId to,
                          const Pronunciation &p, double entry) {
  StateId cur = from;
  for (size_t i = 0; i < p.phones.size(); i++) {
    StateId next = (i + 1 == p.phones.size()) ? to : b.AddState();
    Label word = i == 0 ? p.word : kEpsilon;
    double w = i == 0 ? p.log_prob + entry : kLogOne;
    b.AddArc(cur, next, p.phones[i], word, w);
    cur = next;
  }
}

}  // namespace

Automaton BuildLexiconFst(const Lexicon &lex, const LexiconFstOptions &opts) {
  lex.Check();
  const double entry = WordEntryLogProb(opts);
  AutomatonBuilder b;
  StateId loop = b.AddState();
  b.SetStart(loop);
  b.SetFinal(loop, kLogOne);
  for (const Pronunciation &p : lex.prons) AddPronunciationPath(b, loop, loop, p, entry);
  if (opts.allow_optional_silence)
    b.AddArc(loop, loop, lex.silence_phone, kEpsilon, opts.silence_log_prob);
  return std::move(b).Build(lex.phones.Size(), lex.words.Size());
}

Automaton BuildLexiconSegmentFst(const Lexicon &lex, const LexiconFstOptions &opts,
                                 Label word) {
  lex.Check();
  const double entry = WordEntryLogProb(opts);
  AutomatonBuilder b;
  StateId start = b.AddState(), end = b.AddState();
  b.SetStart(start);
  b.SetFinal(end, kLogOne);
  if (word == kEpsilon) {
    if (!opts.allow_optional_silence)
      throw ConfigError("silence segment requested but optional silence is disabled");
    b.AddArc(start, end, lex.silence_phone, kEpsilon, opts.silence_log_prob);
  } else {
    auto prons = lex.PronunciationsOf(word);
    if (prons.empty()) throw ConfigError("no pronunciation for word id " + std::to_string(word));
    for (const Pronunciation *p : prons) AddPronunciationPath(b, start, end, *p, entry);
  }
  return std::move(b).Build(lex.phones.Size(), lex.words.Size());
}

}  // namespace seqfb
