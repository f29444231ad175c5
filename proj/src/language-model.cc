// seqfb/language-model.cc

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

#include "seqfb/language-model.h"

#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace seqfb {

namespace {

const double kLn10 = std::log(10.0);

template <typename Map, typename Key>
double Lookup(const Map &m, const Key &key) {
  auto it = m.find(key);
  return it == m.end() ? kLogZero : it->second;
}

}  // namespace

void NGramLM::Check() const {
  if (order != 1 && order != 2)
    throw ConfigError("unsupported LM order " + std::to_string(order));
  double total = 0.0;
  for (const auto &[w, lp] : unigram)
    if (w != kSentenceBegin) total += std::exp(lp);
  if (std::fabs(total - 1.0) > 1e-6)
    throw ConfigError("unigram probabilities sum to " + std::to_string(total));
  if (order == 1) return;
  std::set<std::string> histories;
  for (const auto &[h, bo] : backoff) histories.insert(h);
  for (const auto &[key, lp] : bigram) histories.insert(key.first);
  for (const std::string &h : histories) {
    double explicit_mass = 0.0, rest = 0.0;
    for (const auto &[w, lp] : unigram) {
      if (w == kSentenceBegin) continue;
      auto it = bigram.find({h, w});
      if (it != bigram.end()) explicit_mass += std::exp(it->second);
      else rest += std::exp(lp);
    }
    for (const auto &[key, lp] : bigram)
      if (key.first == h && !unigram.count(key.second))
        throw ConfigError("bigram '" + h + " " + key.second + "' has no unigram entry");
    double bo = backoff.count(h) ? std::exp(backoff.at(h)) : 1.0;
    double sum = explicit_mass + bo * rest;
    if (std::fabs(sum - 1.0) > 1e-6)
      throw ConfigError("history '" + h + "' is not normalized (sum " + std::to_string(sum) + ")");
  }
}

double NGramLM::Score(const std::string &history, const std::string &word) const {
  double uni = Lookup(unigram, word);
  if (order == 1) return uni;
  auto it = bigram.find({history, word});
  if (it != bigram.end()) return it->second;
  double bo = backoff.count(history) ? backoff.at(history) : kLogOne;
  return bo + uni;
}

double NGramLM::EndScore(const std::string &history) const {
  if (order == 1) return unigram.count(kSentenceEnd) ? unigram.at(kSentenceEnd) : kLogOne;
  return Score(history, kSentenceEnd);
}

NGramLM NGramLM::Uniform(const std::vector<std::string> &words) {
  NGramLM lm;
  for (const auto &w : words) lm.unigram[w] = -std::log(static_cast<double>(words.size()));
  return lm;
}

NGramLM NGramLM::ReadArpa(std::istream &is, const std::string &source_name) {
  NGramLM lm;
  lm.order = 0;
  int section = -1;  // -1 header, 0 data, n n-grams, 99 end
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    const std::string where = source_name + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "\\data\\") { section = 0; continue; }
    if (tok[0] == "\\end\\") { section = 99; continue; }
    if (tok[0].size() > 2 && tok[0][0] == '\\' && tok[0].find("-grams:") != std::string::npos) {
      section = std::stoi(tok[0].substr(1));
      if (section < 1 || section > 2)
        throw ConfigError(where + ": only unigram and bigram sections are supported");
      lm.order = std::max(lm.order, section);
      continue;
    }
    if (section == 0 || section == -1 || section == 99) continue;
    const size_t n = static_cast<size_t>(section);
    if (tok.size() != n + 1 && tok.size() != n + 2)
      throw ConfigError(where + ": expected " + std::to_string(n) + "-gram entry");
    char *end = nullptr;
    double lp = std::strtod(tok[0].c_str(), &end);
    if (end != tok[0].c_str() + tok[0].size()) throw ConfigError(where + ": bad log-prob");
    lp *= kLn10;
    if (n == 1) {
      if (tok[1] != kSentenceBegin) lm.unigram[tok[1]] = lp;
      if (tok.size() == 3) lm.backoff[tok[1]] = std::strtod(tok[2].c_str(), nullptr) * kLn10;
    } else {
      lm.bigram[{tok[1], tok[2]}] = lp;
    }
  }
  if (lm.order == 0) throw ConfigError(source_name + ": no n-gram sections");
  lm.Check();
  return lm;
}

void NGramLM::WriteArpa(std::ostream &os) const {
  std::set<std::string> hist_only;
  for (const auto &[h, bo] : backoff)
    if (!unigram.count(h)) hist_only.insert(h);
  os << "\\data\\\n";
  os << "ngram 1=" << unigram.size() + hist_only.size() << '\n';
  if (order == 2) os << "ngram 2=" << bigram.size() << '\n';
  os << "\n\\1-grams:\n";
  auto emit_uni = [&](const std::string &w, double lp) {
    os << (lp == kLogZero ? std::string("-99") : FormatWeight(lp / kLn10)) << ' ' << w;
    if (backoff.count(w)) os << ' ' << FormatWeight(backoff.at(w) / kLn10);
    os << '\n';
  };
  for (const auto &h : hist_only) emit_uni(h, kLogZero);
  for (const auto &[w, lp] : unigram) emit_uni(w, lp);
  if (order == 2) {
    os << "\n\\2-grams:\n";
    for (const auto &[key, lp] : bigram)
      os << FormatWeight(lp / kLn10) << ' ' << key.first << ' ' << key.second << '\n';
  }
  os << "\n\\end\\\n";
}

Automaton BuildLmAcceptor(const NGramLM &lm, const SymbolTable &vocab, double lm_scale) {
  lm.Check();
  if (!(lm_scale > 0.0)) throw ConfigError("lm_scale must be positive");
  for (const std::string &w : vocab.Names())
    if (!lm.unigram.count(w)) throw ConfigError("vocabulary word '" + w + "' missing from LM");
  const Label V = vocab.Size();
  AutomatonBuilder b;
  if (lm.order == 1) {
    StateId s = b.AddState();
    b.SetStart(s);
    b.SetFinal(s, lm_scale * lm.EndScore(kSentenceBegin));
    for (Label w = 0; w < V; w++) b.AddArc(s, s, w, w, lm_scale * lm.unigram.at(vocab.Name(w)));
    return std::move(b).Build(V, V);
  }
  // States 0..V-1 are word histories, V is "<s>".  Each history that
  // leaves mass to the unigram gets its own backoff state carrying only the
  // words without an explicit bigram, so no string is scored twice.
  b.AddStates(V + 1);
  const StateId begin = V;
  b.SetStart(begin);
  auto history_name = [&](StateId h) { return h == begin ? kSentenceBegin : vocab.Name(h); };
  for (StateId h = 0; h <= begin; h++) {
    const std::string hn = history_name(h);
    StateId bo_state = -1;
    auto backoff_state = [&]() {
      if (bo_state < 0) {
        bo_state = b.AddState();
        double bo = lm.backoff.count(hn) ? lm.backoff.at(hn) : kLogOne;
        b.AddArc(h, bo_state, kEpsilon, kEpsilon, lm_scale * bo);
      }
      return bo_state;
    };
    for (Label w = 0; w < V; w++) {
      auto it = lm.bigram.find({hn, vocab.Name(w)});
      if (it != lm.bigram.end()) {
        b.AddArc(h, w, w, w, lm_scale * it->second);
      } else if (lm.unigram.at(vocab.Name(w)) != kLogZero) {
        b.AddArc(backoff_state(), w, w, w, lm_scale * lm.unigram.at(vocab.Name(w)));
      }
    }
    auto end = lm.bigram.find({hn, kSentenceEnd});
    if (end != lm.bigram.end()) {
      b.SetFinal(h, lm_scale * end->second);
    } else if (lm.unigram.count(kSentenceEnd)) {
      b.SetFinal(backoff_state(), lm_scale * lm.unigram.at(kSentenceEnd));
    }
  }
  return std::move(b).Build(V, V);
}

}  // namespace seqfb
