// seqfb/corpus.cc

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

#include "seqfb/corpus.h"

#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "seqfb/automaton.h"

namespace seqfb {

void CorpusConfig::Check() const {
  if (num_utts < 0) throw ConfigError("corpus.num_utts must be >= 0");
  if (min_words < 0 || max_words < min_words)
    throw ConfigError("corpus word counts need 0 <= min_words <= max_words");
  if (dim <= 0) throw ConfigError("corpus.dim must be positive");
  if (!(mean_scale > 0.0)) throw ConfigError("corpus.mean_scale must be positive");
  if (!(noise >= 0.0)) throw ConfigError("corpus.noise must be >= 0");
  if (!(silence_prob >= 0.0 && silence_prob < 1.0))
    throw ConfigError("corpus.silence_prob must be in [0, 1)");
  if (silence_loop >= 1.0) throw ConfigError("corpus.silence_loop must be below 1");
}

namespace {

class Sampler {
 public:
  Sampler(const GraphFactory &f, const CorpusConfig &cfg, uint64_t seed)
      : f_(f), cfg_(cfg), rng_(seed) {}

  Utterance Sample(const std::string &id, const Matrix &means) {
    Utterance u;
    u.id = id;
    std::uniform_int_distribution<int> len(cfg_.min_words, cfg_.max_words);
    const int n = len(rng_);
    std::string history = kSentenceBegin;
    for (int i = 0; i < n; i++) {
      Label w = SampleWord(history);
      u.words.push_back(w);
      history = f_.Lex().words.Name(w);
    }
    const bool sil_ok = f_.Options().lexicon.allow_optional_silence && cfg_.silence_prob > 0.0;
    std::bernoulli_distribution sil(sil_ok ? cfg_.silence_prob : 0.0);
    const Label sil_unit = f_.Context().UnitId({kEpsilon, f_.Lex().silence_phone, kEpsilon});
    for (int i = 0; i <= n; i++) {
      if (sil(rng_)) EmitUnit(sil_unit, true, &u.classes);
      if (i == n) break;
      const auto &phones = SamplePron(u.words[i]);
      for (size_t k = 0; k < phones.size(); k++) {
        ContextUnit cu{kEpsilon, phones[k], kEpsilon};
        if (k > 0) cu.left = phones[k - 1];
        if (k + 1 < phones.size()) cu.right = phones[k + 1];
        EmitUnit(f_.Context().UnitId(cu), false, &u.classes);
      }
    }
    // An empty utterance still needs one unit to be a legal input.
    if (u.classes.empty()) {
      if (sil_ok) EmitUnit(sil_unit, true, &u.classes);
      else throw ConfigError("corpus.min_words = 0 needs optional silence");
    }
    const size_t D = means.Cols();
    std::normal_distribution<double> noise(0.0, 1.0);
    u.features = Matrix(u.classes.size(), D);
    for (size_t t = 0; t < u.classes.size(); t++)
      for (size_t d = 0; d < D; d++)
        u.features(t, d) = means(u.classes[t], d) + cfg_.noise * noise(rng_);
    return u;
  }

  Matrix SampleMeans() {
    const size_t C = f_.NumClasses();
    std::normal_distribution<double> n(0.0, cfg_.mean_scale);
    Matrix m(C, cfg_.dim);
    for (double &v : m.Data()) v = n(rng_);
    return m;
  }

 private:
  Label SampleWord(const std::string &history) {
    const Label V = f_.VocabSize();
    std::vector<double> p(V);
    for (Label w = 0; w < V; w++) p[w] = std::exp(f_.Lm().Score(history, f_.Lex().words.Name(w)));
    std::discrete_distribution<Label> d(p.begin(), p.end());
    return d(rng_);
  }

  const std::vector<Label> &SamplePron(Label w) {
    auto prons = f_.Lex().PronunciationsOf(w);
    std::vector<double> p;
    for (const auto *pr : prons) p.push_back(std::exp(pr->log_prob));
    std::discrete_distribution<size_t> d(p.begin(), p.end());
    return prons[d(rng_)]->phones;
  }

  void EmitUnit(Label unit, bool silence, std::vector<Label> *out) {
    auto probs = f_.Topology().probs;
    if (silence && cfg_.silence_loop >= 0.0) {
      for (auto &row : probs) {
        double move = row[1] + row[2];
        double scale = move > 0.0 ? (1.0 - cfg_.silence_loop) / move : 0.0;
        row = {cfg_.silence_loop, row[1] * scale, row[2] * scale};
      }
    }
    int k = 0;
    while (k < kStatesPerUnit) {
      out->push_back(ContextConfig::ClassOf(unit, k));
      std::discrete_distribution<int> step(probs[k].begin(), probs[k].end());
      k += step(rng_);  // 0 stay, 1 forward, 2 skip
    }
  }

  const GraphFactory &f_;
  const CorpusConfig &cfg_;
  std::mt19937_64 rng_;
};

}  // namespace

SyntheticCorpus GenerateCorpus(const GraphFactory &factory, const CorpusConfig &cfg,
                               const std::string &prefix) {
  cfg.Check();
  Sampler means_rng(factory, cfg, cfg.seed);
  Matrix means = means_rng.SampleMeans();
  return GenerateCorpus(factory, cfg, means, prefix);
}

SyntheticCorpus GenerateCorpus(const GraphFactory &factory, const CorpusConfig &cfg,
                               const Matrix &means, const std::string &prefix) {
  cfg.Check();
  if (factory.VocabSize() == 0) throw ConfigError("corpus needs a non-empty vocabulary");
  if (means.Rows() != static_cast<size_t>(factory.NumClasses()) ||
      means.Cols() != static_cast<size_t>(cfg.dim))
    throw ConfigError("class means do not match the graph classes and corpus.dim");
  // The utterance stream is seeded apart from the means so that a held-out
  // set with another prefix gets different utterances.
  std::seed_seq seq(prefix.begin(), prefix.end());
  std::vector<uint64_t> mix(1);
  seq.generate(mix.begin(), mix.end());
  Sampler s(factory, cfg, cfg.seed * 0x9E3779B97F4A7C15ULL ^ mix[0]);
  SyntheticCorpus c;
  c.means = means;
  for (int64_t i = 0; i < cfg.num_utts; i++) {
    std::ostringstream id;
    id << prefix << '-' << i;
    c.utts.push_back(s.Sample(id.str(), means));
  }
  return c;
}

std::vector<double> ClassCounts(const SyntheticCorpus &corpus, size_t num_classes) {
  std::vector<double> n(num_classes, 0.0);
  for (const Utterance &u : corpus.utts)
    for (Label c : u.classes) n.at(c) += 1.0;
  return n;
}

void WriteCorpus(std::ostream &os, const SyntheticCorpus &c) {
  os << "seqfb-corpus 1\n";
  os << "means " << c.means.Rows() << ' ' << c.means.Cols() << '\n';
  WriteMatrixTsv(os, c.means);
  for (const Utterance &u : c.utts) {
    os << "utt " << u.id << ' ' << u.features.Rows() << '\n';
    os << "words";
    for (Label w : u.words) os << ' ' << w;
    os << "\nclasses";
    for (Label l : u.classes) os << ' ' << l;
    os << '\n';
    WriteMatrixTsv(os, u.features);
  }
  if (!os) throw DataError("failed writing corpus");
}

namespace {

Matrix ReadRows(std::istream &is, size_t rows, size_t cols, const std::string &where) {
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; r++) {
    std::string line;
    if (!std::getline(is, line)) throw DataError(where + ": truncated matrix");
    std::istringstream ls(line);
    for (size_t c = 0; c < cols; c++)
      if (!(ls >> m(r, c))) throw DataError(where + ": bad matrix row " + std::to_string(r));
  }
  return m;
}

std::vector<Label> ReadLabels(const std::string &line, const std::string &key,
                              const std::string &where) {
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  if (k != key) throw DataError(where + ": expected '" + key + "'");
  std::vector<Label> out;
  for (Label l; ls >> l;) out.push_back(l);
  if (!ls.eof()) throw DataError(where + ": bad label in '" + key + "' line");
  return out;
}

}  // namespace

SyntheticCorpus ReadCorpus(std::istream &is, const std::string &src) {
  std::string line;
  if (!std::getline(is, line) || line != "seqfb-corpus 1")
    throw DataError(src + ": not a corpus file");
  SyntheticCorpus c;
  size_t rows = 0, cols = 0;
  {
    if (!std::getline(is, line)) throw DataError(src + ": missing means");
    std::istringstream ls(line);
    std::string k;
    if (!(ls >> k >> rows >> cols) || k != "means") throw DataError(src + ": bad means header");
    c.means = ReadRows(is, rows, cols, src);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string k;
    Utterance u;
    size_t T = 0;
    if (!(ls >> k >> u.id >> T) || k != "utt") throw DataError(src + ": bad utterance header");
    const std::string where = src + ":" + u.id;
    if (!std::getline(is, line)) throw DataError(where + ": truncated");
    u.words = ReadLabels(line, "words", where);
    if (!std::getline(is, line)) throw DataError(where + ": truncated");
    u.classes = ReadLabels(line, "classes", where);
    if (u.classes.size() != T) throw DataError(where + ": class count does not match frames");
    u.features = ReadRows(is, T, cols, where);
    c.utts.push_back(std::move(u));
  }
  return c;
}

}  // namespace seqfb
