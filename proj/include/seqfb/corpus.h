// seqfb/corpus.h

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

#ifndef SEQFB_CORPUS_H_
#define SEQFB_CORPUS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqfb/graph-builder.h"
#include "seqfb/matrix.h"

namespace seqfb {

struct CorpusConfig {
  int64_t num_utts = 50;
  int min_words = 1;
  int max_words = 4;
  int dim = 8;
  /// Standard deviation of the class means and of the emission noise.
  double mean_scale = 1.0;
  double noise = 0.5;
  /// Probability of a silence at each word boundary, including the start
  /// and the end of the utterance.
  double silence_prob = 0.3;
  /// Self-loop probability used when sampling silence states; negative
  /// means "as in the topology".
  double silence_loop = -1.0;
  uint64_t seed = 1;

  void Check() const;
};

struct Utterance {
  std::string id;
  std::vector<Label> words;
  std::vector<Label> classes;  // generating emission class per frame
  Matrix features;             // T x D

  bool operator==(const Utterance &) const = default;
};

struct SyntheticCorpus {
  Matrix means;  // C x D
  std::vector<Utterance> utts;

  bool operator==(const SyntheticCorpus &) const = default;
};

/// Word sequences from the factory's LM (length drawn uniformly from
/// [min_words, max_words], each word from the LM given its history with
/// sentence end excluded), pronunciations by their probabilities, state
/// dwell from the HMM topology, Gaussian features around per-class means.
/// Utterance ids are prefixed with `prefix`.
SyntheticCorpus GenerateCorpus(const GraphFactory &factory, const CorpusConfig &cfg,
                               const std::string &prefix = "utt");

/// Same means, new utterances: for a held-out set.
SyntheticCorpus GenerateCorpus(const GraphFactory &factory, const CorpusConfig &cfg,
                               const Matrix &means, const std::string &prefix);

/// Count of frames per generating class.
std::vector<double> ClassCounts(const SyntheticCorpus &corpus, size_t num_classes);

void WriteCorpus(std::ostream &os, const SyntheticCorpus &corpus);
SyntheticCorpus ReadCorpus(std::istream &is, const std::string &source_name);

}  // namespace seqfb

#endif  // SEQFB_CORPUS_H_
