// seqfb/run-config.h

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

#ifndef SEQFB_RUN_CONFIG_H_
#define SEQFB_RUN_CONFIG_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqfb/corpus.h"
#include "seqfb/trainer.h"

namespace seqfb {

/// Everything a command needs, read from one JSON file plus "a.b=value"
/// overrides.  Unknown keys are rejected; relative lexicon, LM and output
/// paths are taken relative to the config file.
struct RunConfig {
  std::string lexicon_path;
  std::string lm_path;
  std::string silence_phone = "sil";
  ContextMode context = ContextMode::kMonophone;
  HmmTopology topology;
  GraphOptions graph;
  TrainConfig train;
  CorpusConfig corpus;
  int64_t eval_utts = 20;
  double init_scale = 0.1;
  double prior_scale = 1.0;
  bool train_bias = true;
  uint64_t init_seed = 1;
  std::string output_dir = "out";

  nlohmann::json effective;  // the merged document, paths resolved

  static nlohmann::json Defaults();
  /// `text` is the config file content ("" for defaults only); `base_dir`
  /// resolves relative paths.
  static RunConfig Parse(const std::string &text, const std::string &base_dir,
                         const std::vector<std::string> &overrides);
  static RunConfig Load(const std::string &path, const std::vector<std::string> &overrides);
};

/// Writes through a temporary file in the same directory, then renames.
void WriteFileAtomic(const std::string &path, const std::function<void(std::ostream &)> &write);

/// Lexicon and LM from the configured files, with file context in errors.
GraphFactory MakeFactory(const RunConfig &cfg);

}  // namespace seqfb

#endif  // SEQFB_RUN_CONFIG_H_
