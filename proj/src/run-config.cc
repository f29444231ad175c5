// seqfb/run-config.cc

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

#include "seqfb/run-config.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace seqfb {

using nlohmann::json;
namespace fs = std::filesystem;

json RunConfig::Defaults() {
  return json::parse(R"({
    "lexicon": "",
    "lm": "",
    "silence_phone": "sil",
    "context": "monophone",
    "topology": {"probs": [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.5, 0.0]]},
    "graph": {"allow_optional_silence": true, "silence_prob": 0.5, "numerator_lm": true},
    "scales": {"am": 1.0, "lm": 1.0},
    "schedule": "none",
    "fast": false,
    "criterion": "mmi",
    "prune": {"posterior_beam": 10.0, "max_arcs_per_frame": 50},
    "corpus": {
      "num_utts": 50, "eval_utts": 20, "min_words": 1, "max_words": 4, "dim": 8,
      "mean_scale": 1.0, "noise": 0.5, "silence_prob": 0.3, "silence_loop": -1.0
    },
    "model": {"init_scale": 0.1, "prior_scale": 1.0, "train_bias": true, "seed": 1},
    "train": {
      "learning_rate": 0.05, "epochs": 1, "eval_every": 0.25,
      "warm_start_epochs": 0.2, "warm_start_lr": 0.1, "silence_weight": 1.0,
      "lattice_scoring": "best_path", "batch_size": 1, "decode_am_scale": 1.0,
      "silence_posterior_argmax": false
    },
    "workers": 1,
    "seed": 1,
    "output_dir": "out"
  })");
}

namespace {

// Copies `src` onto `dst`, refusing keys that `dst` does not have.
void MergeStrict(json &dst, const json &src, const std::string &path) {
  if (!src.is_object()) throw ConfigError("config" + (path.empty() ? "" : " key '" + path + "'") +
                                          " must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json &d = dst[it.key()];
    if (d.is_object()) {
      MergeStrict(d, it.value(), key);
    } else {
      d = it.value();
    }
  }
}

void ApplyOverride(json &doc, const std::string &spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + spec + "' is not of the form key.path=value");
  const std::string key = spec.substr(0, eq), text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error &) {
    value = text;  // bare strings need no quotes
  }
  json *node = &doc;
  std::istringstream ks(key);
  std::string part, walked;
  while (std::getline(ks, part, '.')) {
    walked += (walked.empty() ? "" : ".") + part;
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("unknown config key '" + walked + "'");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ConfigError("override '" + key + "' names a section, not a value");
  *node = value;
}

template <typename T>
T Get(const json &j, const std::string &key) {
  try {
    return j.get<T>();
  } catch (const json::exception &) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::string Resolve(const std::string &p, const std::string &base) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = fs::path(base) / path;
  return path.lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::Parse(const std::string &text, const std::string &base_dir,
                           const std::vector<std::string> &overrides) {
  json doc = Defaults();
  if (!text.empty()) {
    json user;
    try {
      user = json::parse(text);
    } catch (const json::parse_error &e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    MergeStrict(doc, user, "");
  }
  for (const std::string &o : overrides) ApplyOverride(doc, o);

  RunConfig c;
  c.lexicon_path = Resolve(Get<std::string>(doc["lexicon"], "lexicon"), base_dir);
  c.lm_path = Resolve(Get<std::string>(doc["lm"], "lm"), base_dir);
  doc["lexicon"] = c.lexicon_path;
  doc["lm"] = c.lm_path;
  c.silence_phone = Get<std::string>(doc["silence_phone"], "silence_phone");
  c.context = ParseContextMode(Get<std::string>(doc["context"], "context"));

  auto probs = Get<std::vector<std::vector<double>>>(doc["topology"]["probs"], "topology.probs");
  if (probs.size() != kStatesPerUnit) throw ConfigError("topology.probs needs 3 rows");
  for (int k = 0; k < kStatesPerUnit; k++) {
    if (probs[k].size() != 3) throw ConfigError("topology.probs rows need 3 entries");
    for (int j = 0; j < 3; j++) c.topology.probs[k][j] = probs[k][j];
  }
  c.topology.Check();

  const json &g = doc["graph"];
  c.graph.lexicon.allow_optional_silence =
      Get<bool>(g["allow_optional_silence"], "graph.allow_optional_silence");
  const double ps = Get<double>(g["silence_prob"], "graph.silence_prob");
  if (!(ps > 0.0 && ps < 1.0)) throw ConfigError("graph.silence_prob must be in (0, 1)");
  c.graph.lexicon.silence_log_prob = std::log(ps);
  c.graph.numerator_lm = Get<bool>(g["numerator_lm"], "graph.numerator_lm");

  Scales scales;
  scales.am_scale = Get<double>(doc["scales"]["am"], "scales.am");
  scales.lm_scale = Get<double>(doc["scales"]["lm"], "scales.lm");
  scales.Check();
  c.graph.lm_scale = scales.lm_scale;

  TrainConfig &t = c.train;
  t.am_scale = scales.am_scale;
  t.schedule = CheckpointSchedule::Parse(Get<std::string>(doc["schedule"], "schedule"));
  t.fast = Get<bool>(doc["fast"], "fast");
  t.criterion = ParseCriterion(Get<std::string>(doc["criterion"], "criterion"));
  t.prune.posterior_beam = Get<double>(doc["prune"]["posterior_beam"], "prune.posterior_beam");
  t.prune.max_arcs_per_frame =
      Get<int64_t>(doc["prune"]["max_arcs_per_frame"], "prune.max_arcs_per_frame");
  const json &tr = doc["train"];
  t.learning_rate = Get<double>(tr["learning_rate"], "train.learning_rate");
  t.epochs = Get<int>(tr["epochs"], "train.epochs");
  t.eval_every = Get<double>(tr["eval_every"], "train.eval_every");
  t.warm_start_epochs = Get<double>(tr["warm_start_epochs"], "train.warm_start_epochs");
  t.warm_start_lr = Get<double>(tr["warm_start_lr"], "train.warm_start_lr");
  t.silence_weight = Get<double>(tr["silence_weight"], "train.silence_weight");
  const std::string scoring = Get<std::string>(tr["lattice_scoring"], "train.lattice_scoring");
  if (scoring == "best_path") t.lattice_scoring = ArcScoring::kBestPath;
  else if (scoring == "full_sum") t.lattice_scoring = ArcScoring::kFullSum;
  else throw ConfigError("train.lattice_scoring must be best_path or full_sum");
  t.batch_size = Get<int>(tr["batch_size"], "train.batch_size");
  t.decode_am_scale = Get<double>(tr["decode_am_scale"], "train.decode_am_scale");
  t.silence_posterior_argmax =
      Get<bool>(tr["silence_posterior_argmax"], "train.silence_posterior_argmax");
  t.workers = Get<int>(doc["workers"], "workers");
  t.Check();

  const json &co = doc["corpus"];
  c.corpus.num_utts = Get<int64_t>(co["num_utts"], "corpus.num_utts");
  c.eval_utts = Get<int64_t>(co["eval_utts"], "corpus.eval_utts");
  c.corpus.min_words = Get<int>(co["min_words"], "corpus.min_words");
  c.corpus.max_words = Get<int>(co["max_words"], "corpus.max_words");
  c.corpus.dim = Get<int>(co["dim"], "corpus.dim");
  c.corpus.mean_scale = Get<double>(co["mean_scale"], "corpus.mean_scale");
  c.corpus.noise = Get<double>(co["noise"], "corpus.noise");
  c.corpus.silence_prob = Get<double>(co["silence_prob"], "corpus.silence_prob");
  c.corpus.silence_loop = Get<double>(co["silence_loop"], "corpus.silence_loop");
  c.corpus.seed = Get<uint64_t>(doc["seed"], "seed");
  c.corpus.Check();
  if (c.eval_utts < 0) throw ConfigError("corpus.eval_utts must be >= 0");

  const json &m = doc["model"];
  c.init_scale = Get<double>(m["init_scale"], "model.init_scale");
  c.prior_scale = Get<double>(m["prior_scale"], "model.prior_scale");
  c.train_bias = Get<bool>(m["train_bias"], "model.train_bias");
  c.init_seed = Get<uint64_t>(m["seed"], "model.seed");
  if (!(c.init_scale >= 0.0)) throw ConfigError("model.init_scale must be >= 0");

  c.output_dir = Get<std::string>(doc["output_dir"], "output_dir");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  c.output_dir = Resolve(c.output_dir, base_dir);
  doc["output_dir"] = c.output_dir;
  c.effective = doc;
  return c;
}

RunConfig RunConfig::Load(const std::string &path, const std::vector<std::string> &overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return Parse(ss.str(), fs::path(path).parent_path().string(), overrides);
  } catch (const ConfigError &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void WriteFileAtomic(const std::string &path, const std::function<void(std::ostream &)> &write) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write '" + tmp + "'");
    try {
      write(os);
    } catch (...) {
      os.close();
      fs::remove(tmp);
      throw;
    }
    os.flush();
    if (!os) {
      fs::remove(tmp);
      throw DataError("failed writing '" + path + "'");
    }
  }
  fs::rename(tmp, target);
}

GraphFactory MakeFactory(const RunConfig &cfg) {
  if (cfg.lexicon_path.empty()) throw ConfigError("config key 'lexicon' is not set");
  if (cfg.lm_path.empty()) throw ConfigError("config key 'lm' is not set");
  std::ifstream lis(cfg.lexicon_path);
  if (!lis) throw ConfigError("cannot open lexicon '" + cfg.lexicon_path + "'");
  Lexicon lex;
  try {
    lex = Lexicon::Read(lis, cfg.lexicon_path, cfg.silence_phone);
  } catch (const ConfigError &e) {
    std::string msg = e.what();
    if (msg.rfind(cfg.lexicon_path, 0) == 0) throw;
    throw ConfigError("lexicon '" + cfg.lexicon_path + "': " + msg);
  }
  std::ifstream mis(cfg.lm_path);
  if (!mis) throw ConfigError("cannot open LM '" + cfg.lm_path + "'");
  NGramLM lm;
  try {
    lm = NGramLM::ReadArpa(mis, cfg.lm_path);
  } catch (const ConfigError &e) {
    std::string msg = e.what();
    if (msg.rfind(cfg.lm_path, 0) == 0) throw;
    throw ConfigError("LM '" + cfg.lm_path + "': " + msg);
  }
  return GraphFactory(std::move(lex), std::move(lm), cfg.context, cfg.topology, cfg.graph);
}

}  // namespace seqfb
