// seqfb/criteria.cc

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

#include "seqfb/criteria.h"

#include <ostream>

namespace seqfb {

void Scales::Check() const {
  if (!(am_scale > 0.0) || !std::isfinite(am_scale)) throw ConfigError("am_scale must be > 0");
  if (!(lm_scale > 0.0) || !std::isfinite(lm_scale)) throw ConfigError("lm_scale must be > 0");
}

FbOptions CriterionOptions::Fb() const {
  FbOptions o;
  o.am_scale = am_scale;
  o.schedule = schedule;
  o.fast = fast;
  return o;
}

namespace {

double SilenceMass(const Matrix &gamma, const std::vector<bool> &sil) {
  if (sil.empty()) return 0.0;
  double mass = 0.0;
  for (size_t t = 0; t < gamma.Rows(); t++)
    for (size_t c = 0; c < gamma.Cols() && c < sil.size(); c++)
      if (sil[c]) mass += gamma(t, c);
  return mass / static_cast<double>(gamma.Rows());
}

}  // namespace

CriterionOutput Mmi(const Automaton &num, const Automaton &den, ScoreView scores,
                    const CriterionOptions &opts) {
  const FbOptions fb = opts.Fb();
  FbResult n = ForwardBackward(num, scores, fb);
  FbResult d = ForwardBackward(den, scores, fb);
  CriterionOutput out;
  out.loss = d.log_z - n.log_z;
  out.grad = Matrix(scores.NumFrames(), scores.NumClasses());
  auto g = out.grad.Data();
  auto gn = n.gamma.Data(), gd = d.gamma.Data();
  for (size_t i = 0; i < g.size(); i++) g[i] = opts.am_scale * (gd[i] - gn[i]);
  out.aux["log_z_num"] = n.log_z;
  out.aux["log_z_den"] = d.log_z;
  out.aux["silence_frame_fraction"] = SilenceMass(d.gamma, opts.silence_classes);
  return out;
}

std::vector<Label> ReferenceClasses(const Automaton &num, ScoreView scores, double am_scale) {
  return Viterbi(num, scores, am_scale).classes;
}

Matrix FrameAccuracyReward(const std::vector<Label> &ref, size_t num_classes,
                           const std::vector<bool> &silence_classes, double silence_weight) {
  if (!(silence_weight >= 0.0 && silence_weight <= 1.0))
    throw ConfigError("silence_weight must lie in [0, 1]");
  Matrix r(ref.size(), num_classes);
  for (size_t t = 0; t < ref.size(); t++) {
    const Label c = ref[t];
    if (c < 0 || static_cast<size_t>(c) >= num_classes)
      throw DataError("reference class out of range at frame " + std::to_string(t));
    bool sil = static_cast<size_t>(c) < silence_classes.size() && silence_classes[c];
    r(t, c) = sil ? silence_weight : 1.0;
  }
  return r;
}

CriterionOutput Smbr(const Automaton &num, const Automaton &den, ScoreView scores,
                     const CriterionOptions &opts) {
  const FbOptions fb = opts.Fb();
  const double log_z_num = ForwardLogZ(num, scores, opts.am_scale);
  std::vector<Label> ref = ReferenceClasses(num, scores, opts.am_scale);
  Matrix reward =
      FrameAccuracyReward(ref, scores.NumClasses(), opts.silence_classes, opts.silence_weight);
  FbResult d = ForwardBackward(den, scores, fb, &reward);
  CriterionOutput out;
  out.loss = -d.expected_reward;
  out.grad = Matrix(scores.NumFrames(), scores.NumClasses());
  auto g = out.grad.Data();
  auto rg = d.reward_grad.Data();
  for (size_t i = 0; i < g.size(); i++) g[i] = -opts.am_scale * rg[i];
  out.aux["log_z_num"] = log_z_num;
  out.aux["log_z_den"] = d.log_z;
  out.aux["expected_accuracy"] = d.expected_reward;
  out.aux["silence_frame_fraction"] = SilenceMass(d.gamma, opts.silence_classes);
  return out;
}

double SilenceRatio(const Automaton &graph, ScoreView scores, double am_scale,
                    const std::vector<bool> &silence_classes, bool posterior_argmax) {
  const size_t T = scores.NumFrames();
  auto is_sil = [&](Label c) {
    return static_cast<size_t>(c) < silence_classes.size() && silence_classes[c];
  };
  size_t count = 0;
  if (!posterior_argmax) {
    for (Label c : Viterbi(graph, scores, am_scale).classes) count += is_sil(c);
  } else {
    FbOptions fb;
    fb.am_scale = am_scale;
    FbResult r = ForwardBackward(graph, scores, fb);
    for (size_t t = 0; t < T; t++) {
      auto row = r.gamma.Row(t);
      count += is_sil(static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return static_cast<double>(count) / static_cast<double>(T);
}

void WriteAuxCsvHeader(std::ostream &os) {
  os << "utt,loss,log_z_num,log_z_den,silence_ratio,expected_accuracy\n";
}

void WriteAuxCsvRow(std::ostream &os, const std::string &utt, const CriterionOutput &out) {
  auto field = [&](const char *key) {
    auto it = out.aux.find(key);
    return it == out.aux.end() ? std::string() : FormatWeight(it->second);
  };
  os << utt << ',' << FormatWeight(out.loss) << ',' << field("log_z_num") << ','
     << field("log_z_den") << ',' << field("silence_ratio") << ',' << field("expected_accuracy")
     << '\n';
}

}  // namespace seqfb
