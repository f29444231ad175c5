// seqfb/acoustic-model.h

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

#ifndef SEQFB_ACOUSTIC_MODEL_H_
#define SEQFB_ACOUSTIC_MODEL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seqfb/matrix.h"

namespace seqfb {

/// Linear layer plus log-softmax, minus scaled class log-priors:
///   score[t][c] = log_softmax(W x_t + b)[c] - prior_scale * log_prior[c].
/// Parameters are W (row-major) followed by b when the bias is trained.
class ToyAcousticModel {
 public:
  ToyAcousticModel() = default;
  ToyAcousticModel(size_t num_classes, size_t dim);

  /// Weights drawn from N(0, scale^2); zero bias; uniform priors.
  static ToyAcousticModel Random(size_t num_classes, size_t dim, uint64_t seed, double scale);

  size_t NumClasses() const { return num_classes_; }
  size_t Dim() const { return dim_; }
  size_t NumParams() const { return w_.Data().size() + (train_bias_ ? bias_.size() : 0); }

  Matrix &Weights() { return w_; }
  const Matrix &Weights() const { return w_; }
  std::vector<double> &Bias() { return bias_; }
  const std::vector<double> &Bias() const { return bias_; }
  std::vector<double> &LogPrior() { return log_prior_; }
  const std::vector<double> &LogPrior() const { return log_prior_; }
  double PriorScale() const { return prior_scale_; }
  void SetPriorScale(double s) { prior_scale_ = s; }
  bool TrainBias() const { return train_bias_; }
  void SetTrainBias(bool b) { train_bias_ = b; }

  /// Priors from class counts with add-one smoothing.
  void SetPriorsFromCounts(const std::vector<double> &counts);

  std::vector<double> Params() const;
  void SetParams(std::span<const double> p);

  /// T x D features to T x C scores.
  Matrix Scores(const Matrix &features) const;
  /// Parameter gradient given d loss / d scores.
  std::vector<double> Backward(const Matrix &features, const Matrix &grad_scores) const;
  /// params -= lr * grad
  void Step(std::span<const double> grad, double lr);

  /// Throws NumericalError on a non-finite parameter.
  void Check() const;

  void Write(std::ostream &os) const;
  static ToyAcousticModel Read(std::istream &is, const std::string &source_name);

  bool operator==(const ToyAcousticModel &) const = default;

 private:
  size_t num_classes_ = 0;
  size_t dim_ = 0;
  Matrix w_;
  std::vector<double> bias_;
  std::vector<double> log_prior_;
  double prior_scale_ = 1.0;
  bool train_bias_ = true;
};

}  // namespace seqfb

#endif  // SEQFB_ACOUSTIC_MODEL_H_
