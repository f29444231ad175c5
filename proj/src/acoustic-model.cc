// seqfb/acoustic-model.cc

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

#include "seqfb/acoustic-model.h"

#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace seqfb {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'F', 'B', 'A', 'M', '\0', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void Put(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename T>
T Get(std::istream &is, const std::string &src) {
  T v;
  if (!is.read(reinterpret_cast<char *>(&v), sizeof v))
    throw DataError(src + ": truncated model file");
  return v;
}

}  // namespace

ToyAcousticModel::ToyAcousticModel(size_t num_classes, size_t dim)
    : num_classes_(num_classes),
      dim_(dim),
      w_(num_classes, dim),
      bias_(num_classes, 0.0),
      log_prior_(num_classes, -std::log(static_cast<double>(num_classes))) {
  if (num_classes == 0) throw ConfigError("acoustic model needs at least one class");
}

ToyAcousticModel ToyAcousticModel::Random(size_t num_classes, size_t dim, uint64_t seed,
                                          double scale) {
  ToyAcousticModel m(num_classes, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double &v : m.w_.Data()) v = n(rng);
  return m;
}

void ToyAcousticModel::SetPriorsFromCounts(const std::vector<double> &counts) {
  if (counts.size() != num_classes_) throw ConfigError("prior count vector has the wrong size");
  double total = 0.0;
  for (double c : counts) total += c + 1.0;
  for (size_t c = 0; c < num_classes_; c++) log_prior_[c] = std::log((counts[c] + 1.0) / total);
}

std::vector<double> ToyAcousticModel::Params() const {
  std::vector<double> p(w_.Data().begin(), w_.Data().end());
  if (train_bias_) p.insert(p.end(), bias_.begin(), bias_.end());
  return p;
}

void ToyAcousticModel::SetParams(std::span<const double> p) {
  if (p.size() != NumParams()) throw ConfigError("parameter vector has the wrong size");
  std::copy(p.begin(), p.begin() + w_.Data().size(), w_.Data().begin());
  if (train_bias_) std::copy(p.begin() + w_.Data().size(), p.end(), bias_.begin());
}

Matrix ToyAcousticModel::Scores(const Matrix &x) const {
  if (x.Cols() != dim_)
    throw DataError("features have " + std::to_string(x.Cols()) + " dimensions, model expects " +
                    std::to_string(dim_));
  const size_t T = x.Rows(), C = num_classes_;
  Matrix s(T, C);
  for (size_t t = 0; t < T; t++) {
    auto row = s.Row(t);
    auto xt = x.Row(t);
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < C; c++) {
      double z = bias_[c];
      auto wc = w_.Row(c);
      for (size_t d = 0; d < dim_; d++) z += wc[d] * xt[d];
      row[c] = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (size_t c = 0; c < C; c++) sum += std::exp(row[c] - mx);
    const double lse = mx + std::log(sum);
    for (size_t c = 0; c < C; c++) row[c] = row[c] - lse - prior_scale_ * log_prior_[c];
  }
  return s;
}

std::vector<double> ToyAcousticModel::Backward(const Matrix &x, const Matrix &g) const {
  const size_t T = x.Rows(), C = num_classes_;
  if (g.Rows() != T || g.Cols() != C) throw DataError("score gradient has the wrong shape");
  Matrix s = Scores(x);
  std::vector<double> grad(NumParams(), 0.0);
  std::vector<double> dz(C);
  for (size_t t = 0; t < T; t++) {
    double gsum = 0.0;
    for (size_t c = 0; c < C; c++) gsum += g(t, c);
    for (size_t c = 0; c < C; c++) {
      // softmax recovered from the score
      double p = std::exp(s(t, c) + prior_scale_ * log_prior_[c]);
      dz[c] = g(t, c) - p * gsum;
    }
    auto xt = x.Row(t);
    for (size_t c = 0; c < C; c++) {
      double *gw = grad.data() + c * dim_;
      for (size_t d = 0; d < dim_; d++) gw[d] += dz[c] * xt[d];
      if (train_bias_) grad[C * dim_ + c] += dz[c];
    }
  }
  return grad;
}

void ToyAcousticModel::Step(std::span<const double> grad, double lr) {
  if (grad.size() != NumParams()) throw ConfigError("gradient has the wrong size");
  auto w = w_.Data();
  for (size_t i = 0; i < w.size(); i++) w[i] -= lr * grad[i];
  if (train_bias_)
    for (size_t c = 0; c < bias_.size(); c++) bias_[c] -= lr * grad[w.size() + c];
}

void ToyAcousticModel::Check() const {
  for (double v : w_.Data())
    if (!std::isfinite(v)) throw NumericalError("acoustic model has a non-finite weight");
  for (double v : bias_)
    if (!std::isfinite(v)) throw NumericalError("acoustic model has a non-finite bias");
  for (double v : log_prior_)
    if (std::isnan(v)) throw NumericalError("acoustic model has a NaN prior");
}

void ToyAcousticModel::Write(std::ostream &os) const {
  os.write(kMagic, sizeof kMagic);
  Put<uint32_t>(os, kVersion);
  Put<uint64_t>(os, num_classes_);
  Put<uint64_t>(os, dim_);
  Put<double>(os, prior_scale_);
  Put<uint8_t>(os, train_bias_ ? 1 : 0);
  for (double v : w_.Data()) Put(os, v);
  for (double v : bias_) Put(os, v);
  for (double v : log_prior_) Put(os, v);
  if (!os) throw DataError("failed writing model");
}

ToyAcousticModel ToyAcousticModel::Read(std::istream &is, const std::string &src) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError(src + ": not a model file");
  uint32_t version = Get<uint32_t>(is, src);
  if (version != kVersion)
    throw DataError(src + ": unsupported model version " + std::to_string(version));
  uint64_t c = Get<uint64_t>(is, src), d = Get<uint64_t>(is, src);
  if (c == 0 || c > (1u << 24) || d > (1u << 24)) throw DataError(src + ": implausible model shape");
  ToyAcousticModel m(c, d);
  m.prior_scale_ = Get<double>(is, src);
  m.train_bias_ = Get<uint8_t>(is, src) != 0;
  for (double &v : m.w_.Data()) v = Get<double>(is, src);
  for (double &v : m.bias_) v = Get<double>(is, src);
  for (double &v : m.log_prior_) v = Get<double>(is, src);
  m.Check();
  return m;
}

}  // namespace seqfb
