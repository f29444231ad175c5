// seqfb/matrix.h

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

#ifndef SEQFB_MATRIX_H_
#define SEQFB_MATRIX_H_

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seqfb/base.h"

namespace seqfb {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t Rows() const { return rows_; }
  size_t Cols() const { return cols_; }
  double &operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> Row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> Row(size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> Data() { return data_; }
  std::span<const double> Data() const { return data_; }

  void SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }
  bool operator==(const Matrix &) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

/// Read-only view of T frames x C emission classes of log acoustic scores.
/// Frame ranges of a longer matrix are views too (see Frames()).
class ScoreView {
 public:
  ScoreView() = default;
  ScoreView(const double *data, size_t frames, size_t classes)
      : data_(data), frames_(frames), classes_(classes) {}
  ScoreView(const Matrix &m)  // NOLINT: implicit on purpose
      : data_(m.Data().data()), frames_(m.Rows()), classes_(m.Cols()) {}

  size_t NumFrames() const { return frames_; }
  size_t NumClasses() const { return classes_; }
  std::span<const double> Row(size_t t) const { return {data_ + t * classes_, classes_}; }
  double operator()(size_t t, size_t c) const { return data_[t * classes_ + c]; }
  ScoreView Frames(size_t begin, size_t end) const {
    return ScoreView(data_ + begin * classes_, end - begin, classes_);
  }

 private:
  const double *data_ = nullptr;
  size_t frames_ = 0;
  size_t classes_ = 0;
};

/// Throws DataError unless T >= 1, every value is finite and, when
/// `expected_classes` is nonzero, C equals it.
void CheckScores(ScoreView scores, size_t expected_classes = 0);

// Binary layout: three little-endian uint64 (magic, rows, cols) followed by
// rows*cols little-endian doubles, row-major.  The same container holds
// score matrices and feature matrices.
inline constexpr uint64_t kMatrixMagic = 0x314D434246514553ULL;  // "SEQFBCM1"

void WriteMatrixBinary(std::ostream &os, const Matrix &m);
Matrix ReadMatrixBinary(std::istream &is, const std::string &source_name);

/// Tab-separated debug format, one frame per line, 17 significant digits.
void WriteMatrixTsv(std::ostream &os, const Matrix &m);
Matrix ReadMatrixTsv(std::istream &is, const std::string &source_name);

/// Reads either format, choosing TSV for names ending in ".tsv".
Matrix ReadMatrixFile(const std::string &path);

}  // namespace seqfb

#endif  // SEQFB_MATRIX_H_
