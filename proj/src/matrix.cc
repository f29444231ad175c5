// seqfb/matrix.cc

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

#include "seqfb/matrix.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "seqfb/automaton.h"

namespace seqfb {

static_assert(std::endian::native == std::endian::little,
              "binary matrix I/O assumes a little-endian host");

void CheckScores(ScoreView scores, size_t expected_classes) {
  if (scores.NumFrames() < 1) throw DataError("score matrix has no frames");
  if (expected_classes != 0 && scores.NumClasses() != expected_classes) {
    throw DataError("score matrix has " + std::to_string(scores.NumClasses()) +
                    " classes, graph expects " + std::to_string(expected_classes));
  }
  for (size_t t = 0; t < scores.NumFrames(); t++) {
    for (double v : scores.Row(t)) {
      if (!std::isfinite(v))
        throw DataError("non-finite score at frame " + std::to_string(t));
    }
  }
}

namespace {

void WriteU64(std::ostream &os, uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

uint64_t ReadU64(std::istream &is, const std::string &source_name) {
  char buf[8];
  if (!is.read(buf, 8)) throw DataError(source_name + ": truncated matrix header");
  uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

void WriteMatrixBinary(std::ostream &os, const Matrix &m) {
  WriteU64(os, kMatrixMagic);
  WriteU64(os, m.Rows());
  WriteU64(os, m.Cols());
  os.write(reinterpret_cast<const char *>(m.Data().data()),
           static_cast<std::streamsize>(m.Data().size() * sizeof(double)));
}

Matrix ReadMatrixBinary(std::istream &is, const std::string &source_name) {
  if (ReadU64(is, source_name) != kMatrixMagic)
    throw DataError(source_name + ": bad magic, not a seqfb matrix file");
  uint64_t rows = ReadU64(is, source_name), cols = ReadU64(is, source_name);
  if (rows > (1ULL << 32) || cols > (1ULL << 32) || rows * cols > (1ULL << 34))
    throw DataError(source_name + ": implausible matrix shape");
  Matrix m(rows, cols);
  auto bytes = static_cast<std::streamsize>(rows * cols * sizeof(double));
  if (!is.read(reinterpret_cast<char *>(m.Data().data()), bytes))
    throw DataError(source_name + ": truncated matrix data");
  return m;
}

void WriteMatrixTsv(std::ostream &os, const Matrix &m) {
  for (size_t r = 0; r < m.Rows(); r++) {
    for (size_t c = 0; c < m.Cols(); c++) {
      if (c) os << '\t';
      os << FormatWeight(m(r, c));
    }
    os << '\n';
  }
}

Matrix ReadMatrixTsv(std::istream &is, const std::string &source_name) {
  std::vector<double> values;
  size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    size_t n = 0;
    for (std::string tok; std::getline(ls, tok, '\t');) {
      char *end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size())
        throw DataError(source_name + ":" + std::to_string(rows + 1) + ": bad value '" +
                        tok + "'");
      values.push_back(v);
      n++;
    }
    if (rows == 0) cols = n;
    else if (n != cols)
      throw DataError(source_name + ":" + std::to_string(rows + 1) + ": expected " +
                      std::to_string(cols) + " columns, got " + std::to_string(n));
    rows++;
  }
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.Data().begin());
  return m;
}

Matrix ReadMatrixFile(const std::string &path) {
  bool tsv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0;
  std::ifstream is(path, tsv ? std::ios::in : std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return tsv ? ReadMatrixTsv(is, path) : ReadMatrixBinary(is, path);
}

}  // namespace seqfb
