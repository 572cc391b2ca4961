// src/tensor.cc

// Copyright 2026  The uasr Authors
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

#include "uasr/tensor.h"

#include <algorithm>
#include <cmath>

#include "uasr/common.h"

namespace uasr {

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto &r : rows) {
    if (r.size() != cols_) throw ShapeError("Tensor2: ragged row list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor2 Tensor2::row_range(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw ShapeError("row_range out of bounds");
  Tensor2 out(end - begin, cols_);
  std::copy(data_.begin() + begin * cols_, data_.begin() + end * cols_,
            out.data_.begin());
  return out;
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor2 &Tensor2::operator+=(const Tensor2 &o) {
  if (o.rows_ != rows_ || o.cols_ != cols_)
    throw ShapeError("Tensor2 +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor2 &Tensor2::operator*=(double s) {
  for (double &v : data_) v *= s;
  return *this;
}

void axpy_row_matrix(std::span<const double> x, const Tensor2 &w,
                     std::span<double> out) {
  const std::size_t n = w.cols();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double *wr = w.row(k).data();
    double *o = out.data();
    for (std::size_t j = 0; j < n; ++j) o[j] += xk * wr[j];
  }
}

Tensor2 matmul(const Tensor2 &a, const Tensor2 &b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dims differ");
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    axpy_row_matrix(a.row(i), b, out.row(i));
  return out;
}

Tensor2 matmul_tn(const Tensor2 &a, const Tensor2 &b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  Tensor2 out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double *ar = a.row(r).data();
    const double *br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = ar[i];
      if (ai == 0.0) continue;
      double *o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += ai * br[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2 &a, const Tensor2 &b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: col counts differ");
  Tensor2 out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double *ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double *br = b.row(j).data();
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += ar[c] * br[c];
      out(i, j) = s;
    }
  }
  return out;
}

double frobenius_norm(const Tensor2 &t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

double sum(const Tensor2 &t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

}  // namespace uasr
