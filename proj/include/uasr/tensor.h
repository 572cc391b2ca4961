// uasr/tensor.h

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

#ifndef UASR_TENSOR_H_
#define UASR_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace uasr {

/// Dense row-major matrix of doubles.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Row-list constructor; every row must have the same length.
  Tensor2(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v);
  /// Copies of rows [begin, end).
  Tensor2 row_range(std::size_t begin, std::size_t end) const;

  bool all_finite() const;

  /// Element-wise in-place helpers.
  Tensor2 &operator+=(const Tensor2 &o);
  Tensor2 &operator*=(double s);

  friend bool operator==(const Tensor2 &a, const Tensor2 &b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b.
Tensor2 matmul(const Tensor2 &a, const Tensor2 &b);
/// a^T * b.
Tensor2 matmul_tn(const Tensor2 &a, const Tensor2 &b);
/// a * b^T.
Tensor2 matmul_nt(const Tensor2 &a, const Tensor2 &b);

/// out += x * w for a single row x (length w.rows()).
void axpy_row_matrix(std::span<const double> x, const Tensor2 &w,
                     std::span<double> out);

double frobenius_norm(const Tensor2 &t);
double sum(const Tensor2 &t);

}  // namespace uasr

#endif  // UASR_TENSOR_H_
