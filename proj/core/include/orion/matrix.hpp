#pragma once

#include <vector>

#include "orion/common.hpp"

namespace orion {

// Row-major dense matrix of doubles. The whole network stack works in 64-bit;
// replay storage may down-convert to 32-bit.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

DenseMatrix zeros_like(const DenseMatrix& m);

// C = A * B
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T
DenseMatrix matmul_transB(const DenseMatrix& a, const DenseMatrix& b);
// C = A^T * B
DenseMatrix matmul_transA(const DenseMatrix& a, const DenseMatrix& b);

void add_inplace(DenseMatrix& a, const DenseMatrix& b);
void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b);  // a += alpha*b
void scale_inplace(DenseMatrix& a, double alpha);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);

// One row of m as a 1 x cols matrix.
DenseMatrix take_row(const DenseMatrix& m, int row);
// Rows of m listed by index, stacked.
DenseMatrix take_rows(const DenseMatrix& m, const std::vector<int>& rows);
// Horizontal concatenation of single-row matrices.
DenseMatrix concat_cols(const std::vector<const DenseMatrix*>& parts);

double dot_rows(const DenseMatrix& a, int ra, const DenseMatrix& b, int rb, int offset, int len);

}  // namespace orion
