#include "orion/matrix.hpp"

#include <cmath>
#include <string>

namespace orion {

namespace {

void check_mul(int ak, int bk, const char* what) {
  if (ak != bk) {
    throw DimensionError(std::string(what) + ": inner dimensions " + std::to_string(ak) +
                         " vs " + std::to_string(bk));
  }
}

}  // namespace

bool DenseMatrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix zeros_like(const DenseMatrix& m) { return DenseMatrix(m.rows, m.cols); }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.cols, b.rows, "matmul");
  DenseMatrix c(a.rows, b.cols);
  const int K = a.cols;
  const int N = b.cols;
  // Four A-rows per pass so each loaded B row feeds four FMA streams.
  int i = 0;
  for (; i + 4 <= a.rows; i += 4) {
    const double* a0 = a.row(i);
    const double* a1 = a.row(i + 1);
    const double* a2 = a.row(i + 2);
    const double* a3 = a.row(i + 3);
    double* c0 = c.row(i);
    double* c1 = c.row(i + 1);
    double* c2 = c.row(i + 2);
    double* c3 = c.row(i + 3);
    for (int k = 0; k < K; ++k) {
      const double* brow = b.row(k);
      const double f0 = a0[k], f1 = a1[k], f2 = a2[k], f3 = a3[k];
      for (int j = 0; j < N; ++j) {
        const double bv = brow[j];
        c0[j] += f0 * bv;
        c1[j] += f1 * bv;
        c2[j] += f2 * bv;
        c3[j] += f3 * bv;
      }
    }
  }
  for (; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < K; ++k) {
      const double f = arow[k];
      if (f == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < N; ++j) crow[j] += f * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_transB(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.cols, b.cols, "matmul_transB");
  DenseMatrix c(a.rows, b.rows);
  const int K = a.cols;
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    int j = 0;
    // Four B-rows per pass: one read of the A row drives four dot products.
    for (; j + 4 <= b.rows; j += 4) {
      const double* b0 = b.row(j);
      const double* b1 = b.row(j + 1);
      const double* b2 = b.row(j + 2);
      const double* b3 = b.row(j + 3);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (int k = 0; k < K; ++k) {
        const double av = arow[k];
        s0 += av * b0[k];
        s1 += av * b1[k];
        s2 += av * b2[k];
        s3 += av * b3[k];
      }
      crow[j] = s0;
      crow[j + 1] = s1;
      crow[j + 2] = s2;
      crow[j + 3] = s3;
    }
    for (; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
      crow[j] = s;
    }
  }
  return c;
}

DenseMatrix matmul_transA(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.rows, b.rows, "matmul_transA");
  DenseMatrix c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row(i);
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw DimensionError("add_inplace: shape mismatch");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw DimensionError("axpy_inplace: shape mismatch");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += alpha * b.data[i];
}

void scale_inplace(DenseMatrix& a, double alpha) {
  for (double& v : a.data) v *= alpha;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c = a;
  add_inplace(c, b);
  return c;
}

DenseMatrix take_row(const DenseMatrix& m, int row) {
  DenseMatrix out(1, m.cols);
  for (int j = 0; j < m.cols; ++j) out.at(0, j) = m.at(row, j);
  return out;
}

DenseMatrix take_rows(const DenseMatrix& m, const std::vector<int>& rows) {
  DenseMatrix out(static_cast<int>(rows.size()), m.cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < m.cols; ++j) out.at(static_cast<int>(i), j) = m.at(rows[i], j);
  }
  return out;
}

DenseMatrix concat_cols(const std::vector<const DenseMatrix*>& parts) {
  int total = 0;
  for (const DenseMatrix* p : parts) {
    if (p->rows != 1) throw DimensionError("concat_cols expects single-row parts");
    total += p->cols;
  }
  DenseMatrix out(1, total);
  int at = 0;
  for (const DenseMatrix* p : parts) {
    for (int j = 0; j < p->cols; ++j) out.at(0, at++) = p->at(0, j);
  }
  return out;
}

double dot_rows(const DenseMatrix& a, int ra, const DenseMatrix& b, int rb, int offset, int len) {
  const double* x = a.row(ra) + offset;
  const double* y = b.row(rb) + offset;
  double s = 0.0;
  for (int k = 0; k < len; ++k) s += x[k] * y[k];
  return s;
}

}  // namespace orion
