#pragma once

#include <vector>

#include "nctj/common.hpp"

namespace nctj::la {

// Small dense row-major double matrix. Everything here is O(n^3) textbook
// code for matrices of at most a few hundred rows.
struct MatD {
  int rows = 0, cols = 0;
  std::vector<double> a;

  MatD() = default;
  MatD(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static MatD identity(int n);
};

MatD matmul(const MatD& x, const MatD& y);
MatD transpose(const MatD& x);
double trace(const MatD& x);
double frobenius_norm(const MatD& x);
double max_abs_diff(const MatD& x, const MatD& y);

// Symmetric eigendecomposition by cyclic Jacobi sweeps. A = V diag(values) V^T
// with orthonormal columns in `vectors`. Eigenvalues unsorted (diagonal order).
struct SymEig {
  std::vector<double> values;
  MatD vectors;
};
SymEig sym_eig_jacobi(const MatD& a, int max_sweeps = 64);

// Moore-Penrose pseudoinverse of a symmetric PSD matrix: eigenvalues below
// rcond * max eigenvalue (or negative) are treated as zero.
MatD pinv_psd(const MatD& a, double rcond = 1e-10);
int rank_psd(const MatD& a, double rcond = 1e-10);

// Thin Householder QR of an m x k matrix (m >= k): A = Q R with Q m x k,
// orthonormal columns, and R's diagonal normalized positive so the factor
// is unique.
struct ThinQR {
  MatD q;
  MatD r;
};
ThinQR householder_qr_thin(const MatD& a);

}  // namespace nctj::la
