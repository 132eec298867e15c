#include "nctj/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace nctj::la {

MatD MatD::identity(int n) {
  MatD m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

MatD matmul(const MatD& x, const MatD& y) {
  if (x.cols != y.rows) throw DimensionError("la::matmul: inner dimensions disagree");
  MatD out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int t = 0; t < x.cols; ++t) {
      double xv = x(i, t);
      if (xv == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) out(i, j) += xv * y(t, j);
    }
  }
  return out;
}

MatD transpose(const MatD& x) {
  MatD out(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
  }
  return out;
}

double trace(const MatD& x) {
  double t = 0.0;
  int n = std::min(x.rows, x.cols);
  for (int i = 0; i < n; ++i) t += x(i, i);
  return t;
}

double frobenius_norm(const MatD& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const MatD& x, const MatD& y) {
  if (x.rows != y.rows || x.cols != y.cols) {
    throw DimensionError("la::max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
  return m;
}

SymEig sym_eig_jacobi(const MatD& a, int max_sweeps) {
  if (a.rows != a.cols) throw DimensionError("sym_eig_jacobi: matrix must be square");
  const int n = a.rows;
  MatD d = a;
  MatD v = MatD::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += d(i, j) * d(i, j);
    }
    if (off <= 1e-30 * (1.0 + frobenius_norm(d))) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = d(p, q);
        if (apq == 0.0) continue;
        double app = d(p, p), aqq = d(q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double dkp = d(k, p), dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (int k = 0; k < n; ++k) {
          double dpk = d(p, k), dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEig out;
  out.values.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.values[static_cast<size_t>(i)] = d(i, i);
  out.vectors = std::move(v);
  return out;
}

MatD pinv_psd(const MatD& a, double rcond) {
  SymEig eig = sym_eig_jacobi(a);
  const int n = a.rows;
  double lmax = 0.0;
  for (double l : eig.values) lmax = std::max(lmax, l);
  double cutoff = rcond * lmax;
  MatD out(n, n);
  for (int k = 0; k < n; ++k) {
    double l = eig.values[static_cast<size_t>(k)];
    if (l <= cutoff) continue;  // negatives and near-zeros drop out
    double inv = 1.0 / l;
    for (int i = 0; i < n; ++i) {
      double vik = eig.vectors(i, k) * inv;
      if (vik == 0.0) continue;
      for (int j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out;
}

int rank_psd(const MatD& a, double rcond) {
  SymEig eig = sym_eig_jacobi(a);
  double lmax = 0.0;
  for (double l : eig.values) lmax = std::max(lmax, l);
  if (lmax <= 0.0) return 0;
  int r = 0;
  for (double l : eig.values) {
    if (l > rcond * lmax) ++r;
  }
  return r;
}

ThinQR householder_qr_thin(const MatD& a) {
  const int m = a.rows, k = a.cols;
  if (m < k) throw ArgumentError("householder_qr_thin: need rows >= cols");
  MatD r = a;
  // Householder vectors stored column by column.
  std::vector<std::vector<double>> hh(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    double norm = 0.0;
    for (int i = j; i < m; ++i) norm += r(i, j) * r(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      hh[static_cast<size_t>(j)].assign(static_cast<size_t>(m - j), 0.0);
      continue;
    }
    double alpha = r(j, j) >= 0.0 ? -norm : norm;
    std::vector<double> v(static_cast<size_t>(m - j));
    v[0] = r(j, j) - alpha;
    for (int i = j + 1; i < m; ++i) v[static_cast<size_t>(i - j)] = r(i, j);
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 > 0.0) {
      for (int c = j; c < k; ++c) {
        double dot = 0.0;
        for (int i = j; i < m; ++i) dot += v[static_cast<size_t>(i - j)] * r(i, c);
        double f = 2.0 * dot / vnorm2;
        for (int i = j; i < m; ++i) r(i, c) -= f * v[static_cast<size_t>(i - j)];
      }
    }
    hh[static_cast<size_t>(j)] = std::move(v);
  }
  // Accumulate Q = H_0 ... H_{k-1} applied to the first k identity columns.
  MatD q(m, k);
  for (int c = 0; c < k; ++c) q(c, c) = 1.0;
  for (int j = k - 1; j >= 0; --j) {
    const auto& v = hh[static_cast<size_t>(j)];
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 == 0.0) continue;
    for (int c = 0; c < k; ++c) {
      double dot = 0.0;
      for (int i = j; i < m; ++i) dot += v[static_cast<size_t>(i - j)] * q(i, c);
      double f = 2.0 * dot / vnorm2;
      for (int i = j; i < m; ++i) q(i, c) -= f * v[static_cast<size_t>(i - j)];
    }
  }
  // Sign convention: positive diagonal of R.
  for (int j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) {
      for (int c = j; c < k; ++c) r(j, c) = -r(j, c);
      for (int i = 0; i < m; ++i) q(i, j) = -q(i, j);
    }
  }
  // Zero the strictly-lower part of R and return the k x k block.
  MatD rk(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) rk(i, j) = r(i, j);
  }
  return ThinQR{std::move(q), std::move(rk)};
}

}  // namespace nctj::la
