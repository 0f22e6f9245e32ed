#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace adagoal {

/// Dense symmetric matrix, row-major, sized for ridge-regression covariances
/// (a handful of dimensions).
struct SymMatrix {
  int n = 0;
  std::vector<double> a;  // n*n, kept symmetric

  static SymMatrix scaled_identity(int n, double lambda) {
    SymMatrix m;
    m.n = n;
    m.a.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m.a[static_cast<std::size_t>(i) * n + i] = lambda;
    return m;
  }

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

  void add_outer(std::span<const double> v) {
    for (int i = 0; i < n; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      double* row = &a[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) row[j] += vi * v[j];
    }
  }

  double quad_form(std::span<const double> v) const {
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* row = &a[static_cast<std::size_t>(i) * n];
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += row[j] * v[j];
      q += v[i] * dot;
    }
    return q;
  }
};

/// Cholesky factor A = L L^T. ok() is false when the matrix is not (numerically)
/// positive definite.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& m) : n_(m.n), l_(m.a) {
    for (int j = 0; j < n_; ++j) {
      double d = l_[idx(j, j)];
      for (int k = 0; k < j; ++k) d -= l_[idx(j, k)] * l_[idx(j, k)];
      if (!(d > 0.0)) {
        ok_ = false;
        return;
      }
      const double root = std::sqrt(d);
      l_[idx(j, j)] = root;
      for (int i = j + 1; i < n_; ++i) {
        double s = l_[idx(i, j)];
        for (int k = 0; k < j; ++k) s -= l_[idx(i, k)] * l_[idx(j, k)];
        l_[idx(i, j)] = s / root;
      }
    }
  }

  bool ok() const { return ok_; }

  /// ||L^{-1} v||_2 = sqrt(v^T A^{-1} v).
  double inv_half_norm(std::span<const double> v) const {
    double norm2 = 0.0;
    scratch_.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      double s = v[i];
      for (int k = 0; k < i; ++k) s -= l_[idx(i, k)] * scratch_[k];
      scratch_[i] = s / l_[idx(i, i)];
      norm2 += scratch_[i] * scratch_[i];
    }
    return std::sqrt(norm2);
  }

  /// Solves A x = b.
  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    for (int i = 0; i < n_; ++i) {  // L y = b
      double s = x[i];
      for (int k = 0; k < i; ++k) s -= l_[idx(i, k)] * x[k];
      x[i] = s / l_[idx(i, i)];
    }
    for (int i = n_ - 1; i >= 0; --i) {  // L^T x = y
      double s = x[i];
      for (int k = i + 1; k < n_; ++k) s -= l_[idx(k, i)] * x[k];
      x[i] = s / l_[idx(i, i)];
    }
    return x;
  }

  double min_diag() const {
    double m = ok_ && n_ > 0 ? l_[0] : 0.0;
    for (int i = 0; i < n_; ++i) m = std::min(m, l_[idx(i, i)]);
    return m;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
  int n_;
  std::vector<double> l_;
  mutable std::vector<double> scratch_;
  bool ok_ = true;
};

/// Gaussian elimination with partial pivoting; nullopt when singular.
/// Used by the exact policy-evaluation solves, where the system is small and
/// not symmetric.
inline std::optional<std::vector<double>> solve_dense(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  if (static_cast<int>(a.size()) != n * n) throw std::invalid_argument("solve_dense: shape mismatch");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(a[static_cast<std::size_t>(perm[col]) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(a[static_cast<std::size_t>(perm[r]) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-13) return std::nullopt;
    std::swap(perm[col], perm[pivot]);
    const double* prow = &a[static_cast<std::size_t>(perm[col]) * n];
    const double inv = 1.0 / prow[col];
    for (int r = col + 1; r < n; ++r) {
      double* row = &a[static_cast<std::size_t>(perm[r]) * n];
      const double f = row[col] * inv;
      if (f == 0.0) continue;
      row[col] = 0.0;
      for (int j = col + 1; j < n; ++j) row[j] -= f * prow[j];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    const double* row = &a[static_cast<std::size_t>(perm[i]) * n];
    double s = b[perm[i]];
    for (int j = i + 1; j < n; ++j) s -= row[j] * x[j];
    x[i] = s / row[i];
  }
  return x;
}

}  // namespace adagoal
