#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "symdisc/error.hpp"

namespace symdisc {

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // column j pairs with values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi eigenvalue algorithm for a real symmetric matrix.
///
/// Each sweep annihilates every off-diagonal entry once with a plane rotation;
/// iteration stops when the off-diagonal Frobenius mass drops below
/// `tol * ||A||_F` (or exactly zero). Suitable for the small dense Gram
/// matrices used by the invariant-basis construction.
inline SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol = 1e-15,
                                   int max_sweeps = 100) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw DimensionError("jacobi_eigen: matrix must be square");
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  int sweep = 0;
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (; sweep < max_sweeps; ++sweep) {
    const double off = off_norm();
    if (off == 0.0 || off <= tol * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values[k] = a(src, src);
    Eigen::VectorXd col = v.col(src);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col[imax] < 0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

/// Thin QR factor Q with the sign of each column chosen so that diag(R) > 0.
/// Throws NumericError when a diagonal entry of R is (numerically) zero.
inline Eigen::MatrixXd qr_orthonormalize(const Eigen::MatrixXd& a, double rank_tol = 1e-12) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  if (cols > rows) throw DimensionError("qr_orthonormalize: more columns than rows");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  const double scale = std::max(1.0, a.norm());
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (!std::isfinite(r(j, j)) || std::abs(r(j, j)) <= rank_tol * scale) {
      throw NumericError("rank-deficient matrix in QR retraction");
    }
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Frobenius norm of W^T W - I.
inline double orthonormality_error(const Eigen::MatrixXd& w) {
  return (w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols())).norm();
}

}  // namespace symdisc
