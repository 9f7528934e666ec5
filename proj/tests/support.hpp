#pragma once

#include <cmath>
#include <functional>

#include <qoc/linalg.hpp>
#include <qoc/noise.hpp>

namespace qoc::testing {

inline CMatrix random_complex(Rng &rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = complex(rng.normal(), rng.normal());
  return m;
}

inline CMatrix random_hermitian(Rng &rng, Eigen::Index d, double scale = 1.0) {
  const CMatrix a = random_complex(rng, d, d);
  return 0.5 * scale * (a + a.adjoint());
}

// Haar-ish unitary from the QR of a Gaussian matrix.
inline CMatrix random_unitary(Rng &rng, Eigen::Index d) {
  const CMatrix a = random_complex(rng, d, d);
  Eigen::HouseholderQR<CMatrix> qr(a);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

inline CMatrix random_density(Rng &rng, Eigen::Index d) {
  const CMatrix a = random_complex(rng, d, d);
  CMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

inline double rel_error(const RMatrix &a, const RMatrix &b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Central differences of a matrix-valued argument.
inline RMatrix central_difference(const std::function<double(const RMatrix &)> &f,
                                  const RMatrix &x, double h = 1e-6) {
  RMatrix g(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      RMatrix p = x, m = x;
      p(r, c) += h;
      m(r, c) -= h;
      g(r, c) = (f(p) - f(m)) / (2.0 * h);
    }
  return g;
}

}  // namespace qoc::testing
