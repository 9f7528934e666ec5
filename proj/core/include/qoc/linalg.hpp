#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qoc {

using complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kDefaultOperatorTol = 1e-10;

/// Dense square complex matrix. Hamiltonians carry units of angular
/// frequency, propagators and gates are dimensionless.
class Operator {
 public:
  Operator() = default;
  explicit Operator(CMatrix data);

  static Operator identity(std::size_t dim);
  static Operator zero(std::size_t dim);

  [[nodiscard]] std::size_t dim() const noexcept {
    return static_cast<std::size_t>(data_.rows());
  }
  [[nodiscard]] const CMatrix &data() const noexcept { return data_; }
  [[nodiscard]] complex operator()(Eigen::Index r, Eigen::Index c) const {
    return data_(r, c);
  }

  [[nodiscard]] Operator dagger() const;
  [[nodiscard]] Operator transpose() const;
  [[nodiscard]] Operator conj() const;
  [[nodiscard]] complex trace() const { return data_.trace(); }

  [[nodiscard]] bool is_hermitian(double tol = kDefaultOperatorTol) const;
  [[nodiscard]] bool is_unitary(double tol = kDefaultOperatorTol) const;

  Operator &operator+=(const Operator &rhs);
  Operator &operator-=(const Operator &rhs);
  Operator &operator*=(complex s);

  friend Operator operator+(Operator a, const Operator &b) { return a += b; }
  friend Operator operator-(Operator a, const Operator &b) { return a -= b; }
  friend Operator operator*(Operator a, complex s) { return a *= s; }
  friend Operator operator*(complex s, Operator a) { return a *= s; }
  friend Operator operator*(const Operator &a, const Operator &b);

 private:
  CMatrix data_;
};

/// Column-stacked density matrix, vec(rho).
class VectorizedState {
 public:
  VectorizedState() = default;
  explicit VectorizedState(CVector data);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] const CVector &data() const noexcept { return data_; }

 private:
  CVector data_;
  std::size_t dim_ = 0;
};

enum class ExpMethod {
  pade,      // scaling and squaring with diagonal Pade approximants
  spectral,  // eigendecomposition, Hermitian inputs only
};

/// exp(scale * A).
[[nodiscard]] Operator matexp(const Operator &a, complex scale,
                              ExpMethod method = ExpMethod::pade);

/// Returns exp(scale * A) and the Frechet derivative of X -> exp(scale * X)
/// at A in direction E. Both come out of a single exponential of the
/// 2d x 2d block matrix [[sA, sE], [0, sA]].
[[nodiscard]] std::pair<Operator, Operator>
matexp_frechet(const Operator &a, const Operator &e, complex scale);

/// Raw-matrix versions used by the solvers.
[[nodiscard]] CMatrix expm(const CMatrix &a);
[[nodiscard]] CMatrix expm_hermitian(const CMatrix &h, complex scale);
/// (exp(A), L(A, E)) for pre-scaled A and E.
[[nodiscard]] std::pair<CMatrix, CMatrix> expm_frechet(const CMatrix &a, const CMatrix &e);

[[nodiscard]] Operator kron(const Operator &a, const Operator &b);
[[nodiscard]] CMatrix kron(const CMatrix &a, const CMatrix &b);

[[nodiscard]] VectorizedState vectorize(const Operator &rho);
[[nodiscard]] Operator devectorize(const VectorizedState &v);

enum class Pauli { x, y, z, plus, minus, identity };

/// Basis order: index 0 is the ground state |0>, index 1 the excited state
/// |1>. minus maps |1> to |0>.
[[nodiscard]] Operator pauli(Pauli which);

/// Generalized Gell-Mann basis of dimension d with identity first,
/// normalized to tr(s_i s_j) = d delta_ij. For d = 2 this is (I, x, y, z).
[[nodiscard]] std::vector<CMatrix> hermitian_basis(std::size_t dim);

[[nodiscard]] double max_abs(const CMatrix &m);

}  // namespace qoc
