#include "qoc/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

void require_square(const CMatrix &m, const char *what) {
  if (m.rows() != m.cols())
    throw InvalidArgument(std::string(what) + ": matrix is not square (" +
                          std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ")");
}

void require_finite(const CMatrix &m, const char *what) {
  if (!m.allFinite())
    throw InvalidArgument(std::string(what) + ": non-finite entries");
}

double norm1(const CMatrix &m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

// Pade approximant of degree m: returns (U, V) with
// exp(A) ~ (V - U)^{-1} (V + U).
template <std::size_t N>
void pade_low(const CMatrix &a, const std::array<double, N> &b, CMatrix &u,
              CMatrix &v) {
  const auto n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  CMatrix power = ident;
  CMatrix odd = b[1] * ident;
  CMatrix even = b[0] * ident;
  for (std::size_t k = 2; k + 1 < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    odd += b[k + 1] * power;
  }
  u = a * odd;
  v = even;
}

void pade13(const CMatrix &a, CMatrix &u, CMatrix &v) {
  constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const auto n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  const CMatrix a4 = a2 * a2;
  const CMatrix a6 = a4 * a2;
  const CMatrix inner_u = b[13] * a6 + b[11] * a4 + b[9] * a2;
  u = a * (a6 * inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const CMatrix inner_v = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace

Operator::Operator(CMatrix data) : data_(std::move(data)) {
  require_square(data_, "Operator");
}

Operator Operator::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return Operator(CMatrix::Identity(n, n));
}

Operator Operator::zero(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return Operator(CMatrix::Zero(n, n));
}

Operator Operator::dagger() const { return Operator(data_.adjoint()); }
Operator Operator::transpose() const { return Operator(data_.transpose()); }
Operator Operator::conj() const { return Operator(data_.conjugate()); }

bool Operator::is_hermitian(double tol) const {
  return max_abs(data_ - data_.adjoint()) <= tol;
}

bool Operator::is_unitary(double tol) const {
  const auto n = data_.rows();
  return max_abs(data_.adjoint() * data_ - CMatrix::Identity(n, n)) <= tol;
}

Operator &Operator::operator+=(const Operator &rhs) {
  if (rhs.dim() != dim())
    throw InvalidArgument("Operator +=: dimension mismatch");
  data_ += rhs.data_;
  return *this;
}

Operator &Operator::operator-=(const Operator &rhs) {
  if (rhs.dim() != dim())
    throw InvalidArgument("Operator -=: dimension mismatch");
  data_ -= rhs.data_;
  return *this;
}

Operator &Operator::operator*=(complex s) {
  data_ *= s;
  return *this;
}

Operator operator*(const Operator &a, const Operator &b) {
  if (a.dim() != b.dim())
    throw InvalidArgument("Operator *: dimension mismatch");
  return Operator(a.data_ * b.data_);
}

VectorizedState::VectorizedState(CVector data) : data_(std::move(data)) {
  const auto n = static_cast<std::size_t>(data_.size());
  const auto d = static_cast<std::size_t>(std::llround(std::sqrt(double(n))));
  if (d * d != n || n == 0)
    throw InvalidArgument("VectorizedState: length " + std::to_string(n) +
                          " is not a perfect square");
  dim_ = d;
}

CMatrix expm(const CMatrix &a) {
  require_square(a, "matexp");
  require_finite(a, "matexp");
  const auto n = a.rows();
  if (n == 0) return a;

  constexpr std::array<double, 4> b3 = {120.0, 60.0, 12.0, 1.0};
  constexpr std::array<double, 6> b5 = {30240.0, 15120.0, 3360.0,
                                        420.0,   30.0,    1.0};
  constexpr std::array<double, 8> b7 = {17297280.0, 8648640.0, 1995840.0,
                                        277200.0,   25200.0,   1512.0,
                                        56.0,       1.0};
  constexpr std::array<double, 10> b9 = {
      17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
      2162160.0,     110880.0,     3960.0,       90.0,        1.0};

  // Theta thresholds for backward error below unit roundoff.
  constexpr double theta3 = 1.495585217958292e-2;
  constexpr double theta5 = 2.539398330063230e-1;
  constexpr double theta7 = 9.504178996162932e-1;
  constexpr double theta9 = 2.097847961257068e0;
  constexpr double theta13 = 5.371920351148152e0;

  const double l1 = norm1(a);
  CMatrix u, v;
  int squarings = 0;
  if (l1 <= theta3) {
    pade_low(a, b3, u, v);
  } else if (l1 <= theta5) {
    pade_low(a, b5, u, v);
  } else if (l1 <= theta7) {
    pade_low(a, b7, u, v);
  } else if (l1 <= theta9) {
    pade_low(a, b9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(l1 / theta13))));
    const CMatrix scaled = a / std::ldexp(1.0, squarings);
    pade13(scaled, u, v);
  }
  CMatrix result = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

CMatrix expm_hermitian(const CMatrix &h, complex scale) {
  require_square(h, "matexp");
  require_finite(h, "matexp");
  if (max_abs(h - h.adjoint()) > kDefaultOperatorTol * std::max(1.0, max_abs(h)))
    throw InvalidArgument("matexp: spectral method requires a Hermitian input");
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
  const CVector phases =
      (scale * eig.eigenvalues().cast<complex>().array()).exp().matrix();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

Operator matexp(const Operator &a, complex scale, ExpMethod method) {
  if (!std::isfinite(scale.real()) || !std::isfinite(scale.imag()))
    throw InvalidArgument("matexp: non-finite scale");
  switch (method) {
    case ExpMethod::spectral:
      return Operator(expm_hermitian(a.data(), scale));
    case ExpMethod::pade:
    default:
      return Operator(expm(scale * a.data()));
  }
}

std::pair<CMatrix, CMatrix> expm_frechet(const CMatrix &a, const CMatrix &e) {
  require_square(a, "matexp_frechet");
  if (a.rows() != e.rows() || a.cols() != e.cols())
    throw InvalidArgument("matexp_frechet: dimension mismatch");
  const auto n = a.rows();
  CMatrix block = CMatrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.bottomRightCorner(n, n) = a;
  block.topRightCorner(n, n) = e;
  const CMatrix big = expm(block);
  return {big.topLeftCorner(n, n), big.topRightCorner(n, n)};
}

std::pair<Operator, Operator> matexp_frechet(const Operator &a,
                                             const Operator &e,
                                             complex scale) {
  if (a.dim() != e.dim())
    throw InvalidArgument("matexp_frechet: dimension mismatch");
  auto [u, l] = expm_frechet(scale * a.data(), scale * e.data());
  return {Operator(std::move(u)), Operator(std::move(l))};
}

CMatrix kron(const CMatrix &a, const CMatrix &b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Operator kron(const Operator &a, const Operator &b) {
  return Operator(kron(a.data(), b.data()));
}

VectorizedState vectorize(const Operator &rho) {
  // Eigen storage is column-major, so the reshaped view stacks columns.
  return VectorizedState(rho.data().reshaped());
}

Operator devectorize(const VectorizedState &v) {
  const auto d = static_cast<Eigen::Index>(v.dim());
  return Operator(v.data().reshaped(d, d));
}

Operator pauli(Pauli which) {
  using namespace std::complex_literals;
  CMatrix m(2, 2);
  switch (which) {
    case Pauli::x: m << 0.0, 1.0, 1.0, 0.0; break;
    case Pauli::y: m << 0.0, -1.0i, 1.0i, 0.0; break;
    case Pauli::z: m << 1.0, 0.0, 0.0, -1.0; break;
    case Pauli::plus: m << 0.0, 0.0, 1.0, 0.0; break;
    case Pauli::minus: m << 0.0, 1.0, 0.0, 0.0; break;
    case Pauli::identity: m << 1.0, 0.0, 0.0, 1.0; break;
  }
  return Operator(std::move(m));
}

std::vector<CMatrix> hermitian_basis(std::size_t dim) {
  using namespace std::complex_literals;
  const auto d = static_cast<Eigen::Index>(dim);
  if (d == 0) throw InvalidArgument("hermitian_basis: dimension must be positive");
  std::vector<CMatrix> basis;
  basis.reserve(dim * dim);
  basis.push_back(CMatrix::Identity(d, d));
  // Gell-Mann matrices have tr(l_i l_j) = 2 delta_ij.
  const double norm = std::sqrt(double(dim) / 2.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      CMatrix sym = CMatrix::Zero(d, d);
      sym(j, k) = sym(k, j) = norm;
      basis.push_back(std::move(sym));
      CMatrix asym = CMatrix::Zero(d, d);
      asym(j, k) = -1.0i * norm;
      asym(k, j) = 1.0i * norm;
      basis.push_back(std::move(asym));
    }
  }
  for (Eigen::Index l = 1; l < d; ++l) {
    CMatrix diag = CMatrix::Zero(d, d);
    const double c = norm * std::sqrt(2.0 / double(l * (l + 1)));
    for (Eigen::Index m = 0; m < l; ++m) diag(m, m) = c;
    diag(l, l) = -c * double(l);
    basis.push_back(std::move(diag));
  }
  return basis;
}

double max_abs(const CMatrix &m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace qoc
