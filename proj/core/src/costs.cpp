#include "qoc/costs.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

constexpr double kDensityTol = 1e-8;

void check_density_matrix(const Operator &rho, const char *name) {
  const double scale = std::max(1.0, max_abs(rho.data()));
  if (!rho.is_hermitian(kDensityTol * scale))
    throw InvalidArgument(std::string("state_fidelity: ") + name + " is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > kDensityTol)
    throw InvalidArgument(std::string("state_fidelity: ") + name + " does not have unit trace");
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.data());
  if (eig.eigenvalues().minCoeff() < -kDensityTol)
    throw InvalidArgument(std::string("state_fidelity: ") + name + " is not positive semidefinite");
}

// Eigenvalues below the roundoff floor d eps max|lambda| are treated as zero;
// otherwise rank-deficient inputs pick up sqrt(eps)-sized errors.
RVector psd_root_values(const RVector &lambda) {
  const double floor = double(lambda.size()) * std::numeric_limits<double>::epsilon() *
                       lambda.cwiseAbs().maxCoeff();
  return lambda.unaryExpr([floor](double x) { return x <= floor ? 0.0 : std::sqrt(x); });
}

CMatrix psd_sqrt(const CMatrix &m) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (m + m.adjoint()));
  const RVector root = psd_root_values(eig.eigenvalues());
  return eig.eigenvectors() * root.cast<complex>().asDiagonal() * eig.eigenvectors().adjoint();
}

void check_rows(const PulseMatrix &u, const HamiltonianSpec &spec) {
  if (u.n_channels() != Eigen::Index(spec.controls.size()))
    throw InvalidArgument("cost: control amplitude width does not match the Hamiltonian");
}

// dI/du for I = 1 - |tr(A^dag U)|^2 / d^2 with fixed A.
RMatrix fixed_reference_gradient(const PropagationRecord &rec, const CMatrix &ref_dagger,
                                 complex tau, double d) {
  const CMatrix dtau = rec.trace_gradient(ref_dagger);
  return (-2.0 / (d * d)) * (std::conj(tau) * dtau).real();
}

}  // namespace

double state_fidelity(const Operator &rho1, const Operator &rho2) {
  if (rho1.dim() != rho2.dim()) throw InvalidArgument("state_fidelity: dimension mismatch");
  check_density_matrix(rho1, "rho1");
  check_density_matrix(rho2, "rho2");
  const CMatrix s1 = psd_sqrt(rho1.data());
  const CMatrix inner = s1 * rho2.data() * s1;
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (inner + inner.adjoint()),
                                                   Eigen::EigenvaluesOnly);
  const double tr = psd_root_values(eig.eigenvalues()).sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

double entanglement_infidelity(const CMatrix &u, const CMatrix &v) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw InvalidArgument("entanglement_infidelity: dimension mismatch");
  const double d = double(u.rows());
  return 1.0 - std::norm((v.adjoint() * u).trace()) / (d * d);
}

double entanglement_infidelity(const Operator &u, const Operator &v) {
  return entanglement_infidelity(u.data(), v.data());
}

double open_system_fidelity(const Operator &v, const Operator &process) {
  const auto d = v.dim();
  if (process.dim() != d * d)
    throw InvalidArgument("open_system_fidelity: process must be d^2 x d^2");
  const CMatrix w = kron(CMatrix(v.data().transpose()), CMatrix(v.data().adjoint()));
  const complex f = (w * process.data()).trace() / double(d * d);
  if (std::abs(f.imag()) > 1e-10)
    throw NumericalError("open_system_fidelity: imaginary residue " + std::to_string(f.imag()) +
                         "; process does not follow the column-stacking convention");
  return f.real();
}

double leakage_error(const Operator &u_full, const std::vector<Eigen::Index> &comp) {
  if (comp.empty()) throw InvalidArgument("leakage_error: empty computational subspace");
  const auto n = Eigen::Index(u_full.dim());
  for (auto i : comp)
    if (i < 0 || i >= n)
      throw InvalidArgument("leakage_error: index " + std::to_string(i) + " out of range");
  const CMatrix uc = u_full.data()(comp, comp);
  return 1.0 - (uc.adjoint() * uc).trace().real() / double(comp.size());
}

double noise_average_infidelity(const std::vector<PropagationRecord> &records,
                                const Operator &target, bool neglect_systematic,
                                const CMatrix *noiseless) {
  if (records.empty()) throw InvalidArgument("noise_average_infidelity: no records");
  if (neglect_systematic && !noiseless)
    throw InvalidArgument("noise_average_infidelity: noiseless propagator required");
  double wsum = 0.0, total = 0.0;
  const CMatrix &ref = neglect_systematic ? *noiseless : target.data();
  for (const auto &rec : records) {
    wsum += rec.weight;
    total += rec.weight * entanglement_infidelity(rec.total(), ref);
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw InvalidArgument("noise_average_infidelity: weights sum to " + std::to_string(wsum));
  return total;
}

OperationInfidelity::OperationInfidelity(HamiltonianSpec spec, Operator target, std::string label)
    : spec_(std::move(spec)), target_(std::move(target)), label_(std::move(label)) {
  if (target_.dim() != spec_.dim())
    throw InvalidArgument("OperationInfidelity: target dimension mismatch");
}

CostOutput OperationInfidelity::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, spec_);
  const PropagationRecord rec =
      with_gradient ? propagate_closed_with_gradients(spec_, u) : propagate_closed(spec_, u);
  const double d = double(spec_.dim());
  const CMatrix vd = target_.data().adjoint();
  const complex tau = (vd * rec.total()).trace();
  CostOutput out;
  out.values.push_back(1.0 - std::norm(tau) / (d * d));
  if (with_gradient) out.grad_u.push_back(fixed_reference_gradient(rec, vd, tau, d));
  return out;
}

OperationNoiseInfidelity::OperationNoiseInfidelity(HamiltonianSpec spec, Operator target,
                                                   std::shared_ptr<const NoiseTraces> traces,
                                                   bool neglect_systematic, std::string label,
                                                   unsigned n_threads)
    : spec_(std::move(spec)),
      target_(std::move(target)),
      traces_(std::move(traces)),
      neglect_systematic_(neglect_systematic),
      label_(std::move(label)),
      n_threads_(n_threads) {
  if (!traces_ || traces_->n_traces() == 0)
    throw InvalidArgument("OperationNoiseInfidelity: no noise traces");
  if (target_.dim() != spec_.dim())
    throw InvalidArgument("OperationNoiseInfidelity: target dimension mismatch");
}

CostOutput OperationNoiseInfidelity::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, spec_);
  MonteCarloOptions opts;
  opts.with_gradients = with_gradient;
  opts.n_threads = n_threads_;
  const auto records = propagate_monte_carlo(spec_, u, *traces_, opts);
  const double d = double(spec_.dim());

  CostOutput out;
  RMatrix grad = RMatrix::Zero(u.n_steps(), u.n_channels());
  if (!neglect_systematic_) {
    out.values.push_back(noise_average_infidelity(records, target_, false));
    if (with_gradient) {
      const CMatrix vd = target_.data().adjoint();
      for (const auto &rec : records) {
        const complex tau = (vd * rec.total()).trace();
        grad += rec.weight * fixed_reference_gradient(rec, vd, tau, d);
      }
      out.grad_u.push_back(std::move(grad));
    }
    return out;
  }

  const PropagationRecord clean =
      with_gradient ? propagate_closed_with_gradients(spec_, u) : propagate_closed(spec_, u);
  out.values.push_back(noise_average_infidelity(records, target_, true, &clean.total()));
  if (with_gradient) {
    // d tau_i = tr(U0^dag dU_i) + conj(tr(U_i^dag dU0))
    const CMatrix u0d = clean.total().adjoint();
    CMatrix pull = CMatrix::Zero(u0d.rows(), u0d.cols());
    CMatrix acc = CMatrix::Zero(u.n_steps(), u.n_channels());
    for (const auto &rec : records) {
      const complex tau = (u0d * rec.total()).trace();
      acc += rec.weight * std::conj(tau) * rec.trace_gradient(u0d);
      pull += rec.weight * tau * rec.total().adjoint();
    }
    grad = (-2.0 / (d * d)) * (acc.real() + clean.trace_gradient(pull).real());
    out.grad_u.push_back(std::move(grad));
  }
  return out;
}

OpenSystemInfidelity::OpenSystemInfidelity(HamiltonianSpec spec, LindbladSpec lindblad,
                                           Operator target, std::string label)
    : spec_(std::move(spec)),
      lindblad_(std::move(lindblad)),
      target_(std::move(target)),
      label_(std::move(label)) {
  if (target_.dim() != spec_.dim())
    throw InvalidArgument("OpenSystemInfidelity: target dimension mismatch");
}

CostOutput OpenSystemInfidelity::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, spec_);
  const PropagationRecord rec = propagate_lindblad(spec_, lindblad_, u, with_gradient);
  const double d = double(spec_.dim());
  CostOutput out;
  out.values.push_back(1.0 - open_system_fidelity(target_, Operator(rec.total())));
  if (with_gradient) {
    const CMatrix w = kron(CMatrix(target_.data().transpose()), CMatrix(target_.data().adjoint()));
    out.grad_u.push_back((-1.0 / (d * d)) * rec.trace_gradient(w).real());
  }
  return out;
}

LeakageCost::LeakageCost(HamiltonianSpec spec, std::vector<Eigen::Index> comp, std::string label)
    : spec_(std::move(spec)), comp_(std::move(comp)), label_(std::move(label)) {
  (void)leakage_error(Operator::identity(spec_.dim()), comp_);
}

CostOutput LeakageCost::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, spec_);
  const PropagationRecord rec =
      with_gradient ? propagate_closed_with_gradients(spec_, u) : propagate_closed(spec_, u);
  CostOutput out;
  out.values.push_back(leakage_error(Operator(rec.total()), comp_));
  if (with_gradient) {
    const CMatrix uc = rec.total()(comp_, comp_);
    CMatrix m = CMatrix::Zero(rec.total().rows(), rec.total().cols());
    m(comp_, comp_) = uc.adjoint();
    out.grad_u.push_back((-2.0 / double(comp_.size())) * rec.trace_gradient(m).real());
  }
  return out;
}

StateInfidelity::StateInfidelity(HamiltonianSpec spec, CVector initial, CVector target,
                                 std::string label)
    : spec_(std::move(spec)),
      initial_(std::move(initial)),
      target_(std::move(target)),
      label_(std::move(label)) {
  const auto d = Eigen::Index(spec_.dim());
  if (initial_.size() != d || target_.size() != d)
    throw InvalidArgument("StateInfidelity: state dimension mismatch");
  if (!(initial_.norm() > 0.0) || !(target_.norm() > 0.0) || !initial_.allFinite() ||
      !target_.allFinite())
    throw InvalidArgument("StateInfidelity: states must be finite and nonzero");
  initial_.normalize();
  target_.normalize();
}

CostOutput StateInfidelity::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, spec_);
  const PropagationRecord rec =
      with_gradient ? propagate_closed_with_gradients(spec_, u) : propagate_closed(spec_, u);
  const complex amp = target_.dot(rec.total() * initial_);
  CostOutput out;
  out.values.push_back(1.0 - std::norm(amp));
  if (with_gradient) {
    // amp = tr(|initial><target| U)
    const CMatrix m = initial_ * target_.adjoint();
    out.grad_u.push_back(-2.0 * (std::conj(amp) * rec.trace_gradient(m)).real());
  }
  return out;
}

FilterFunctionCost::FilterFunctionCost(FilterFunctionInfidelity ff, std::string label)
    : ff_(std::move(ff)), label_(std::move(label)) {
  if (ff_.spectra.empty()) throw InvalidArgument("FilterFunctionCost: no spectral density");
}

CostOutput FilterFunctionCost::evaluate(const PulseMatrix &u, bool with_gradient) const {
  check_rows(u, ff_.spec);
  CostOutput out;
  out.values.push_back(ff_(u));
  if (with_gradient) out.grad_u = cost_gradient_fd(*this, u);
  return out;
}

std::vector<RMatrix> cost_gradient_fd(const CostFunction &cost, const PulseMatrix &u,
                                      double rel_step) {
  const std::size_t n_entries = cost.labels().size();
  std::vector<RMatrix> grads(n_entries, RMatrix::Zero(u.n_steps(), u.n_channels()));
  for (Eigen::Index c = 0; c < u.n_channels(); ++c)
    for (Eigen::Index l = 0; l < u.n_steps(); ++l) {
      const double h = rel_step * std::max(1.0, std::abs(u.values()(l, c)));
      RMatrix plus = u.values(), minus = u.values();
      plus(l, c) += h;
      minus(l, c) -= h;
      const auto fp = cost.evaluate(PulseMatrix(plus, u.dt()), false).values;
      const auto fm = cost.evaluate(PulseMatrix(minus, u.dt()), false).values;
      for (std::size_t e = 0; e < n_entries; ++e) {
        if (!std::isfinite(fp[e]) || !std::isfinite(fm[e]))
          throw NumericalError("cost_gradient_fd: non-finite cost at perturbed point");
        grads[e](l, c) = (fp[e] - fm[e]) / (2.0 * h);
      }
    }
  return grads;
}

}  // namespace qoc
