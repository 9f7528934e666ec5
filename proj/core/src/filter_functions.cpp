#include "qoc/filter_functions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

using namespace std::complex_literals;

// int_0^dt e^{i x tau} d tau
complex segment_integral(double x, double dt) {
  const double p = x * dt;
  if (std::abs(p) < 1e-4) return dt * complex(1.0 - p * p / 6.0, p / 2.0 - p * p * p / 24.0);
  return (std::exp(complex(0.0, p)) - 1.0) / complex(0.0, x);
}

}  // namespace

FrequencyGrid FrequencyGrid::from_samples(RVector omega) {
  const Eigen::Index n = omega.size();
  if (n < 2) throw InvalidArgument("FrequencyGrid: need at least two samples");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(omega[i] > 0.0) || !std::isfinite(omega[i]))
      throw InvalidArgument("FrequencyGrid: frequencies must be positive");
    if (i > 0 && !(omega[i] > omega[i - 1]))
      throw InvalidArgument("FrequencyGrid: frequencies must be strictly ascending");
  }
  RVector w = RVector::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = omega[i + 1] - omega[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return {std::move(omega), std::move(w)};
}

FrequencyGrid FrequencyGrid::log_spaced(double omega_min, double omega_max, Eigen::Index n) {
  if (!(omega_min > 0.0) || !(omega_max > omega_min) || n < 2)
    throw InvalidArgument("FrequencyGrid::log_spaced: need 0 < min < max and n >= 2");
  const double a = std::log10(omega_min);
  const double b = std::log10(omega_max);
  RVector omega(n);
  for (Eigen::Index i = 0; i < n; ++i)
    omega[i] = std::pow(10.0, a + (b - a) * double(i) / double(n - 1));
  return from_samples(std::move(omega));
}

FrequencyGrid FrequencyGrid::default_for(const RVector &dt, Eigen::Index n) {
  return log_spaced(1.0 / dt.sum(), 1.0 / dt.minCoeff(), n);
}

double SpectralDensity::two_sided(double omega) const {
  if (!fn) throw InvalidArgument("SpectralDensity: no function");
  const double s = convention == Convention::one_sided_frequency
                       ? 0.5 * fn(omega / (2.0 * std::numbers::pi))
                       : fn(omega);
  if (!std::isfinite(s) || s < 0.0)
    throw InvalidArgument("SpectralDensity: negative or non-finite value at omega = " +
                          std::to_string(omega));
  return s;
}

std::vector<FilterNoise> filter_noise_from_spec(const HamiltonianSpec &spec,
                                                const PulseMatrix &u) {
  std::vector<FilterNoise> out;
  const RVector t = u.start_times();
  for (const auto &term : spec.noise) {
    RVector s(u.n_steps());
    for (Eigen::Index l = 0; l < u.n_steps(); ++l)
      s[l] = term.susceptibility(u.values().row(l).transpose(), t[l]);
    out.push_back({term.op, std::move(s)});
  }
  return out;
}

FilterFunctionResult compute_filter_function(const PropagationRecord &record,
                                             const std::vector<FilterNoise> &noise,
                                             const FrequencyGrid &grid) {
  if (record.kind != PropagationRecord::Kind::closed)
    throw InvalidArgument("compute_filter_function: requires a closed-system record");
  if (record.steps.empty()) throw InvalidArgument("compute_filter_function: empty record");
  const auto d = record.steps.front().rows();
  const auto n_omega = grid.omega.size();
  const auto n_steps = record.steps.size();

  FilterFunctionResult out;
  out.omega = grid.omega;
  out.basis = hermitian_basis(std::size_t(d));
  out.values = RMatrix::Zero(Eigen::Index(noise.size()), n_omega);
  const std::size_t n_basis = out.basis.size();

  // Per-step eigendecomposition and basis rotated into the eigenframe.
  std::vector<RVector> eigvals(n_steps);
  std::vector<CMatrix> eigvecs(n_steps);
  std::vector<CMatrix> e_gap(n_steps);
  std::vector<std::vector<CMatrix>> rotated(n_steps, std::vector<CMatrix>(n_basis));
  for (std::size_t j = 0; j < n_steps; ++j) {
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(record.generators[j]);
    eigvals[j] = eig.eigenvalues();
    eigvecs[j] = eig.eigenvectors();
    const CMatrix q = j == 0 ? CMatrix::Identity(d, d) : record.forward[j - 1];
    for (std::size_t b = 1; b < n_basis; ++b)
      rotated[j][b] = eigvecs[j].adjoint() * q * out.basis[b] * q.adjoint() * eigvecs[j];
    e_gap[j].resize(d, d);
    for (Eigen::Index m = 0; m < d; ++m)
      for (Eigen::Index n = 0; n < d; ++n)
        e_gap[j](m, n) =
            std::exp(complex(0.0, (eigvals[j][m] - eigvals[j][n]) * record.dt[Eigen::Index(j)]));
  }

  // phase(w, j) = e^{i omega_w t_j}, e_omega(w, j) = e^{i omega_w dt_j}; the
  // phases follow by recurrence and equal steps share one column of exponentials.
  CMatrix phase(n_omega, Eigen::Index(n_steps));
  CMatrix e_omega(n_omega, Eigen::Index(n_steps));
  for (std::size_t j = 0; j < n_steps; ++j) {
    const auto jj = Eigen::Index(j);
    if (j > 0 && record.dt[jj] == record.dt[jj - 1])
      e_omega.col(jj) = e_omega.col(jj - 1);
    else
      for (Eigen::Index w = 0; w < n_omega; ++w)
        e_omega(w, jj) = std::exp(complex(0.0, grid.omega[w] * record.dt[jj]));
    if (j == 0)
      phase.col(0).setOnes();
    else
      phase.col(jj) = phase.col(jj - 1).cwiseProduct(e_omega.col(jj - 1));
  }

  for (std::size_t a = 0; a < noise.size(); ++a) {
    const FilterNoise &src = noise[a];
    if (src.op.dim() != std::size_t(d))
      throw InvalidArgument("compute_filter_function: noise operator " + std::to_string(a) +
                            " has the wrong dimension");
    if (src.sensitivity.size() != 0 && src.sensitivity.size() != record.n_control_steps)
      throw InvalidArgument("compute_filter_function: sensitivity of noise operator " +
                            std::to_string(a) + " does not match the control steps");
    // coefficients[j][b](m, n) = P_nm B'_mn / d
    std::vector<std::vector<CMatrix>> coeff(n_steps, std::vector<CMatrix>(n_basis));
    for (std::size_t j = 0; j < n_steps; ++j) {
      const double s = src.sensitivity.size() ? src.sensitivity[record.control_step[j]] : 1.0;
      const CMatrix bp = s * eigvecs[j].adjoint() * src.op.data() * eigvecs[j];
      for (std::size_t b = 1; b < n_basis; ++b)
        coeff[j][b] = rotated[j][b].transpose().cwiseProduct(bp) / double(d);
    }
    CMatrix r = CMatrix::Zero(n_omega, Eigen::Index(n_basis));
    Eigen::ArrayXcd integral(n_omega);
    for (std::size_t j = 0; j < n_steps; ++j) {
      const double dt = record.dt[Eigen::Index(j)];
      for (Eigen::Index m = 0; m < d; ++m)
        for (Eigen::Index n = 0; n < d; ++n) {
          // e^{i x dt} = e^{i omega dt} e^{i (l_m - l_n) dt}, x = omega + l_m - l_n
          const double gap = eigvals[j][m] - eigvals[j][n];
          const Eigen::ArrayXd x = grid.omega.array() + gap;
          const Eigen::ArrayXd inv_x = x.inverse();
          integral = (e_omega.col(Eigen::Index(j)).array() * e_gap[j](m, n) - 1.0) * inv_x;
          integral = complex(0.0, -1.0) * integral;
          for (Eigen::Index w = 0; w < n_omega; ++w)
            if (std::abs(x[w] * dt) < 1e-4) integral[w] = segment_integral(x[w], dt);
          integral *= phase.col(Eigen::Index(j)).array();
          for (std::size_t b = 1; b < n_basis; ++b)
            r.col(Eigen::Index(b)).array() += coeff[j][b](m, n) * integral;
        }
    }
    out.values.row(Eigen::Index(a)) =
        r.rightCols(Eigen::Index(n_basis - 1)).cwiseAbs2().rowwise().sum().transpose();
  }
  return out;
}

double infidelity_from_spectrum(const FilterFunctionResult &ff,
                                const std::vector<SpectralDensity> &spectra,
                                const FrequencyGrid &grid) {
  if (ff.omega.size() != grid.omega.size())
    throw InvalidArgument("infidelity_from_spectrum: grid mismatch");
  const auto n_noise = ff.values.rows();
  if (spectra.empty() || (spectra.size() != 1 && Eigen::Index(spectra.size()) != n_noise))
    throw InvalidArgument("infidelity_from_spectrum: need one spectrum or one per noise channel");
  double total = 0.0;
  for (Eigen::Index a = 0; a < n_noise; ++a) {
    const SpectralDensity &s = spectra.size() == 1 ? spectra.front() : spectra[std::size_t(a)];
    for (Eigen::Index w = 0; w < grid.omega.size(); ++w)
      total += grid.weights[w] * s.two_sided(grid.omega[w]) * ff.values(a, w);
  }
  // Both S2 and F are even in omega: twice the positive half-line.
  return total / std::numbers::pi;
}

double infidelity_from_spectrum(const FilterFunctionResult &ff, const SpectralDensity &spectrum,
                                const FrequencyGrid &grid) {
  return infidelity_from_spectrum(ff, std::vector<SpectralDensity>{spectrum}, grid);
}

FrequencyGrid FilterFunctionInfidelity::grid_for(const PulseMatrix &u) const {
  return grid.omega.size() ? grid : FrequencyGrid::default_for(u.dt());
}

FilterFunctionResult FilterFunctionInfidelity::filter_function(const PulseMatrix &u) const {
  const PropagationRecord rec = propagate_closed(spec, u);
  return compute_filter_function(rec, noise.empty() ? filter_noise_from_spec(spec, u) : noise,
                                 grid_for(u));
}

double FilterFunctionInfidelity::operator()(const PulseMatrix &u) const {
  return infidelity_from_spectrum(filter_function(u), spectra, grid_for(u));
}

RMatrix infidelity_gradient_fd(const ControlPipeline &pipeline,
                               const std::function<double(const PulseMatrix &u)> &cost,
                               const PulseMatrix &raw, double rel_step) {
  RMatrix grad(raw.n_steps(), raw.n_channels());
  for (Eigen::Index c = 0; c < raw.n_channels(); ++c)
    for (Eigen::Index l = 0; l < raw.n_steps(); ++l) {
      const double v = raw.values()(l, c);
      const double h = rel_step * std::max(1.0, std::abs(v));
      RMatrix plus = raw.values(), minus = raw.values();
      plus(l, c) += h;
      minus(l, c) -= h;
      const double fp = cost(pipeline.forward(PulseMatrix(plus, raw.dt())).amplitudes);
      const double fm = cost(pipeline.forward(PulseMatrix(minus, raw.dt())).amplitudes);
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericalError("infidelity_gradient_fd: non-finite cost at perturbed point");
      grad(l, c) = (fp - fm) / (2.0 * h);
    }
  return grad;
}

void write_filter_function_csv(std::ostream &out, const FilterFunctionResult &ff) {
  out << "omega";
  for (Eigen::Index a = 0; a < ff.values.rows(); ++a) out << ",F_" << a;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index w = 0; w < ff.omega.size(); ++w) {
    out << ff.omega[w];
    for (Eigen::Index a = 0; a < ff.values.rows(); ++a) out << ',' << ff.values(a, w);
    out << '\n';
  }
}

}  // namespace qoc
