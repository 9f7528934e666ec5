#include "qoc/solvers.hpp"

#include <string>

#include "qoc/errors.hpp"
#include "qoc/parallel.hpp"

namespace qoc {

namespace {

using namespace std::complex_literals;

// Fine propagation grid: each control step split into `sub` equal parts.
struct Grid {
  RVector dt;
  std::vector<Eigen::Index> control_step;
  RVector control_start;
};

Grid make_grid(const PulseMatrix &u, Eigen::Index sub) {
  Grid g;
  const Eigen::Index n = u.n_steps();
  g.dt.resize(n * sub);
  g.control_step.resize(std::size_t(n * sub));
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index j = 0; j < sub; ++j) {
      g.dt[l * sub + j] = u.dt()[l] / double(sub);
      g.control_step[std::size_t(l * sub + j)] = l;
    }
  g.control_start = u.start_times();
  return g;
}

void fill_cumulants(PropagationRecord &rec) {
  const std::size_t n = rec.steps.size();
  const auto d = rec.steps.front().rows();
  rec.forward.resize(n);
  rec.reverse.resize(n);
  rec.forward[0] = rec.steps[0];
  for (std::size_t j = 1; j < n; ++j) rec.forward[j] = rec.steps[j] * rec.forward[j - 1];
  rec.reverse[n - 1] = CMatrix::Identity(d, d);
  for (std::size_t j = n - 1; j-- > 0;) rec.reverse[j] = rec.reverse[j + 1] * rec.steps[j + 1];
}

CMatrix control_hamiltonian(const HamiltonianSpec &spec, const RVector &u_row,
                            Eigen::Index step) {
  CMatrix h = spec.drift_at(step).data();
  for (std::size_t k = 0; k < spec.controls.size(); ++k)
    h += u_row[Eigen::Index(k)] * spec.controls[k].data();
  return h;
}

void check_controls(const HamiltonianSpec &spec, const PulseMatrix &u) {
  if (u.n_channels() != Eigen::Index(spec.controls.size()))
    throw InvalidArgument("solver: pulse has " + std::to_string(u.n_channels()) +
                          " channels for " + std::to_string(spec.controls.size()) +
                          " control operators");
  spec.validate(u.n_steps());
}

// Shared closed-system propagation; `noise` is (n_fine x n_noise) or empty.
PropagationRecord propagate_hamiltonian(const HamiltonianSpec &spec, const PulseMatrix &u,
                                        const RMatrix *noise, bool with_gradients,
                                        ExpMethod method) {
  check_controls(spec, u);
  const Eigen::Index sub = noise ? noise->rows() / u.n_steps() : 1;
  if (noise) {
    if (noise->rows() % u.n_steps() != 0 || noise->rows() == 0)
      throw InvalidArgument("solver: noise trace has " + std::to_string(noise->rows()) +
                            " steps, not a multiple of the " +
                            std::to_string(u.n_steps()) + " control steps");
    if (noise->cols() != Eigen::Index(spec.noise.size()))
      throw InvalidArgument("solver: noise trace has " + std::to_string(noise->cols()) +
                            " channels for " + std::to_string(spec.noise.size()) +
                            " noise operators");
  }
  const Grid grid = make_grid(u, sub);
  const auto n_fine = grid.dt.size();
  const auto n_ctrl = spec.controls.size();

  PropagationRecord rec;
  rec.kind = PropagationRecord::Kind::closed;
  rec.dt = grid.dt;
  rec.control_step = grid.control_step;
  rec.n_control_steps = u.n_steps();
  rec.steps.resize(std::size_t(n_fine));
  rec.generators.resize(std::size_t(n_fine));
  if (with_gradients) rec.derivatives.assign(std::size_t(n_fine), std::vector<CMatrix>(n_ctrl));

  for (Eigen::Index j = 0; j < n_fine; ++j) {
    const Eigen::Index l = grid.control_step[std::size_t(j)];
    const RVector u_row = u.values().row(l).transpose();
    const double t = grid.control_start[l];
    CMatrix h = control_hamiltonian(spec, u_row, l);
    if (noise) {
      for (std::size_t a = 0; a < spec.noise.size(); ++a) {
        const double b = (*noise)(j, Eigen::Index(a));
        h += b * spec.noise[a].susceptibility(u_row, t) * spec.noise[a].op.data();
      }
    }
    const double dt = grid.dt[j];
    if (with_gradients) {
      const CMatrix scaled = -1.0i * dt * h;
      for (std::size_t k = 0; k < n_ctrl; ++k) {
        CMatrix dir = spec.controls[k].data();
        if (noise) {
          for (std::size_t a = 0; a < spec.noise.size(); ++a) {
            const auto &term = spec.noise[a];
            if (!term.susceptibility.depends_on_controls()) continue;
            const double b = (*noise)(j, Eigen::Index(a));
            dir += b * term.susceptibility.grad(u_row, t)[Eigen::Index(k)] * term.op.data();
          }
        }
        auto [step, deriv] = expm_frechet(scaled, -1.0i * dt * dir);
        if (k == 0) rec.steps[std::size_t(j)] = std::move(step);
        rec.derivatives[std::size_t(j)][k] = std::move(deriv);
      }
      if (n_ctrl == 0) rec.steps[std::size_t(j)] = expm(scaled);
    } else if (method == ExpMethod::spectral) {
      rec.steps[std::size_t(j)] = expm_hermitian(h, -1.0i * dt);
    } else {
      rec.steps[std::size_t(j)] = expm(-1.0i * dt * h);
    }
    rec.generators[std::size_t(j)] = std::move(h);
  }
  fill_cumulants(rec);
  return rec;
}

CMatrix dissipator(const CMatrix &l) {
  const auto d = l.rows();
  const CMatrix ident = CMatrix::Identity(d, d);
  const CMatrix ldl = l.adjoint() * l;
  return kron(CMatrix(l.conjugate()), l) - 0.5 * kron(ident, ldl) -
         0.5 * kron(CMatrix(l.transpose() * l.conjugate()), ident);
}

CMatrix commutator_superop(const CMatrix &h) {
  const auto d = h.rows();
  const CMatrix ident = CMatrix::Identity(d, d);
  return kron(ident, h) - kron(CMatrix(h.transpose()), ident);
}

void check_lindblad(const HamiltonianSpec &spec, const LindbladSpec &lind) {
  if (lind.operators.size() != lind.rates.size())
    throw InvalidArgument("lindblad: " + std::to_string(lind.operators.size()) +
                          " operators for " + std::to_string(lind.rates.size()) + " rates");
  for (std::size_t n = 0; n < lind.operators.size(); ++n)
    if (lind.operators[n].dim() != spec.dim())
      throw InvalidArgument("lindblad: operator " + std::to_string(n) +
                            " has dimension " + std::to_string(lind.operators[n].dim()));
}

double checked_rate(const LindbladRate &rate, const RVector &u_row, std::size_t n) {
  const double g = rate(u_row);
  if (!(g >= 0.0) || !std::isfinite(g))
    throw InvalidArgument("lindblad: rate " + std::to_string(n) + " is negative or non-finite");
  return g;
}

}  // namespace

std::size_t HamiltonianSpec::dim() const {
  if (!controls.empty()) return controls.front().dim();
  if (!drift.empty()) return drift.front().dim();
  if (!noise.empty()) return noise.front().op.dim();
  return 0;
}

void HamiltonianSpec::validate(Eigen::Index n_t) const {
  const std::size_t d = dim();
  if (d == 0) throw InvalidArgument("HamiltonianSpec: no operators");
  auto check = [d](const Operator &op, const std::string &name) {
    if (op.dim() != d)
      throw InvalidArgument("HamiltonianSpec: " + name + " has dimension " +
                            std::to_string(op.dim()) + ", expected " + std::to_string(d));
    if (!op.is_hermitian(kDefaultOperatorTol * std::max(1.0, max_abs(op.data()))))
      throw InvalidArgument("HamiltonianSpec: " + name + " is not Hermitian");
  };
  for (std::size_t k = 0; k < controls.size(); ++k) check(controls[k], "control " + std::to_string(k));
  for (std::size_t k = 0; k < drift.size(); ++k) check(drift[k], "drift " + std::to_string(k));
  for (std::size_t k = 0; k < noise.size(); ++k) check(noise[k].op, "noise operator " + std::to_string(k));
  if (drift.size() > 1 && Eigen::Index(drift.size()) != n_t)
    throw InvalidArgument("HamiltonianSpec: drift list has " + std::to_string(drift.size()) +
                          " entries for " + std::to_string(n_t) + " steps");
}

Operator HamiltonianSpec::drift_at(Eigen::Index step) const {
  if (drift.empty()) return Operator::zero(dim());
  return drift.size() == 1 ? drift.front() : drift[std::size_t(step)];
}

CMatrix PropagationRecord::total_derivative(Eigen::Index l, Eigen::Index k) const {
  if (!has_derivatives()) throw InvalidArgument("PropagationRecord: no derivatives stored");
  const auto d = steps.front().rows();
  CMatrix out = CMatrix::Zero(d, d);
  for (std::size_t j = 0; j < steps.size(); ++j) {
    if (control_step[j] != l) continue;
    const CMatrix &dj = derivatives[j][std::size_t(k)];
    out += j == 0 ? CMatrix(reverse[j] * dj) : CMatrix(reverse[j] * dj * forward[j - 1]);
  }
  return out;
}

CMatrix PropagationRecord::trace_gradient(const CMatrix &m) const {
  if (!has_derivatives()) throw InvalidArgument("PropagationRecord: no derivatives stored");
  const Eigen::Index n_ctrl = n_controls();
  CMatrix g = CMatrix::Zero(n_control_steps, n_ctrl);
  for (std::size_t j = 0; j < steps.size(); ++j) {
    // tr(M R_j dU_j F_{j-1}) = sum((F_{j-1} M R_j)^T .* dU_j)
    const CMatrix a = j == 0 ? CMatrix(m * reverse[j]) : CMatrix(forward[j - 1] * m * reverse[j]);
    const CMatrix at = a.transpose();
    for (Eigen::Index k = 0; k < n_ctrl; ++k)
      g(control_step[j], k) += at.cwiseProduct(derivatives[j][std::size_t(k)]).sum();
  }
  return g;
}

PropagationRecord propagate_closed(const HamiltonianSpec &spec, const PulseMatrix &u,
                                   ExpMethod method) {
  return propagate_hamiltonian(spec, u, nullptr, false, method);
}

PropagationRecord propagate_closed_with_gradients(const HamiltonianSpec &spec,
                                                  const PulseMatrix &u) {
  return propagate_hamiltonian(spec, u, nullptr, true, ExpMethod::pade);
}

std::vector<PropagationRecord> propagate_monte_carlo(const HamiltonianSpec &spec,
                                                     const PulseMatrix &u,
                                                     const NoiseTraces &traces,
                                                     const MonteCarloOptions &opts) {
  if (traces.n_traces() == 0) throw InvalidArgument("propagate_monte_carlo: no traces");
  if (traces.weights.size() != Eigen::Index(traces.n_traces()))
    throw InvalidArgument("propagate_monte_carlo: weight count mismatch");
  std::vector<PropagationRecord> out(traces.n_traces());
  parallel_for(traces.n_traces(), opts.n_threads, [&](std::size_t i) {
    out[i] = propagate_hamiltonian(spec, u, &traces.traces[i], opts.with_gradients, opts.method);
    out[i].weight = traces.weights[Eigen::Index(i)];
  });
  return out;
}

Operator lindblad_superoperator(const HamiltonianSpec &spec, const LindbladSpec &lind,
                                const RVector &u_row, Eigen::Index step) {
  check_lindblad(spec, lind);
  if (u_row.size() != Eigen::Index(spec.controls.size()))
    throw InvalidArgument("lindblad_superoperator: control row width mismatch");
  const CMatrix h = control_hamiltonian(spec, u_row, step);
  CMatrix gen = -1.0i * commutator_superop(h);
  for (std::size_t n = 0; n < lind.operators.size(); ++n)
    gen += checked_rate(lind.rates[n], u_row, n) * dissipator(lind.operators[n].data());
  return Operator(std::move(gen));
}

PropagationRecord propagate_lindblad(const HamiltonianSpec &spec, const LindbladSpec &lind,
                                     const PulseMatrix &u, bool with_gradients) {
  check_controls(spec, u);
  check_lindblad(spec, lind);
  const Eigen::Index n = u.n_steps();
  const auto n_ctrl = spec.controls.size();

  std::vector<CMatrix> dissipators;
  for (const auto &l : lind.operators) dissipators.push_back(dissipator(l.data()));
  std::vector<CMatrix> control_superops;
  for (const auto &c : spec.controls) control_superops.push_back(-1.0i * commutator_superop(c.data()));

  PropagationRecord rec;
  rec.kind = PropagationRecord::Kind::open;
  rec.dt = u.dt();
  rec.n_control_steps = n;
  rec.control_step.resize(std::size_t(n));
  rec.steps.resize(std::size_t(n));
  rec.generators.resize(std::size_t(n));
  if (with_gradients) rec.derivatives.assign(std::size_t(n), std::vector<CMatrix>(n_ctrl));

  for (Eigen::Index l = 0; l < n; ++l) {
    rec.control_step[std::size_t(l)] = l;
    const RVector u_row = u.values().row(l).transpose();
    CMatrix gen = -1.0i * commutator_superop(control_hamiltonian(spec, u_row, l));
    for (std::size_t m = 0; m < dissipators.size(); ++m)
      gen += checked_rate(lind.rates[m], u_row, m) * dissipators[m];
    const double dt = u.dt()[l];
    if (with_gradients) {
      for (std::size_t k = 0; k < n_ctrl; ++k) {
        CMatrix dir = control_superops[k];
        for (std::size_t m = 0; m < dissipators.size(); ++m)
          dir += lind.rates[m].grad(u_row)[Eigen::Index(k)] * dissipators[m];
        auto [step, deriv] = expm_frechet(dt * gen, dt * dir);
        if (k == 0) rec.steps[std::size_t(l)] = std::move(step);
        rec.derivatives[std::size_t(l)][k] = std::move(deriv);
      }
      if (n_ctrl == 0) rec.steps[std::size_t(l)] = expm(dt * gen);
    } else {
      rec.steps[std::size_t(l)] = expm(dt * gen);
    }
    rec.generators[std::size_t(l)] = std::move(gen);
  }
  fill_cumulants(rec);
  return rec;
}

}  // namespace qoc
