#pragma once

#include <functional>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/noise.hpp"
#include "qoc/pulse.hpp"

namespace qoc {

/// Coupling s(u, t) of a noise source, possibly depending on the control
/// amplitudes of the current step. Empty callables mean s = 1, ds/du = 0.
struct Susceptibility {
  using Value = std::function<double(const RVector &u, double t)>;
  using Gradient = std::function<RVector(const RVector &u, double t)>;
  Value value;
  Gradient gradient;

  [[nodiscard]] double operator()(const RVector &u, double t) const {
    return value ? value(u, t) : 1.0;
  }
  [[nodiscard]] RVector grad(const RVector &u, double t) const {
    return gradient ? gradient(u, t) : RVector::Zero(u.size());
  }
  [[nodiscard]] bool depends_on_controls() const { return bool(gradient); }
};

struct NoiseTerm {
  Operator op;
  Susceptibility susceptibility;
};

/// H(t_l) = sum_k u_k(t_l) C_k + H_d(t_l) + sum_a b_a(t_l) s_a(u, t_l) B_a.
struct HamiltonianSpec {
  std::vector<Operator> controls;
  /// One entry (broadcast to all steps) or one per control step.
  std::vector<Operator> drift;
  std::vector<NoiseTerm> noise;

  [[nodiscard]] std::size_t dim() const;
  /// Throws InvalidArgument on inconsistent dimensions, non-Hermitian
  /// operators, or a drift list that is neither length 1 nor n_t.
  void validate(Eigen::Index n_t) const;
  [[nodiscard]] Operator drift_at(Eigen::Index step) const;
};

/// Decay rate gamma(u) >= 0, optionally control dependent.
struct LindbladRate {
  double constant = 0.0;
  std::function<double(const RVector &u)> value;
  std::function<RVector(const RVector &u)> gradient;

  [[nodiscard]] double operator()(const RVector &u) const { return value ? value(u) : constant; }
  [[nodiscard]] RVector grad(const RVector &u) const {
    return gradient ? gradient(u) : RVector::Zero(u.size());
  }
};

struct LindbladSpec {
  std::vector<Operator> operators;
  std::vector<LindbladRate> rates;
};

/// Per-step propagators of one piecewise-constant evolution. Steps index the
/// propagation grid, which may be finer than the control grid; control_step
/// maps each propagation step to the control row it belongs to.
struct PropagationRecord {
  enum class Kind { closed, open };

  Kind kind = Kind::closed;
  std::vector<CMatrix> steps;
  /// H_l for closed systems, the superoperator generator for open ones.
  std::vector<CMatrix> generators;
  RVector dt;
  std::vector<Eigen::Index> control_step;
  /// forward[j] = U_j ... U_0.
  std::vector<CMatrix> forward;
  /// reverse[j] = U_{n-1} ... U_{j+1}; reverse[n-1] = I.
  std::vector<CMatrix> reverse;
  /// derivatives[j][k] = dU_j / du_k of the owning control step.
  std::vector<std::vector<CMatrix>> derivatives;
  Eigen::Index n_control_steps = 0;
  double weight = 1.0;

  [[nodiscard]] const CMatrix &total() const { return forward.back(); }
  [[nodiscard]] bool has_derivatives() const { return !derivatives.empty(); }
  [[nodiscard]] Eigen::Index n_controls() const {
    return derivatives.empty() ? 0 : Eigen::Index(derivatives.front().size());
  }
  /// d(total)/du(l, k) assembled from the cumulants.
  [[nodiscard]] CMatrix total_derivative(Eigen::Index l, Eigen::Index k) const;
  /// G(l, k) = tr(M d(total)/du(l, k)) for every control entry.
  [[nodiscard]] CMatrix trace_gradient(const CMatrix &m) const;
};

[[nodiscard]] PropagationRecord propagate_closed(const HamiltonianSpec &spec,
                                                 const PulseMatrix &u,
                                                 ExpMethod method = ExpMethod::pade);

/// As propagate_closed, plus dU_l/du_k from Frechet derivatives in
/// direction C_k (and the ds/du terms of noise couplings, zero here).
[[nodiscard]] PropagationRecord propagate_closed_with_gradients(const HamiltonianSpec &spec,
                                                                const PulseMatrix &u);

struct MonteCarloOptions {
  bool with_gradients = false;
  ExpMethod method = ExpMethod::pade;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned n_threads = 1;
};

/// One record per noise trace, in trace order, each carrying its weight.
/// Traces with a multiple m of the control steps propagate on m sub-steps
/// per control step with the control held constant.
[[nodiscard]] std::vector<PropagationRecord>
propagate_monte_carlo(const HamiltonianSpec &spec, const PulseMatrix &u,
                      const NoiseTraces &traces, const MonteCarloOptions &opts = {});

/// -i(I kron H - H^T kron I) + sum_n gamma_n D(L_n) for control row u_row.
[[nodiscard]] Operator lindblad_superoperator(const HamiltonianSpec &spec,
                                              const LindbladSpec &lind,
                                              const RVector &u_row,
                                              Eigen::Index step = 0);

/// Superoperator-valued record acting on column-stacked density matrices.
[[nodiscard]] PropagationRecord propagate_lindblad(const HamiltonianSpec &spec,
                                                   const LindbladSpec &lind,
                                                   const PulseMatrix &u,
                                                   bool with_gradients = false);

}  // namespace qoc
