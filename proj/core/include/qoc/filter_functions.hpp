#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/pulse.hpp"
#include "qoc/solvers.hpp"

namespace qoc {

/// Positive, ascending angular frequencies with trapezoid weights.
struct FrequencyGrid {
  RVector omega;
  RVector weights;

  static FrequencyGrid from_samples(RVector omega);
  /// n points log-spaced between omega_min and omega_max inclusive.
  static FrequencyGrid log_spaced(double omega_min, double omega_max, Eigen::Index n);
  /// 1/T_total .. 1/dt_min with n points.
  static FrequencyGrid default_for(const RVector &dt, Eigen::Index n = 200);
};

/// Noise spectral density. Filter-function integrals use the two-sided
/// S2(omega) over (-inf, inf) with <b^2> = int domega/2pi S2. A one-sided
/// S1(f) in ordinary frequency converts as S2(omega) = S1(omega / 2pi) / 2.
struct SpectralDensity {
  enum class Convention { one_sided_frequency, two_sided_angular };
  std::function<double(double)> fn;
  Convention convention = Convention::one_sided_frequency;

  [[nodiscard]] double two_sided(double omega) const;
};

/// Noise operator seen by the filter function, with a per-control-step
/// sensitivity (empty means 1 on every step).
struct FilterNoise {
  Operator op;
  RVector sensitivity;
};

/// Evaluates the noise couplings of `spec` at the control amplitudes u.
[[nodiscard]] std::vector<FilterNoise> filter_noise_from_spec(const HamiltonianSpec &spec,
                                                              const PulseMatrix &u);

struct FilterFunctionResult {
  RVector omega;
  /// (n_noise x n_omega), F >= 0.
  RMatrix values;
  /// Expansion basis, identity first; the identity component is dropped.
  std::vector<CMatrix> basis;
};

/// First-order filter function F_a(omega) = sum_b |R_ab(omega)|^2 with
/// R_ab(omega) = int dt e^{i omega t} tr(s_b Q(t)^dag B_a Q(t)) / d, where
/// s_b runs over the traceless generalized Pauli basis, tr(s_i s_j) = d delta.
/// Segment integrals are done in closed form in the eigenbasis of each
/// step's Hamiltonian. Then I_ff = int_{-inf}^{inf} domega/2pi S2(omega) F(omega)
/// approximates the entanglement infidelity to second order in the noise.
[[nodiscard]] FilterFunctionResult compute_filter_function(const PropagationRecord &record,
                                                           const std::vector<FilterNoise> &noise,
                                                           const FrequencyGrid &grid);

/// Sum over channels of the filter-function infidelity; spectra has one
/// entry (shared) or one per noise channel.
[[nodiscard]] double infidelity_from_spectrum(const FilterFunctionResult &ff,
                                              const std::vector<SpectralDensity> &spectra,
                                              const FrequencyGrid &grid);
[[nodiscard]] double infidelity_from_spectrum(const FilterFunctionResult &ff,
                                              const SpectralDensity &spectrum,
                                              const FrequencyGrid &grid);

/// End-to-end filter-function infidelity as a function of the control
/// amplitudes u.
struct FilterFunctionInfidelity {
  HamiltonianSpec spec;
  /// Empty: use the noise terms of spec.
  std::vector<FilterNoise> noise;
  std::vector<SpectralDensity> spectra;
  /// Empty omega: default grid from the pulse time steps.
  FrequencyGrid grid;

  [[nodiscard]] FrequencyGrid grid_for(const PulseMatrix &u) const;
  [[nodiscard]] FilterFunctionResult filter_function(const PulseMatrix &u) const;
  [[nodiscard]] double operator()(const PulseMatrix &u) const;
};

/// Central differences of cost(pipeline(raw)) with respect to the raw
/// parameters; step h = rel_step * max(1, |v|).
[[nodiscard]] RMatrix infidelity_gradient_fd(const ControlPipeline &pipeline,
                                             const std::function<double(const PulseMatrix &u)> &cost,
                                             const PulseMatrix &raw, double rel_step = 1e-6);

/// CSV with columns omega, F_0..F_{n-1}.
void write_filter_function_csv(std::ostream &out, const FilterFunctionResult &ff);

}  // namespace qoc
