#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qoc/filter_functions.hpp"
#include "qoc/linalg.hpp"
#include "qoc/noise.hpp"
#include "qoc/pulse.hpp"
#include "qoc/solvers.hpp"

namespace qoc {

/// [tr sqrt(sqrt(rho1) rho2 sqrt(rho1))]^2 for density matrices.
[[nodiscard]] double state_fidelity(const Operator &rho1, const Operator &rho2);

/// 1 - |tr(V^dag U)|^2 / d^2.
[[nodiscard]] double entanglement_infidelity(const Operator &u, const Operator &v);
[[nodiscard]] double entanglement_infidelity(const CMatrix &u, const CMatrix &v);

/// (1/d^2) Re tr((V^T kron V^dag) U_s) for a column-stacking superoperator.
[[nodiscard]] double open_system_fidelity(const Operator &v, const Operator &process);

/// 1 - tr(U_c^dag U_c) / d_c with U_c the block of U on comp_indices.
[[nodiscard]] double leakage_error(const Operator &u_full,
                                   const std::vector<Eigen::Index> &comp_indices);

/// Weighted mean of the entanglement infidelity of each record's total
/// propagator against `target`, or against `noiseless` when
/// neglect_systematic is set.
[[nodiscard]] double noise_average_infidelity(const std::vector<PropagationRecord> &records,
                                              const Operator &target, bool neglect_systematic,
                                              const CMatrix *noiseless = nullptr);

/// Values and optional gradients with respect to the control amplitudes u.
struct CostOutput {
  std::vector<double> values;
  /// One (n_t x n_ctrl) matrix per entry, or empty.
  std::vector<RMatrix> grad_u;
};

class CostFunction {
 public:
  virtual ~CostFunction() = default;

  [[nodiscard]] virtual std::vector<std::string> labels() const = 0;
  /// False: the simulator takes central differences through the pipeline.
  [[nodiscard]] virtual bool analytic_gradient() const { return true; }
  [[nodiscard]] virtual CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const = 0;
};

/// Systematic gate error of the noiseless evolution.
class OperationInfidelity final : public CostFunction {
 public:
  OperationInfidelity(HamiltonianSpec spec, Operator target, std::string label = "I_e");
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;

 private:
  HamiltonianSpec spec_;
  Operator target_;
  std::string label_;
};

/// Entanglement infidelity averaged over sampled noise traces. The trace set
/// is fixed at construction so the cost is a deterministic function of u.
class OperationNoiseInfidelity final : public CostFunction {
 public:
  OperationNoiseInfidelity(HamiltonianSpec spec, Operator target,
                           std::shared_ptr<const NoiseTraces> traces,
                           bool neglect_systematic = true, std::string label = "I_noise",
                           unsigned n_threads = 1);
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;

 private:
  HamiltonianSpec spec_;
  Operator target_;
  std::shared_ptr<const NoiseTraces> traces_;
  bool neglect_systematic_;
  std::string label_;
  unsigned n_threads_;
};

/// 1 - F_o of the Lindblad process against a unitary target.
class OpenSystemInfidelity final : public CostFunction {
 public:
  OpenSystemInfidelity(HamiltonianSpec spec, LindbladSpec lindblad, Operator target,
                       std::string label = "I_o");
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;

 private:
  HamiltonianSpec spec_;
  LindbladSpec lindblad_;
  Operator target_;
  std::string label_;
};

class LeakageCost final : public CostFunction {
 public:
  LeakageCost(HamiltonianSpec spec, std::vector<Eigen::Index> comp_indices,
              std::string label = "L");
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;

 private:
  HamiltonianSpec spec_;
  std::vector<Eigen::Index> comp_;
  std::string label_;
};

/// 1 - |<target|U|initial>|^2 for pure states.
class StateInfidelity final : public CostFunction {
 public:
  StateInfidelity(HamiltonianSpec spec, CVector initial, CVector target,
                  std::string label = "I_st");
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;

 private:
  HamiltonianSpec spec_;
  CVector initial_;
  CVector target_;
  std::string label_;
};

/// Filter-function noise infidelity; gradients come from finite differences.
class FilterFunctionCost final : public CostFunction {
 public:
  explicit FilterFunctionCost(FilterFunctionInfidelity ff, std::string label = "I_ff");
  std::vector<std::string> labels() const override { return {label_}; }
  bool analytic_gradient() const override { return false; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override;
  [[nodiscard]] const FilterFunctionInfidelity &model() const noexcept { return ff_; }

 private:
  FilterFunctionInfidelity ff_;
  std::string label_;
};

/// Central-difference gradients of every entry of `cost` with respect to u.
[[nodiscard]] std::vector<RMatrix> cost_gradient_fd(const CostFunction &cost, const PulseMatrix &u,
                                                    double rel_step = 1e-6);

}  // namespace qoc
