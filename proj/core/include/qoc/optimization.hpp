#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qoc/costs.hpp"
#include "qoc/lbfgsb.hpp"
#include "qoc/pulse.hpp"

namespace qoc {

/// Wall-clock accounting of one optimization run.
struct RuntimeStats {
  /// Seconds spent per cost function (values and analytic gradients).
  std::vector<double> cost_seconds;
  /// Seconds spent on gradients, including finite-difference fallbacks.
  double gradient_seconds = 0.0;
  double pipeline_seconds = 0.0;
  double total_seconds = 0.0;
  std::size_t evaluations = 0;
  std::size_t gradient_evaluations = 0;
};

/// Runs transfer -> amplitude -> solvers -> costs and aggregates the cost
/// vector and its gradient with respect to the raw parameters.
class Simulator {
 public:
  struct Evaluation {
    RVector costs;
    /// One (n_t x n_ch) matrix per cost entry in raw-parameter space.
    std::vector<RMatrix> gradients;
  };

  Simulator(ControlPipeline pipeline, std::vector<std::shared_ptr<const CostFunction>> costs,
            std::vector<double> weights = {});

  [[nodiscard]] Evaluation evaluate(const PulseMatrix &raw, bool with_gradient,
                                    RuntimeStats *stats = nullptr) const;

  [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
  [[nodiscard]] std::size_t n_entries() const noexcept { return labels_.size(); }
  [[nodiscard]] const RVector &weights() const noexcept { return weights_; }
  [[nodiscard]] const ControlPipeline &pipeline() const noexcept { return pipeline_; }
  [[nodiscard]] const std::vector<std::shared_ptr<const CostFunction>> &costs() const noexcept {
    return costs_;
  }

  double fd_rel_step = 1e-6;

 private:
  ControlPipeline pipeline_;
  std::vector<std::shared_ptr<const CostFunction>> costs_;
  std::vector<std::string> labels_;
  RVector weights_;
};

/// Final state of one optimization run.
struct OptimResult {
  std::vector<std::string> labels;
  RMatrix initial_parameters;
  RMatrix final_parameters;
  RVector dt;
  /// Transferred pulse at the final parameters (what the hardware emits).
  PulseMatrix final_pulse;
  RVector final_costs;
  double final_scalar = 0.0;
  /// Cost vector at every accepted iterate, starting with the initial point.
  std::vector<RVector> cost_history;
  std::vector<double> gradient_norms;
  int iterations = 0;
  Termination reason = Termination::max_iterations;
  std::string message;
  std::uint64_t seed = 0;
  RuntimeStats stats;

  /// Equality of everything except timing.
  [[nodiscard]] bool same_outcome(const OptimResult &other) const;
};

struct OptimizerOptions {
  BoxMinimizerOptions minimizer;
  /// Gauss-Newton path on the cost vector as residuals.
  bool least_squares = false;
};

class Optimizer {
 public:
  /// Bounds are per raw parameter, shape (n_t x n_ch).
  Optimizer(std::shared_ptr<const Simulator> sim, RMatrix lower, RMatrix upper,
            OptimizerOptions opts = {});
  /// Same bounds for every parameter.
  Optimizer(std::shared_ptr<const Simulator> sim, double lower, double upper,
            OptimizerOptions opts = {});

  [[nodiscard]] OptimResult run_optimization(const RMatrix &initial, std::uint64_t seed = 0) const;

  [[nodiscard]] const Simulator &simulator() const noexcept { return *sim_; }
  [[nodiscard]] const RMatrix &lower() const noexcept { return lower_; }
  [[nodiscard]] const RMatrix &upper() const noexcept { return upper_; }
  [[nodiscard]] const OptimizerOptions &options() const noexcept { return opts_; }

 private:
  std::shared_ptr<const Simulator> sim_;
  RMatrix lower_;
  RMatrix upper_;
  OptimizerOptions opts_;
};

/// Append-only collection of results.
class DataContainer {
 public:
  void append(OptimResult r) { results_.push_back(std::move(r)); }
  [[nodiscard]] const std::vector<OptimResult> &results() const noexcept { return results_; }
  [[nodiscard]] std::size_t size() const noexcept { return results_.size(); }
  [[nodiscard]] bool empty() const noexcept { return results_.empty(); }
  /// Index of the result with the lowest final scalar cost.
  [[nodiscard]] std::size_t best_index() const;

  std::string config_hash;

 private:
  std::vector<OptimResult> results_;
};

/// Uniform random initial parameters in [low, high).
[[nodiscard]] RMatrix random_initial(Eigen::Index n_t, Eigen::Index n_ch, double low,
                                     double high, std::uint64_t seed);

struct MultiStartOptions {
  double initial_low = 0.0;
  double initial_high = 1.0;
  unsigned n_threads = 1;
};

/// Start i draws its initial pulse from derive_seed(seed, i). Results come
/// back in start order whatever the thread count; a failing start is
/// recorded with Termination::error.
[[nodiscard]] DataContainer run_multi_start(const Optimizer &opt, std::size_t n_starts,
                                            std::uint64_t seed, const MultiStartOptions &ms = {});

struct Table {
  std::vector<std::string> header;
  RMatrix rows;
};

struct Analysis {
  /// Per result: iteration, then one column per cost label.
  std::vector<Table> cost_tables;
  /// Per result: t_start, dt, then one column per control channel.
  std::vector<Table> pulse_tables;
};

[[nodiscard]] Analysis analyse(const DataContainer &dc);

void write_table_csv(std::ostream &out, const Table &t);

}  // namespace qoc
