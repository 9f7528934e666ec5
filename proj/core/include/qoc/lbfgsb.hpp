#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

enum class Termination {
  gradient_tolerance,
  function_tolerance,
  max_iterations,
  wall_clock,
  line_search_failure,
  error,
};

[[nodiscard]] const char *to_string(Termination t);
[[nodiscard]] Termination termination_from_string(const std::string &s);

struct BoxMinimizerOptions {
  /// Stop when the infinity norm of the projected gradient drops below this.
  double g_tol = 1e-8;
  /// Stop when (f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) <= f_tol.
  double f_tol = 1e-10;
  int max_iter = 500;
  double max_seconds = std::numeric_limits<double>::infinity();
  /// Number of stored correction pairs.
  int memory = 10;
  int max_line_search = 40;
};

/// f(x, want_gradient, gradient_out) -> value. gradient_out is only written
/// when want_gradient is set.
using BoxObjective = std::function<double(const RVector &x, bool want_gradient, RVector &grad)>;
/// Called once per iterate (including the starting point) with the iterate
/// index and the accepted point.
using IterateCallback = std::function<void(int iteration, const RVector &x, double f,
                                           const RVector &projected_gradient)>;

struct BoxMinimizerResult {
  RVector x;
  double f = 0.0;
  RVector gradient;
  int iterations = 0;
  int evaluations = 0;
  Termination reason = Termination::max_iterations;
};

/// Limited-memory quasi-Newton minimization on the box lower <= x <= upper.
/// Variables at a bound whose gradient points outward form the active set and
/// are frozen for the step; the L-BFGS direction acts on the free variables
/// and a backtracking Armijo search runs along the projected path. Every
/// iterate lies inside the box.
[[nodiscard]] BoxMinimizerResult minimize_box(const BoxObjective &f, RVector x0,
                                              const RVector &lower, const RVector &upper,
                                              const BoxMinimizerOptions &opts = {},
                                              const IterateCallback &callback = {});

/// Projected gradient: components at a bound pointing out of the box are zero.
[[nodiscard]] RVector projected_gradient(const RVector &x, const RVector &g, const RVector &lower,
                                         const RVector &upper);

/// Residual objective for the least-squares path: returns r(x) and, when
/// requested, its Jacobian (n_residuals x n).
using ResidualObjective = std::function<RVector(const RVector &x, bool want_jacobian, RMatrix &jac)>;

/// Bounded Levenberg-Marquardt on 0.5 |r(x)|^2 with step clipping to the box.
[[nodiscard]] BoxMinimizerResult minimize_least_squares(const ResidualObjective &r, RVector x0,
                                                        const RVector &lower, const RVector &upper,
                                                        const BoxMinimizerOptions &opts = {},
                                                        const IterateCallback &callback = {});

}  // namespace qoc
