#include "qoc/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

using Clock = std::chrono::steady_clock;

RVector project(const RVector &x, const RVector &lower, const RVector &upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

struct Correction {
  RVector s;
  RVector y;
  double rho;
};

// Two-loop recursion restricted to the free variables (mask = 1 free, 0 active).
RVector lbfgs_direction(const RVector &g, const RVector &mask, const std::deque<Correction> &mem) {
  RVector q = g.cwiseProduct(mask);
  if (mem.empty()) return -q;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * mem[i].s.cwiseProduct(mask).dot(q);
    q -= alpha[i] * mem[i].y.cwiseProduct(mask);
  }
  const Correction &last = mem.back();
  const double gamma = last.s.dot(last.y) / last.y.squaredNorm();
  RVector r = gamma * q;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.cwiseProduct(mask).dot(r);
    r += mem[i].s.cwiseProduct(mask) * (alpha[i] - beta);
  }
  return -r.cwiseProduct(mask);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_box(const RVector &x0, const RVector &lower, const RVector &upper) {
  if (x0.size() != lower.size() || x0.size() != upper.size())
    throw InvalidArgument("minimize: bounds do not match the parameter count");
  if ((lower.array() > upper.array()).any())
    throw InvalidArgument("minimize: lower bound above upper bound");
}

}  // namespace

const char *to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance: return "gradient_tolerance";
    case Termination::function_tolerance: return "function_tolerance";
    case Termination::max_iterations: return "max_iterations";
    case Termination::wall_clock: return "wall_clock";
    case Termination::line_search_failure: return "line_search_failure";
    case Termination::error: return "error";
  }
  return "unknown";
}

Termination termination_from_string(const std::string &s) {
  for (auto t : {Termination::gradient_tolerance, Termination::function_tolerance,
                 Termination::max_iterations, Termination::wall_clock,
                 Termination::line_search_failure, Termination::error})
    if (s == to_string(t)) return t;
  throw InvalidArgument("unknown termination reason '" + s + "'");
}

RVector projected_gradient(const RVector &x, const RVector &g, const RVector &lower,
                           const RVector &upper) {
  RVector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) pg[i] = 0.0;
  return pg;
}

BoxMinimizerResult minimize_box(const BoxObjective &f, RVector x0, const RVector &lower,
                                const RVector &upper, const BoxMinimizerOptions &opts,
                                const IterateCallback &callback) {
  check_box(x0, lower, upper);
  const auto t0 = Clock::now();
  BoxMinimizerResult res;
  res.x = project(x0, lower, upper);
  res.gradient.resize(res.x.size());
  res.f = f(res.x, true, res.gradient);
  ++res.evaluations;
  if (!std::isfinite(res.f) || !res.gradient.allFinite())
    throw NumericalError("minimize: non-finite cost or gradient at the initial point");

  std::deque<Correction> memory;
  RVector pg = projected_gradient(res.x, res.gradient, lower, upper);
  if (callback) callback(0, res.x, res.f, pg);

  for (int iter = 1;; ++iter) {
    if (pg.lpNorm<Eigen::Infinity>() < opts.g_tol) {
      res.reason = Termination::gradient_tolerance;
      break;
    }
    if (iter > opts.max_iter) {
      res.reason = Termination::max_iterations;
      break;
    }
    if (seconds_since(t0) > opts.max_seconds) {
      res.reason = Termination::wall_clock;
      break;
    }

    RVector mask = RVector::Ones(res.x.size());
    for (Eigen::Index i = 0; i < res.x.size(); ++i)
      if (pg[i] == 0.0 && res.gradient[i] != 0.0) mask[i] = 0.0;

    bool accepted = false;
    RVector x_new, g_new(res.x.size());
    double f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      RVector d = lbfgs_direction(res.gradient, mask, memory);
      if (res.gradient.dot(d) >= 0.0) {
        memory.clear();
        d = -res.gradient.cwiseProduct(mask);
      }
      double alpha = memory.empty() ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;
      for (int ls = 0; ls < opts.max_line_search; ++ls) {
        x_new = project(res.x + alpha * d, lower, upper);
        const RVector step = x_new - res.x;
        const double decrease = res.gradient.dot(step);
        if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
        RVector unused;
        f_new = f(x_new, false, unused);
        ++res.evaluations;
        if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * decrease) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (memory.empty()) break;
        memory.clear();
      }
    }
    if (!accepted) {
      res.reason = Termination::line_search_failure;
      break;
    }

    f_new = f(x_new, true, g_new);
    ++res.evaluations;
    if (!std::isfinite(f_new) || !g_new.allFinite())
      throw NumericalError("minimize: non-finite cost or gradient during the iteration");

    const RVector s = x_new - res.x;
    const RVector y = g_new - res.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      memory.push_back({s, y, 1.0 / sy});
      if (int(memory.size()) > opts.memory) memory.pop_front();
    }

    const double f_old = res.f;
    res.x = std::move(x_new);
    res.f = f_new;
    res.gradient = g_new;
    res.iterations = iter;
    pg = projected_gradient(res.x, res.gradient, lower, upper);
    if (callback) callback(iter, res.x, res.f, pg);

    const double rel = (f_old - res.f) / std::max({std::abs(f_old), std::abs(res.f), 1.0});
    if (rel <= opts.f_tol) {
      res.reason = pg.lpNorm<Eigen::Infinity>() < opts.g_tol ? Termination::gradient_tolerance
                                                             : Termination::function_tolerance;
      break;
    }
  }
  return res;
}

BoxMinimizerResult minimize_least_squares(const ResidualObjective &r, RVector x0,
                                          const RVector &lower, const RVector &upper,
                                          const BoxMinimizerOptions &opts,
                                          const IterateCallback &callback) {
  check_box(x0, lower, upper);
  const auto t0 = Clock::now();
  BoxMinimizerResult res;
  res.x = project(x0, lower, upper);
  RMatrix jac;
  RVector resid = r(res.x, true, jac);
  ++res.evaluations;
  if (!resid.allFinite() || !jac.allFinite())
    throw NumericalError("least squares: non-finite residuals at the initial point");
  res.f = 0.5 * resid.squaredNorm();
  res.gradient = jac.transpose() * resid;
  RVector pg = projected_gradient(res.x, res.gradient, lower, upper);
  if (callback) callback(0, res.x, res.f, pg);

  double lambda = 1e-3;
  for (int iter = 1;; ++iter) {
    if (pg.lpNorm<Eigen::Infinity>() < opts.g_tol) {
      res.reason = Termination::gradient_tolerance;
      break;
    }
    if (iter > opts.max_iter) {
      res.reason = Termination::max_iterations;
      break;
    }
    if (seconds_since(t0) > opts.max_seconds) {
      res.reason = Termination::wall_clock;
      break;
    }
    const RMatrix jtj = jac.transpose() * jac;
    bool accepted = false;
    RVector x_new, r_new;
    RMatrix jac_new;
    for (int tries = 0; tries < opts.max_line_search; ++tries) {
      RMatrix lhs = jtj;
      lhs.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
      const RVector delta = lhs.ldlt().solve(-res.gradient);
      x_new = project(res.x + delta, lower, upper);
      RMatrix unused;
      r_new = r(x_new, false, unused);
      ++res.evaluations;
      if (r_new.allFinite() && 0.5 * r_new.squaredNorm() < res.f) {
        accepted = true;
        lambda = std::max(lambda / 3.0, 1e-12);
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      res.reason = Termination::line_search_failure;
      break;
    }
    r_new = r(x_new, true, jac_new);
    ++res.evaluations;
    const double f_old = res.f;
    res.x = std::move(x_new);
    resid = std::move(r_new);
    jac = std::move(jac_new);
    res.f = 0.5 * resid.squaredNorm();
    res.gradient = jac.transpose() * resid;
    res.iterations = iter;
    pg = projected_gradient(res.x, res.gradient, lower, upper);
    if (callback) callback(iter, res.x, res.f, pg);
    const double rel = (f_old - res.f) / std::max({std::abs(f_old), std::abs(res.f), 1.0});
    if (rel <= opts.f_tol) {
      res.reason = Termination::function_tolerance;
      break;
    }
  }
  return res;
}

}  // namespace qoc
