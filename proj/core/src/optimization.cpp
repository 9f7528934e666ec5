#include "qoc/optimization.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <iomanip>

#include "qoc/errors.hpp"
#include "qoc/noise.hpp"
#include "qoc/parallel.hpp"

namespace qoc {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
auto stage(const std::string &name, Fn &&fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError &) {
    throw;
  } catch (const std::exception &e) {
    throw PipelineError(name, e.what());
  }
}

bool same_matrix(const RMatrix &a, const RMatrix &b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

Simulator::Simulator(ControlPipeline pipeline,
                     std::vector<std::shared_ptr<const CostFunction>> costs,
                     std::vector<double> weights)
    : pipeline_(std::move(pipeline)), costs_(std::move(costs)) {
  if (costs_.empty()) throw InvalidArgument("Simulator: no cost functions");
  for (const auto &c : costs_) {
    if (!c) throw InvalidArgument("Simulator: null cost function");
    for (auto &l : c->labels()) labels_.push_back(l);
  }
  if (weights.empty()) weights.assign(labels_.size(), 1.0);
  if (weights.size() != labels_.size())
    throw InvalidArgument("Simulator: " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(labels_.size()) + " cost entries");
  weights_ = Eigen::Map<const RVector>(weights.data(), Eigen::Index(weights.size()));
}

Simulator::Evaluation Simulator::evaluate(const PulseMatrix &raw, bool with_gradient,
                                          RuntimeStats *stats) const {
  const auto t_start = Clock::now();
  auto fwd = stage("transfer", [&] { return apply_transfer(pipeline_.transfer(), raw); });
  auto u = stage("amplitude", [&] { return apply_amplitude(pipeline_.amplitude(), fwd); });
  if (stats) {
    stats->pipeline_seconds += since(t_start);
    if (stats->cost_seconds.size() != costs_.size()) stats->cost_seconds.assign(costs_.size(), 0.0);
    ++stats->evaluations;
    if (with_gradient) ++stats->gradient_evaluations;
  }

  Evaluation ev;
  ev.costs.resize(Eigen::Index(labels_.size()));
  Eigen::Index entry = 0;
  for (std::size_t ci = 0; ci < costs_.size(); ++ci) {
    const CostFunction &cost = *costs_[ci];
    const std::string where = "cost:" + cost.labels().front();
    const bool analytic = with_gradient && cost.analytic_gradient();
    const auto t_cost = Clock::now();
    CostOutput out = stage(where, [&] { return cost.evaluate(u, analytic); });
    const double cost_time = since(t_cost);
    if (stats) {
      stats->cost_seconds[ci] += cost_time;
      if (analytic) stats->gradient_seconds += cost_time;
    }
    const std::size_t n = out.values.size();
    for (std::size_t e = 0; e < n; ++e) ev.costs[entry + Eigen::Index(e)] = out.values[e];

    if (with_gradient) {
      if (analytic) {
        for (auto &g : out.grad_u)
          ev.gradients.push_back(stage("gradient", [&] { return pipeline_.backward(fwd, g); }));
      } else {
        const auto t_fd = Clock::now();
        std::vector<RMatrix> grads(n, RMatrix::Zero(raw.n_steps(), raw.n_channels()));
        for (Eigen::Index c = 0; c < raw.n_channels(); ++c)
          for (Eigen::Index l = 0; l < raw.n_steps(); ++l) {
            const double h = fd_rel_step * std::max(1.0, std::abs(raw.values()(l, c)));
            RMatrix plus = raw.values(), minus = raw.values();
            plus(l, c) += h;
            minus(l, c) -= h;
            const auto fp = stage(where, [&] {
              return cost.evaluate(pipeline_.forward(PulseMatrix(plus, raw.dt())).amplitudes, false);
            });
            const auto fm = stage(where, [&] {
              return cost.evaluate(pipeline_.forward(PulseMatrix(minus, raw.dt())).amplitudes, false);
            });
            for (std::size_t e = 0; e < n; ++e) {
              if (!std::isfinite(fp.values[e]) || !std::isfinite(fm.values[e]))
                throw PipelineError(where, "non-finite cost at a finite-difference point");
              grads[e](l, c) = (fp.values[e] - fm.values[e]) / (2.0 * h);
            }
          }
        for (auto &g : grads) ev.gradients.push_back(std::move(g));
        if (stats) {
          const double fd_time = since(t_fd);
          stats->gradient_seconds += fd_time;
          stats->cost_seconds[ci] += fd_time;
        }
      }
    }
    entry += Eigen::Index(n);
  }
  if (stats) stats->total_seconds += since(t_start);
  return ev;
}

bool OptimResult::same_outcome(const OptimResult &o) const {
  if (labels != o.labels || iterations != o.iterations || reason != o.reason ||
      message != o.message || seed != o.seed || final_scalar != o.final_scalar ||
      gradient_norms != o.gradient_norms || cost_history.size() != o.cost_history.size())
    return false;
  for (std::size_t i = 0; i < cost_history.size(); ++i)
    if (cost_history[i] != o.cost_history[i]) return false;
  return same_matrix(initial_parameters, o.initial_parameters) &&
         same_matrix(final_parameters, o.final_parameters) && dt == o.dt &&
         final_costs == o.final_costs &&
         same_matrix(final_pulse.values(), o.final_pulse.values());
}

Optimizer::Optimizer(std::shared_ptr<const Simulator> sim, RMatrix lower, RMatrix upper,
                     OptimizerOptions opts)
    : sim_(std::move(sim)), lower_(std::move(lower)), upper_(std::move(upper)),
      opts_(opts) {
  if (!sim_) throw InvalidArgument("Optimizer: no simulator");
  const auto n_t = sim_->pipeline().raw_steps();
  const auto n_ch = sim_->pipeline().raw_channels();
  if (lower_.rows() != n_t || lower_.cols() != n_ch || upper_.rows() != n_t ||
      upper_.cols() != n_ch)
    throw InvalidArgument("Optimizer: bounds must have the raw parameter shape");
  if ((lower_.array() > upper_.array()).any())
    throw InvalidArgument("Optimizer: lower bound above upper bound");
}

Optimizer::Optimizer(std::shared_ptr<const Simulator> sim, double lower, double upper,
                     OptimizerOptions opts)
    : Optimizer(sim,
                RMatrix::Constant(sim ? sim->pipeline().raw_steps() : 0,
                                  sim ? sim->pipeline().raw_channels() : 0, lower),
                RMatrix::Constant(sim ? sim->pipeline().raw_steps() : 0,
                                  sim ? sim->pipeline().raw_channels() : 0, upper),
                opts) {}

OptimResult Optimizer::run_optimization(const RMatrix &initial, std::uint64_t seed) const {
  const auto t0 = Clock::now();
  const Simulator &sim = *sim_;
  const auto n_t = sim.pipeline().raw_steps();
  const auto n_ch = sim.pipeline().raw_channels();
  if (initial.rows() != n_t || initial.cols() != n_ch)
    throw InvalidArgument("run_optimization: initial parameters must be " +
                          std::to_string(n_t) + "x" + std::to_string(n_ch));
  const RVector dt = sim.pipeline().transfer().input_dt();

  OptimResult res;
  res.labels = sim.labels();
  res.initial_parameters = initial;
  res.dt = dt;
  res.seed = seed;

  RVector last_costs;
  auto evaluate = [&](const RVector &x, bool grad) {
    return sim.evaluate(PulseMatrix(x.reshaped(n_t, n_ch), dt), grad, &res.stats);
  };
  auto record = [&](int, const RVector &, double, const RVector &pg) {
    res.cost_history.push_back(last_costs);
    res.gradient_norms.push_back(pg.norm());
  };

  const RVector lo = lower_.reshaped();
  const RVector hi = upper_.reshaped();
  BoxMinimizerResult mr;
  if (!opts_.least_squares) {
    BoxObjective obj = [&](const RVector &x, bool want, RVector &g) {
      const auto ev = evaluate(x, want);
      if (want) {
        g = RVector::Zero(x.size());
        for (std::size_t e = 0; e < ev.gradients.size(); ++e)
          g += sim.weights()[Eigen::Index(e)] * ev.gradients[e].reshaped();
        last_costs = ev.costs;
      }
      return sim.weights().dot(ev.costs);
    };
    mr = minimize_box(obj, initial.reshaped(), lo, hi, opts_.minimizer, record);
  } else {
    const RVector sw = sim.weights().cwiseSqrt();
    ResidualObjective obj = [&](const RVector &x, bool want, RMatrix &jac) {
      const auto ev = evaluate(x, want);
      if (want) {
        jac.resize(Eigen::Index(ev.gradients.size()), x.size());
        for (std::size_t e = 0; e < ev.gradients.size(); ++e)
          jac.row(Eigen::Index(e)) = sw[Eigen::Index(e)] * ev.gradients[e].reshaped().transpose();
        last_costs = ev.costs;
      }
      return RVector(sw.cwiseProduct(ev.costs));
    };
    mr = minimize_least_squares(obj, initial.reshaped(), lo, hi, opts_.minimizer, record);
  }

  res.final_parameters = mr.x.reshaped(n_t, n_ch);
  res.final_costs = res.cost_history.back();
  res.final_scalar = sim.weights().dot(res.final_costs);
  res.iterations = mr.iterations;
  res.reason = mr.reason;
  res.final_pulse = apply_transfer(sim.pipeline().transfer(), PulseMatrix(res.final_parameters, dt));
  res.stats.total_seconds = since(t0);
  return res;
}

std::size_t DataContainer::best_index() const {
  if (results_.empty()) throw InvalidArgument("DataContainer: empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results_.size(); ++i) {
    const auto &r = results_[i];
    if (r.reason == Termination::error) continue;
    if (results_[best].reason == Termination::error || r.final_scalar < results_[best].final_scalar)
      best = i;
  }
  return best;
}

RMatrix random_initial(Eigen::Index n_t, Eigen::Index n_ch, double low, double high,
                       std::uint64_t seed) {
  Rng rng(seed);
  RMatrix m(n_t, n_ch);
  // Row-major fill order so the draw sequence reads like the pulse table.
  for (Eigen::Index l = 0; l < n_t; ++l)
    for (Eigen::Index c = 0; c < n_ch; ++c) m(l, c) = low + (high - low) * rng.uniform();
  return m;
}

DataContainer run_multi_start(const Optimizer &opt, std::size_t n_starts, std::uint64_t seed,
                              const MultiStartOptions &ms) {
  if (n_starts < 1) throw InvalidArgument("run_multi_start: need at least one start");
  const auto n_t = opt.simulator().pipeline().raw_steps();
  const auto n_ch = opt.simulator().pipeline().raw_channels();
  std::vector<OptimResult> results(n_starts);
  parallel_for(n_starts, ms.n_threads, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    const RMatrix init = random_initial(n_t, n_ch, ms.initial_low, ms.initial_high, s);
    try {
      results[i] = opt.run_optimization(init, s);
    } catch (const std::exception &e) {
      OptimResult failed;
      failed.labels = opt.simulator().labels();
      failed.initial_parameters = init;
      failed.final_parameters = init;
      failed.dt = opt.simulator().pipeline().transfer().input_dt();
      failed.reason = Termination::error;
      failed.message = e.what();
      failed.seed = s;
      failed.final_scalar = std::numeric_limits<double>::infinity();
      results[i] = std::move(failed);
    }
  });
  DataContainer dc;
  for (auto &r : results) dc.append(std::move(r));
  return dc;
}

Analysis analyse(const DataContainer &dc) {
  if (dc.empty()) throw InvalidArgument("analyse: empty data container");
  Analysis a;
  for (const auto &r : dc.results()) {
    Table costs;
    costs.header.push_back("iteration");
    for (const auto &l : r.labels) costs.header.push_back(l);
    costs.rows.resize(Eigen::Index(r.cost_history.size()), Eigen::Index(r.labels.size() + 1));
    for (std::size_t i = 0; i < r.cost_history.size(); ++i) {
      costs.rows(Eigen::Index(i), 0) = double(i);
      costs.rows.row(Eigen::Index(i)).tail(Eigen::Index(r.labels.size())) =
          r.cost_history[i].transpose();
    }
    a.cost_tables.push_back(std::move(costs));

    Table pulse;
    pulse.header = {"t_start", "dt"};
    const PulseMatrix &p = r.final_pulse;
    for (Eigen::Index c = 0; c < p.n_channels(); ++c) pulse.header.push_back("ch_" + std::to_string(c));
    pulse.rows.resize(p.n_steps(), p.n_channels() + 2);
    if (p.n_steps() > 0) {
      pulse.rows.col(0) = p.start_times();
      pulse.rows.col(1) = p.dt();
      pulse.rows.rightCols(p.n_channels()) = p.values();
    }
    a.pulse_tables.push_back(std::move(pulse));
  }
  return a;
}

void write_table_csv(std::ostream &out, const Table &t) {
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < t.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.rows.cols(); ++c) out << (c ? "," : "") << t.rows(r, c);
    out << '\n';
  }
}

}  // namespace qoc
