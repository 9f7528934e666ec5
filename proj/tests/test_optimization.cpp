#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include <qoc/errors.hpp>
#include <qoc/optimization.hpp>

#include "support.hpp"

using namespace qoc;
using qoc::testing::central_difference;
using qoc::testing::rel_error;

namespace {

// sum (u - target)^2 with an analytic gradient; optionally logs every point it sees.
class Quadratic final : public CostFunction {
 public:
  Quadratic(RMatrix target, std::string label = "q") : target_(std::move(target)), label_(std::move(label)) {}
  std::vector<std::string> labels() const override { return {label_}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override {
    if (log) {
      std::lock_guard lock(mu);
      log->push_back(u.values());
    }
    const RMatrix diff = u.values() - target_;
    CostOutput out;
    out.values.push_back(diff.squaredNorm());
    if (with_gradient) out.grad_u.push_back(2.0 * diff);
    return out;
  }
  std::vector<RMatrix> *log = nullptr;
  mutable std::mutex mu;

 private:
  RMatrix target_;
  std::string label_;
};

// Rosenbrock valley along consecutive parameters, two entries.
class Valley final : public CostFunction {
 public:
  std::vector<std::string> labels() const override { return {"a", "b"}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override {
    const RMatrix &x = u.values();
    CostOutput out;
    double a = 0.0, b = 0.0;
    RMatrix ga = RMatrix::Zero(x.rows(), x.cols()), gb = ga;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double xi = x(i), xj = x(i + 1);
      a += 10.0 * std::pow(xj - xi * xi, 2);
      b += std::pow(1.0 - xi, 2);
      ga(i) += -40.0 * xi * (xj - xi * xi);
      ga(i + 1) += 20.0 * (xj - xi * xi);
      gb(i) += -2.0 * (1.0 - xi);
    }
    out.values = {a, b};
    if (with_gradient) out.grad_u = {ga, gb};
    return out;
  }
};

// Smooth cost without an analytic gradient.
class NoGradient final : public CostFunction {
 public:
  std::vector<std::string> labels() const override { return {"fd"}; }
  bool analytic_gradient() const override { return false; }
  CostOutput evaluate(const PulseMatrix &u, bool) const override {
    return {{(u.values().array().sin() * u.values().array()).sum()}, {}};
  }
};

class Throwing final : public CostFunction {
 public:
  explicit Throwing(bool nan) : nan_(nan) {}
  std::vector<std::string> labels() const override { return {"bad"}; }
  CostOutput evaluate(const PulseMatrix &u, bool with_gradient) const override {
    if (!nan_) throw NumericalError("boom");
    CostOutput out{{std::numeric_limits<double>::quiet_NaN()}, {}};
    if (with_gradient) out.grad_u.push_back(RMatrix::Zero(u.n_steps(), u.n_channels()));
    return out;
  }

 private:
  bool nan_;
};

ControlPipeline identity_pipeline(Eigen::Index n, Eigen::Index c, double dt = 0.5) {
  return ControlPipeline(TransferFunction::identity(RVector::Constant(n, dt), c),
                         std::make_shared<IdentityAmplitude>());
}

std::shared_ptr<Simulator> make_sim(std::shared_ptr<const CostFunction> c, Eigen::Index n, Eigen::Index ch,
                                    std::vector<double> w = {}) {
  return std::make_shared<Simulator>(identity_pipeline(n, ch), std::vector{std::move(c)}, std::move(w));
}

}  // namespace

TEST(Simulator, ConstructionChecks) {
  const auto q = std::make_shared<Quadratic>(RMatrix::Zero(2, 1));
  EXPECT_THROW(Simulator(identity_pipeline(2, 1), {}), InvalidArgument);
  EXPECT_THROW(Simulator(identity_pipeline(2, 1), {nullptr}), InvalidArgument);
  EXPECT_THROW(Simulator(identity_pipeline(2, 1), {q}, {1.0, 2.0}), InvalidArgument);
  const Simulator sim(identity_pipeline(2, 1), {q, std::make_shared<Valley>()});
  EXPECT_EQ(sim.labels(), (std::vector<std::string>{"q", "a", "b"}));
  EXPECT_EQ(sim.weights(), RVector::Ones(3));
}

TEST(Simulator, ExactTargetAndDeterminism) {
  const RMatrix target = (RMatrix(3, 1) << 0.1, -0.2, 0.3).finished();
  const auto sim = make_sim(std::make_shared<Quadratic>(target), 3, 1);
  const auto ev = sim->evaluate(PulseMatrix(target, RVector::Constant(3, 0.5)), true);
  EXPECT_EQ(ev.costs[0], 0.0);
  EXPECT_EQ(ev.gradients[0].norm(), 0.0);
  const PulseMatrix p(RMatrix::Constant(3, 1, 0.7), RVector::Constant(3, 0.5));
  const auto a = sim->evaluate(p, true), b = sim->evaluate(p, true);
  EXPECT_EQ(a.costs, b.costs);
  EXPECT_EQ(a.gradients[0], b.gradients[0]);
}

TEST(Simulator, GradientsThroughPipelineAndFallback) {
  Rng rng(1);
  const RVector dt = RVector::Constant(4, 0.5);
  const auto tf = TransferFunction::gaussian(dt, 2, 2, 0.6).with_padding(Padding{1, 1});
  auto af = std::make_shared<PointwiseAmplitude>([](double v) { return std::tanh(v); },
                                                 [](double v) { return 1.0 / std::pow(std::cosh(v), 2); });
  const ControlPipeline pipe(tf, af);
  const Simulator sim(pipe, {std::make_shared<Quadratic>(RMatrix::Constant(10, 2, 0.2)),
                             std::make_shared<NoGradient>()});
  RMatrix x(4, 2);
  for (Eigen::Index i = 0; i < 8; ++i) x(i) = rng.normal();
  RuntimeStats stats;
  const auto ev = sim.evaluate(PulseMatrix(x, dt), true, &stats);
  ASSERT_EQ(ev.gradients.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    auto f = [&](const RMatrix &v) { return sim.evaluate(PulseMatrix(v, dt), false).costs[Eigen::Index(e)]; };
    EXPECT_LT(rel_error(ev.gradients[e], central_difference(f, x)), 1e-6) << e;
  }
  EXPECT_EQ(stats.evaluations, 1u);
  EXPECT_EQ(stats.gradient_evaluations, 1u);
  ASSERT_EQ(stats.cost_seconds.size(), 2u);
}

TEST(Simulator, ErrorsNameThePipelineStage) {
  const RVector dt = RVector::Constant(2, 0.5);
  const PulseMatrix p(RMatrix::Zero(2, 1), dt);
  try {
    (void)make_sim(std::make_shared<Throwing>(false), 2, 1)->evaluate(p, false);
    FAIL() << "no error";
  } catch (const PipelineError &e) {
    EXPECT_EQ(e.stage(), "cost:bad");
  }
  auto inv = std::make_shared<PointwiseAmplitude>([](double v) { return 1.0 / v; },
                                                  [](double v) { return -1.0 / (v * v); });
  const Simulator sim(ControlPipeline(TransferFunction::identity(dt, 1), inv),
                      {std::make_shared<Quadratic>(RMatrix::Zero(2, 1))});
  try {
    (void)sim.evaluate(p, false);
    FAIL() << "no error";
  } catch (const PipelineError &e) {
    EXPECT_EQ(e.stage(), "amplitude");
  }
  try {
    (void)sim.evaluate(PulseMatrix(RMatrix::Zero(3, 1), RVector::Ones(3)), false);
    FAIL() << "no error";
  } catch (const PipelineError &e) {
    EXPECT_EQ(e.stage(), "transfer");
  }
}

TEST(Optimizer, QuadraticConverges) {
  Rng rng(2);
  RMatrix target(10, 2);
  for (Eigen::Index i = 0; i < 20; ++i) target(i) = 0.8 * (2.0 * rng.uniform() - 1.0);
  const Optimizer opt(make_sim(std::make_shared<Quadratic>(target), 10, 2), -1.0, 1.0);
  const OptimResult r = opt.run_optimization(RMatrix::Zero(10, 2), 5);
  EXPECT_LT((r.final_parameters - target).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(r.iterations, 50);
  EXPECT_NE(r.reason, Termination::error);
  EXPECT_EQ(r.seed, 5u);
  EXPECT_EQ(r.labels, std::vector<std::string>{"q"});
  EXPECT_EQ(r.final_pulse.values(), r.final_parameters);
}

TEST(Optimizer, StartAtBoundOptimumStopsImmediately) {
  // Minimum of (u - 2)^2 on [-1, 1] is the upper bound.
  const Optimizer opt(make_sim(std::make_shared<Quadratic>(RMatrix::Constant(3, 1, 2.0)), 3, 1), -1.0, 1.0);
  const OptimResult r = opt.run_optimization(RMatrix::Ones(3, 1));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.reason, Termination::gradient_tolerance);
  EXPECT_EQ(r.gradient_norms.front(), 0.0);
  EXPECT_EQ(r.final_parameters, RMatrix::Ones(3, 1));
}

TEST(Optimizer, IteratesRespectBoundsAndHistoryIsMonotone) {
  Rng rng(3);
  std::vector<RMatrix> seen;
  auto q = std::make_shared<Quadratic>(RMatrix::Constant(6, 2, 3.0));
  q->log = &seen;
  RMatrix lo(6, 2), hi(6, 2);
  for (Eigen::Index i = 0; i < 12; ++i) {
    lo(i) = -rng.uniform();
    hi(i) = rng.uniform();
  }
  const Simulator base(identity_pipeline(6, 2), {q, std::make_shared<Valley>()}, {1.0, 1.0, 0.5});
  const Optimizer opt(std::make_shared<Simulator>(base), lo, hi);
  const OptimResult r = opt.run_optimization(0.5 * (lo + hi));
  ASSERT_FALSE(seen.empty());
  for (const auto &x : seen) {
    EXPECT_TRUE((x.array() >= lo.array()).all());
    EXPECT_TRUE((x.array() <= hi.array()).all());
  }
  ASSERT_EQ(r.cost_history.size(), std::size_t(r.iterations) + 1);
  const RVector w = base.weights();
  for (std::size_t k = 1; k < r.cost_history.size(); ++k)
    EXPECT_LE(w.dot(r.cost_history[k]), w.dot(r.cost_history[k - 1]));
  EXPECT_DOUBLE_EQ(r.final_scalar, w.dot(r.final_costs));
}

TEST(Optimizer, TerminationLimits) {
  const auto sim = std::make_shared<Simulator>(identity_pipeline(8, 1), std::vector<std::shared_ptr<const CostFunction>>{std::make_shared<Valley>()});
  OptimizerOptions o;
  o.minimizer.max_iter = 3;
  const OptimResult r = Optimizer(sim, -2.0, 2.0, o).run_optimization(RMatrix::Constant(8, 1, -1.0));
  EXPECT_EQ(r.reason, Termination::max_iterations);
  EXPECT_EQ(r.iterations, 3);
  OptimizerOptions t;
  t.minimizer.max_seconds = 0.0;
  EXPECT_EQ(Optimizer(sim, -2.0, 2.0, t).run_optimization(RMatrix::Constant(8, 1, -1.0)).reason,
            Termination::wall_clock);
}

TEST(Optimizer, NonFiniteInitialCostThrows) {
  const Optimizer opt(make_sim(std::make_shared<Throwing>(true), 2, 1), -1.0, 1.0);
  EXPECT_THROW((void)opt.run_optimization(RMatrix::Zero(2, 1)), NumericalError);
  EXPECT_THROW((void)opt.run_optimization(RMatrix::Zero(3, 1)), InvalidArgument);
  EXPECT_THROW(Optimizer(make_sim(std::make_shared<Quadratic>(RMatrix::Zero(2, 1)), 2, 1), 1.0, -1.0),
               InvalidArgument);
}

TEST(Optimizer, LeastSquaresPath) {
  // Residual-like cost vector: the two entries are linear in u and vanish at (0.3, -0.4).
  class Linear final : public CostFunction {
   public:
    std::vector<std::string> labels() const override { return {"r0", "r1"}; }
    CostOutput evaluate(const PulseMatrix &u, bool g) const override {
      CostOutput out{{u.values()(0) - 0.3, 2.0 * (u.values()(1) + 0.4)}, {}};
      if (g) {
        RMatrix a = RMatrix::Zero(2, 1), b = a;
        a(0) = 1.0;
        b(1) = 2.0;
        out.grad_u = {a, b};
      }
      return out;
    }
  };
  OptimizerOptions o;
  o.least_squares = true;
  const Optimizer opt(make_sim(std::make_shared<Linear>(), 2, 1, {1.0, 4.0}), -1.0, 1.0, o);
  const OptimResult r = opt.run_optimization(RMatrix::Constant(2, 1, 0.9));
  EXPECT_NEAR(r.final_parameters(0), 0.3, 1e-8);
  EXPECT_NEAR(r.final_parameters(1), -0.4, 1e-8);
  EXPECT_LE(r.iterations, 20);
}

TEST(MultiStart, SerialAndParallelAgree) {
  const auto sim = std::make_shared<Simulator>(identity_pipeline(5, 2), std::vector<std::shared_ptr<const CostFunction>>{std::make_shared<Valley>()});
  const Optimizer opt(sim, -2.0, 2.0);
  MultiStartOptions serial, parallel;
  parallel.n_threads = 4;
  const DataContainer a = run_multi_start(opt, 6, 99, serial);
  const DataContainer b = run_multi_start(opt, 6, 99, parallel);
  const DataContainer c = run_multi_start(opt, 6, 99, serial);
  ASSERT_EQ(a.size(), 6u);
  ASSERT_EQ(b.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_TRUE(a.results()[i].same_outcome(b.results()[i])) << i;
    EXPECT_TRUE(a.results()[i].same_outcome(c.results()[i])) << i;
    EXPECT_EQ(a.results()[i].seed, derive_seed(99, i));
  }
  EXPECT_NE(a.results()[0].initial_parameters, a.results()[1].initial_parameters);
  const std::size_t best = a.best_index();
  for (const auto &r : a.results()) EXPECT_LE(a.results()[best].final_scalar, r.final_scalar);
}

TEST(MultiStart, SingleStartEqualsRunOptimization) {
  const auto sim = std::make_shared<Simulator>(identity_pipeline(4, 1), std::vector<std::shared_ptr<const CostFunction>>{std::make_shared<Valley>()});
  const Optimizer opt(sim, -2.0, 2.0);
  const DataContainer dc = run_multi_start(opt, 1, 7);
  const std::uint64_t s = derive_seed(7, 0);
  const OptimResult r = opt.run_optimization(random_initial(4, 1, 0.0, 1.0, s), s);
  ASSERT_EQ(dc.size(), 1u);
  EXPECT_TRUE(dc.results()[0].same_outcome(r));
  EXPECT_THROW((void)run_multi_start(opt, 0, 7), InvalidArgument);
}

TEST(MultiStart, FailedStartsAreRecorded) {
  const Optimizer opt(make_sim(std::make_shared<Throwing>(true), 2, 1), -1.0, 1.0);
  const DataContainer dc = run_multi_start(opt, 3, 1);
  ASSERT_EQ(dc.size(), 3u);
  for (const auto &r : dc.results()) {
    EXPECT_EQ(r.reason, Termination::error);
    EXPECT_FALSE(r.message.empty());
    EXPECT_TRUE(std::isinf(r.final_scalar));
  }
}

TEST(Stats, CostTimeBoundedByTotal) {
  const auto sim = std::make_shared<Simulator>(
      identity_pipeline(6, 1),
      std::vector<std::shared_ptr<const CostFunction>>{std::make_shared<Valley>(), std::make_shared<NoGradient>()});
  const OptimResult r = Optimizer(sim, -2.0, 2.0).run_optimization(RMatrix::Constant(6, 1, 0.2));
  const double cost_sum = std::accumulate(r.stats.cost_seconds.begin(), r.stats.cost_seconds.end(), 0.0);
  EXPECT_GT(r.stats.total_seconds, 0.0);
  EXPECT_LE(cost_sum, r.stats.total_seconds);
  EXPECT_LE(r.stats.gradient_seconds, r.stats.total_seconds);
  EXPECT_GE(r.stats.evaluations, std::size_t(r.iterations) + 1);
}

TEST(Random, InitialPulsesAreSeededAndInRange) {
  const RMatrix a = random_initial(5, 3, -0.5, 0.25, 11);
  EXPECT_EQ(a, random_initial(5, 3, -0.5, 0.25, 11));
  EXPECT_NE(a, random_initial(5, 3, -0.5, 0.25, 12));
  EXPECT_GE(a.minCoeff(), -0.5);
  EXPECT_LT(a.maxCoeff(), 0.25);
}

TEST(Analyse, TablesAndLabels) {
  const auto sim = std::make_shared<Simulator>(identity_pipeline(4, 2, 0.25), std::vector<std::shared_ptr<const CostFunction>>{std::make_shared<Valley>()});
  const Optimizer opt(sim, -2.0, 2.0);
  DataContainer dc = run_multi_start(opt, 2, 3);
  EXPECT_THROW((void)analyse(DataContainer{}), InvalidArgument);
  const Analysis an = analyse(dc);
  ASSERT_EQ(an.cost_tables.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const Table &t = an.cost_tables[i];
    const OptimResult &r = dc.results()[i];
    EXPECT_EQ(t.header, (std::vector<std::string>{"iteration", "a", "b"}));
    // One row per recorded iterate: the starting point plus each accepted step.
    EXPECT_EQ(t.rows.rows(), Eigen::Index(r.iterations) + 1);
    EXPECT_EQ(t.rows(t.rows.rows() - 1, 1), r.final_costs[0]);
    const Table &p = an.pulse_tables[i];
    EXPECT_EQ(p.header, (std::vector<std::string>{"t_start", "dt", "ch_0", "ch_1"}));
    EXPECT_EQ(p.rows.rows(), 4);
    EXPECT_DOUBLE_EQ(p.rows(3, 0), 0.75);
  }
  std::ostringstream os;
  write_table_csv(os, an.cost_tables[0]);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iteration,a,b");
}

TEST(Results, TerminationNamesRoundTrip) {
  for (Termination t : {Termination::gradient_tolerance, Termination::function_tolerance,
                        Termination::max_iterations, Termination::wall_clock,
                        Termination::line_search_failure, Termination::error})
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  EXPECT_THROW((void)termination_from_string("nope"), InvalidArgument);
}
