#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <qoc/costs.hpp>
#include <qoc/errors.hpp>

#include "support.hpp"

using namespace qoc;
using namespace std::complex_literals;
using qoc::testing::central_difference;
using qoc::testing::random_density;
using qoc::testing::random_hermitian;
using qoc::testing::random_unitary;
using qoc::testing::rel_error;

namespace {

RMatrix random_pulse(Rng &rng, Eigen::Index n, Eigen::Index c) {
  RMatrix m(n, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = rng.normal();
  return m;
}

HamiltonianSpec qubit_xy() {
  HamiltonianSpec s;
  s.controls = {0.5 * pauli(Pauli::x), 0.5 * pauli(Pauli::y)};
  s.drift.push_back(0.3 * pauli(Pauli::z));
  return s;
}

Operator x_pi2() {
  return matexp(pauli(Pauli::x), complex(0.0, -std::numbers::pi / 4));
}

void expect_gradient_matches(const CostFunction &cost, const PulseMatrix &u, double tol) {
  const CostOutput out = cost.evaluate(u, true);
  ASSERT_EQ(out.grad_u.size(), out.values.size());
  for (std::size_t e = 0; e < out.values.size(); ++e) {
    auto f = [&](const RMatrix &v) { return cost.evaluate(PulseMatrix(v, u.dt()), false).values[e]; };
    const RMatrix fd = central_difference(f, u.values());
    EXPECT_LT(rel_error(out.grad_u[e], fd), tol) << cost.labels()[e];
  }
}

}  // namespace

TEST(StateFidelity, PureStatesAndCommutingMixtures) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    CVector a = qoc::testing::random_complex(rng, 3, 1).col(0), b = qoc::testing::random_complex(rng, 3, 1).col(0);
    a.normalize();
    b.normalize();
    const double expected = std::norm(a.dot(b));
    EXPECT_NEAR(state_fidelity(Operator(CMatrix(a * a.adjoint())), Operator(CMatrix(b * b.adjoint()))),
                expected, 1e-10);
  }
  const RVector p = (RVector(3) << 0.5, 0.3, 0.2).finished(), q = (RVector(3) << 0.1, 0.6, 0.3).finished();
  double bc = 0.0;
  for (int i = 0; i < 3; ++i) bc += std::sqrt(p[i] * q[i]);
  EXPECT_NEAR(state_fidelity(Operator(CMatrix(p.cast<complex>().asDiagonal())),
                             Operator(CMatrix(q.cast<complex>().asDiagonal()))),
              bc * bc, 1e-12);
}

TEST(StateFidelity, SymmetricBoundedAndUnitaryInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix r1 = random_density(rng, 3), r2 = random_density(rng, 3);
    const double f = state_fidelity(Operator(r1), Operator(r2));
    EXPECT_GE(f, -1e-12);
    EXPECT_LE(f, 1.0 + 1e-12);
    EXPECT_NEAR(f, state_fidelity(Operator(r2), Operator(r1)), 1e-10);
    const CMatrix v = random_unitary(rng, 3);
    EXPECT_NEAR(f, state_fidelity(Operator(CMatrix(v * r1 * v.adjoint())), Operator(CMatrix(v * r2 * v.adjoint()))),
                1e-10);
    EXPECT_NEAR(state_fidelity(Operator(r1), Operator(r1)), 1.0, 1e-10);
  }
  EXPECT_THROW((void)state_fidelity(Operator::identity(2), Operator::identity(3)), InvalidArgument);
}

TEST(EntanglementInfidelity, GlobalPhaseAndKnownValues) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix u = random_unitary(rng, 4);
    EXPECT_NEAR(entanglement_infidelity(u, u), 0.0, 1e-14);
    EXPECT_NEAR(entanglement_infidelity(CMatrix(std::exp(1i * 0.37 * double(trial)) * u), u), 0.0, 1e-14);
  }
  EXPECT_NEAR(entanglement_infidelity(pauli(Pauli::x), Operator::identity(2)), 1.0, 1e-15);
  // Rotation by theta about z: 1 - cos^2(theta / 2).
  const double th = 0.3;
  EXPECT_NEAR(entanglement_infidelity(matexp(pauli(Pauli::z), complex(0, -th / 2)), Operator::identity(2)),
              std::pow(std::sin(th / 2), 2), 1e-15);
}

TEST(OpenSystemFidelity, UnitaryProcessesAndDamping) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const CMatrix v = random_unitary(rng, d);
    EXPECT_NEAR(open_system_fidelity(Operator(v), Operator(kron(CMatrix(v.conjugate()), v))), 1.0, 1e-12);
  }
  // Amplitude damping against the identity: F = |1 + sqrt(1 - p)|^2 / 4 from the Kraus form.
  HamiltonianSpec spec;
  spec.controls.push_back(pauli(Pauli::x));
  const double gamma = 0.4, t = 1.3, p = 1.0 - std::exp(-gamma * t);
  const auto rec = propagate_lindblad(spec, {{pauli(Pauli::minus)}, {LindbladRate{gamma}}},
                                      PulseMatrix(RMatrix::Zero(4, 1), RVector::Constant(4, t / 4)));
  EXPECT_NEAR(open_system_fidelity(Operator::identity(2), Operator(rec.total())),
              std::pow(1.0 + std::sqrt(1.0 - p), 2) / 4.0, 1e-12);
}

TEST(Leakage, BlockDiagonalAndSwap) {
  Rng rng(5);
  CMatrix block = CMatrix::Zero(4, 4);
  block.topLeftCorner(2, 2) = random_unitary(rng, 2);
  block.bottomRightCorner(2, 2) = random_unitary(rng, 2);
  EXPECT_NEAR(leakage_error(Operator(block), {0, 1}), 0.0, 1e-12);

  CMatrix swap = CMatrix::Zero(3, 3);
  swap(0, 0) = 1.0;
  swap(1, 2) = 1.0;
  swap(2, 1) = 1.0;
  EXPECT_NEAR(leakage_error(Operator(swap), {0, 1}), 0.5, 1e-15);
  EXPECT_THROW((void)leakage_error(Operator(swap), {0, 3}), InvalidArgument);
  EXPECT_THROW((void)leakage_error(Operator(swap), {}), InvalidArgument);
}

TEST(NoiseAverage, WeightedMeanOfRecords) {
  HamiltonianSpec spec = qubit_xy();
  spec.noise.push_back({pauli(Pauli::z), {}});
  Rng rng(6);
  const PulseMatrix u(random_pulse(rng, 5, 2), RVector::Constant(5, 0.3));
  NoiseTraces tr = generate_quasi_static({{0.2}, 4, QuasiStaticMode::deterministic_quadrature}, 5);
  const auto recs = propagate_monte_carlo(spec, u, tr);
  const Operator target = x_pi2();
  double expected = 0.0, expected_ns = 0.0;
  const CMatrix clean = propagate_closed(spec, u).total();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    expected += tr.weights[Eigen::Index(i)] * entanglement_infidelity(recs[i].total(), target.data());
    expected_ns += tr.weights[Eigen::Index(i)] * entanglement_infidelity(recs[i].total(), clean);
  }
  EXPECT_NEAR(noise_average_infidelity(recs, target, false), expected, 1e-14);
  EXPECT_NEAR(noise_average_infidelity(recs, target, true, &clean), expected_ns, 1e-14);

  const OperationNoiseInfidelity cost(spec, target, std::make_shared<NoiseTraces>(tr), true);
  EXPECT_NEAR(cost.evaluate(u, false).values[0], expected_ns, 1e-14);
  const OperationNoiseInfidelity with_sys(spec, target, std::make_shared<NoiseTraces>(tr), false);
  EXPECT_NEAR(with_sys.evaluate(u, false).values[0], expected, 1e-14);
}

TEST(Costs, OperationInfidelityValueAndGradient) {
  Rng rng(7);
  const OperationInfidelity cost(qubit_xy(), x_pi2());
  EXPECT_EQ(cost.labels(), std::vector<std::string>{"I_e"});
  const PulseMatrix u(random_pulse(rng, 8, 2), RVector::Constant(8, 0.4));
  EXPECT_NEAR(cost.evaluate(u, false).values[0],
              entanglement_infidelity(propagate_closed(qubit_xy(), u).total(), x_pi2().data()), 1e-14);
  expect_gradient_matches(cost, u, 1e-6);
  // A resonant pi/2 pulse is exact.
  HamiltonianSpec nodrift = qubit_xy();
  nodrift.drift.clear();
  const OperationInfidelity exact(nodrift, x_pi2());
  const PulseMatrix pulse(RMatrix((RMatrix(1, 2) << std::numbers::pi / 2, 0.0).finished()), RVector::Ones(1));
  EXPECT_NEAR(exact.evaluate(pulse, false).values[0], 0.0, 1e-15);
}

TEST(Costs, NoiseInfidelityGradient) {
  Rng rng(8);
  HamiltonianSpec spec = qubit_xy();
  spec.noise.push_back({pauli(Pauli::z), {}});
  spec.noise.push_back({pauli(Pauli::x), {[](const RVector &u, double) { return 0.5 + 0.2 * u[1]; },
                                         [](const RVector &, double) { return RVector((RVector(2) << 0.0, 0.2).finished()); }}});
  const auto tr = std::make_shared<NoiseTraces>(
      generate_quasi_static({{0.1, 0.05}, 6, QuasiStaticMode::monte_carlo, 3}, 12));
  const PulseMatrix u(random_pulse(rng, 6, 2), RVector::Constant(6, 0.3));
  for (bool neglect : {true, false}) {
    const OperationNoiseInfidelity cost(spec, x_pi2(), tr, neglect, "I_n", 2);
    expect_gradient_matches(cost, u, 1e-6);
  }
}

TEST(Costs, OpenSystemGradient) {
  Rng rng(9);
  LindbladRate rate;
  rate.value = [](const RVector &u) { return 0.05 + 0.02 * u[0] * u[0]; };
  rate.gradient = [](const RVector &u) { return RVector((RVector(2) << 0.04 * u[0], 0.0).finished()); };
  const OpenSystemInfidelity cost(qubit_xy(), {{pauli(Pauli::minus), pauli(Pauli::z)}, {rate, LindbladRate{0.03}}},
                                  x_pi2());
  const PulseMatrix u(random_pulse(rng, 5, 2), RVector::Constant(5, 0.3));
  const double v = cost.evaluate(u, false).values[0];
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
  expect_gradient_matches(cost, u, 1e-6);
}

TEST(Costs, LeakageAndStateGradients) {
  Rng rng(10);
  HamiltonianSpec spec;
  spec.controls = {Operator(random_hermitian(rng, 3)), Operator(random_hermitian(rng, 3))};
  spec.drift.emplace_back(random_hermitian(rng, 3, 0.2));
  const PulseMatrix u(random_pulse(rng, 5, 2), RVector::Constant(5, 0.25));
  const LeakageCost leak(spec, {0, 1});
  EXPECT_NEAR(leak.evaluate(u, false).values[0], leakage_error(Operator(propagate_closed(spec, u).total()), {0, 1}),
              1e-14);
  expect_gradient_matches(leak, u, 1e-6);

  CVector init = CVector::Zero(3), target = CVector::Zero(3);
  init[0] = 1.0;
  target[1] = 1.0;
  const StateInfidelity st(spec, init, target);
  const CMatrix total = propagate_closed(spec, u).total();
  EXPECT_NEAR(st.evaluate(u, false).values[0], 1.0 - std::norm(total(1, 0)), 1e-14);
  expect_gradient_matches(st, u, 1e-6);
  EXPECT_THROW(StateInfidelity(spec, CVector::Zero(3), target), InvalidArgument);
}

TEST(Costs, FilterFunctionCostUsesDifferences) {
  Rng rng(11);
  FilterFunctionInfidelity ff;
  ff.spec = qubit_xy();
  ff.noise.push_back({pauli(Pauli::z), {}});
  ff.spectra.push_back({[](double f) { return 1e-3 / f; }});
  const FilterFunctionCost cost(ff);
  EXPECT_FALSE(cost.analytic_gradient());
  const PulseMatrix u(random_pulse(rng, 6, 2), RVector::Constant(6, 0.3));
  const CostOutput out = cost.evaluate(u, true);
  EXPECT_NEAR(out.values[0], ff(u), 1e-16);
  ASSERT_EQ(out.grad_u.size(), 1u);
  auto f = [&](const RMatrix &v) { return ff(PulseMatrix(v, u.dt())); };
  const RMatrix ref = central_difference(f, u.values(), 1e-5);
  EXPECT_LT(rel_error(out.grad_u[0], ref), 1e-5);
  EXPECT_LT(rel_error(cost_gradient_fd(cost, u)[0], ref), 1e-5);
}

TEST(Costs, ExactPulseIsStationary) {
  HamiltonianSpec spec = qubit_xy();
  spec.drift.clear();
  const OperationInfidelity cost(spec, x_pi2());
  // Four steps of pi/8 about x compose to the target rotation.
  const PulseMatrix u(RMatrix((RMatrix(4, 2) << 0.5, 0, 0.5, 0, 0.5, 0, 0.5, 0).finished()),
                      RVector::Constant(4, std::numbers::pi / 4));
  const CostOutput out = cost.evaluate(u, true);
  EXPECT_NEAR(out.values[0], 0.0, 1e-15);
  EXPECT_LT(out.grad_u[0].norm(), 1e-8);
}

TEST(Costs, TimeRescalingOracle) {
  // H = sum u_k C_k without drift: (dt, u) and (dt / a, a u) give the same propagator,
  // and the gradient rescales by 1 / a.
  Rng rng(12);
  HamiltonianSpec spec = qubit_xy();
  spec.drift.clear();
  const OperationInfidelity cost(spec, x_pi2());
  const RMatrix x = random_pulse(rng, 6, 2);
  const RVector dt = RVector::Constant(6, 0.3);
  const double a = 2.5;
  const CostOutput base = cost.evaluate(PulseMatrix(x, dt), true);
  const CostOutput scaled = cost.evaluate(PulseMatrix(a * x, dt / a), true);
  EXPECT_NEAR(base.values[0], scaled.values[0], 1e-14);
  EXPECT_LT(rel_error(base.grad_u[0] / a, scaled.grad_u[0]), 1e-12);
}

TEST(Costs, InfidelitiesStayInUnitInterval) {
  Rng rng(13);
  HamiltonianSpec spec;
  spec.controls = {Operator(random_hermitian(rng, 3)), Operator(random_hermitian(rng, 3))};
  spec.noise.push_back({Operator(random_hermitian(rng, 3)), {}});
  const auto tr = std::make_shared<NoiseTraces>(
      generate_quasi_static({{0.5}, 8, QuasiStaticMode::monte_carlo, 1}, 4));
  CVector e0 = CVector::Zero(3);
  e0[0] = 1.0;
  const Operator target(random_unitary(rng, 3));
  const std::vector<std::shared_ptr<const CostFunction>> costs = {
      std::make_shared<OperationInfidelity>(spec, target),
      std::make_shared<OperationNoiseInfidelity>(spec, target, tr, false),
      std::make_shared<OperationNoiseInfidelity>(spec, target, tr, true),
      std::make_shared<OpenSystemInfidelity>(spec, LindbladSpec{{Operator(random_hermitian(rng, 3))},
                                                                {LindbladRate{0.2}}},
                                             target),
      std::make_shared<LeakageCost>(spec, std::vector<Eigen::Index>{0, 1}),
      std::make_shared<StateInfidelity>(spec, e0, CVector(random_unitary(rng, 3).col(0)))};
  for (int trial = 0; trial < 20; ++trial) {
    const PulseMatrix u(3.0 * random_pulse(rng, 4, 2), RVector::Constant(4, 0.5));
    for (const auto &c : costs) {
      const double v = c->evaluate(u, false).values[0];
      EXPECT_GE(v, -1e-10) << c->labels()[0];
      EXPECT_LE(v, 1.0 + 1e-10) << c->labels()[0];
    }
  }
}
