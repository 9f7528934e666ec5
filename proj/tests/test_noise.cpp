#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <qoc/errors.hpp>
#include <qoc/noise.hpp>

using namespace qoc;

namespace {

// Exact Gaussian moments E[x^k] for the standard normal.
double normal_moment(int k) {
  if (k % 2) return 0.0;
  double m = 1.0;
  for (int j = k - 1; j > 0; j -= 2) m *= j;
  return m;
}

}  // namespace

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    differs |= u != c.uniform();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  EXPECT_NE(derive_seed(7, 3), derive_seed(7, 4));
  EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
  EXPECT_NE(derive_seed(0, 0), 0u);
}

TEST(Rng, NormalMoments) {
  Rng rng(5);
  const int n = 200000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    m1 += x;
    m2 += x * x;
  }
  EXPECT_NEAR(m1 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(GaussHermite, FiveNodeValues) {
  const auto rule = gauss_hermite(5);
  const double r10 = std::sqrt(10.0);
  const double outer = std::sqrt(5.0 + r10), inner = std::sqrt(5.0 - r10);
  const double expected_nodes[] = {-outer, -inner, 0.0, inner, outer};
  const double expected_weights[] = {(7.0 - 2.0 * r10) / 60.0, (7.0 + 2.0 * r10) / 60.0,
                                     8.0 / 15.0, (7.0 + 2.0 * r10) / 60.0,
                                     (7.0 - 2.0 * r10) / 60.0};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(rule.nodes[i], expected_nodes[i], 1e-13);
    EXPECT_NEAR(rule.weights[i], expected_weights[i], 1e-14);
  }
}

TEST(GaussHermite, IntegratesPolynomialsExactly) {
  for (std::size_t n : {1u, 2u, 3u, 7u, 12u, 20u}) {
    const auto rule = gauss_hermite(n);
    EXPECT_NEAR(rule.weights.sum(), 1.0, 1e-13);
    for (Eigen::Index i = 1; i < rule.nodes.size(); ++i) EXPECT_LT(rule.nodes[i - 1], rule.nodes[i]);
    for (int k = 0; k < int(2 * n); ++k) {
      // Odd moments cancel; measure roundoff against the absolute moment.
      double q = 0.0, scale = 0.0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        q += rule.weights[i] * std::pow(rule.nodes[i], k);
        scale += rule.weights[i] * std::pow(std::abs(rule.nodes[i]), k);
      }
      EXPECT_NEAR(q, normal_moment(k), 1e-12 * std::max(1.0, scale)) << "n=" << n << " k=" << k;
    }
  }
  EXPECT_THROW((void)gauss_hermite(0), InvalidArgument);
}

TEST(QuasiStatic, MonteCarloStatistics) {
  const QuasiStaticGenerator gen{{0.3, 1.2}, 20000, QuasiStaticMode::monte_carlo, 9};
  const auto tr = generate_quasi_static(gen, 4);
  ASSERT_EQ(tr.n_traces(), 20000u);
  ASSERT_EQ(tr.n_steps(), 4);
  ASSERT_EQ(tr.n_channels(), 2);
  EXPECT_NEAR(tr.weights.sum(), 1.0, 1e-12);
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double s = gen.sigma[std::size_t(c)];
    double m1 = 0, m2 = 0;
    for (const auto &t : tr.traces) {
      // Constant over the pulse.
      EXPECT_EQ(t.col(c).maxCoeff(), t.col(c).minCoeff());
      m1 += t(0, c);
      m2 += t(0, c) * t(0, c);
    }
    const double n = double(tr.n_traces());
    EXPECT_NEAR(m1 / n, 0.0, 5.0 * s / std::sqrt(n));
    EXPECT_NEAR(m2 / n, s * s, 5.0 * s * s * std::sqrt(2.0 / n));
  }
}

TEST(QuasiStatic, QuadratureTensorGrid) {
  const QuasiStaticGenerator gen{{0.5, 2.0}, 5, QuasiStaticMode::deterministic_quadrature, 0};
  const auto tr = generate_quasi_static(gen, 3);
  ASSERT_EQ(tr.n_traces(), 25u);
  EXPECT_NEAR(tr.weights.sum(), 1.0, 1e-14);
  double e_x2 = 0, e_y2 = 0, e_x2y2 = 0, e_x4 = 0;
  for (std::size_t i = 0; i < tr.n_traces(); ++i) {
    const double w = tr.weights[Eigen::Index(i)], x = tr.traces[i](0, 0), y = tr.traces[i](0, 1);
    e_x2 += w * x * x;
    e_y2 += w * y * y;
    e_x2y2 += w * x * x * y * y;
    e_x4 += w * x * x * x * x;
  }
  EXPECT_NEAR(e_x2, 0.25, 1e-13);
  EXPECT_NEAR(e_y2, 4.0, 1e-12);
  EXPECT_NEAR(e_x2y2, 1.0, 1e-12);
  EXPECT_NEAR(e_x4, 3.0 * 0.0625, 1e-13);
}

TEST(QuasiStatic, SeedDeterminismAndErrors) {
  const QuasiStaticGenerator gen{{0.1}, 16, QuasiStaticMode::monte_carlo, 123};
  const auto a = generate_quasi_static(gen, 2), b = generate_quasi_static(gen, 2);
  for (std::size_t i = 0; i < a.n_traces(); ++i) EXPECT_EQ(a.traces[i], b.traces[i]);
  auto other = gen;
  other.seed = 124;
  EXPECT_NE(generate_quasi_static(other, 2).traces[0], a.traces[0]);

  EXPECT_THROW((void)generate_quasi_static({{-0.1}, 4}, 2), InvalidArgument);
  EXPECT_THROW((void)generate_quasi_static({{0.1}, 0}, 2), InvalidArgument);
  EXPECT_THROW((void)generate_quasi_static({{0.1}, 4}, 0), InvalidArgument);
  // Zero width is a legal degenerate case.
  const auto zero = generate_quasi_static({{0.0}, 3}, 2);
  for (const auto &t : zero.traces) EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Colored, PeriodogramMatchesDensity) {
  // Pink noise; the periodogram is taken with a naive DFT, independent of the FFT.
  const Eigen::Index n = 64;
  const double dt = 0.05;
  ColoredNoiseGenerator gen{[](double f) { return 0.4 / f; }, 10000, dt, n, 77};
  const auto tr = generate_colored(gen);
  ASSERT_EQ(tr.n_traces(), 10000u);
  const RVector freqs = rfft_frequencies(n, dt);
  RVector mean = RVector::Zero(freqs.size());
  for (const auto &t : tr.traces) {
    EXPECT_NEAR(t.col(0).sum(), 0.0, 1e-10);  // no DC component
    for (Eigen::Index k = 1; k < n / 2; ++k) {
      complex x(0.0, 0.0);
      for (Eigen::Index l = 0; l < n; ++l)
        x += t(l, 0) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * l) / double(n));
      mean[k] += 2.0 * dt / double(n) * std::norm(x);
    }
  }
  mean /= double(tr.n_traces());
  for (Eigen::Index k = 1; k < n / 2; ++k)
    EXPECT_NEAR(mean[k] / (0.4 / freqs[k]), 1.0, 0.10) << "bin " << k;
}

TEST(Colored, WhiteNoiseVariance) {
  const double s0 = 2.5, dt = 0.01;
  ColoredNoiseGenerator gen{[s0](double) { return s0; }, 4000, dt, 128, 3};
  const auto tr = generate_colored(gen);
  double var = 0.0;
  for (const auto &t : tr.traces) var += t.col(0).squaredNorm() / double(t.rows());
  var /= double(tr.n_traces());
  const double expected = s0 / (2.0 * dt);  // S0 times the Nyquist frequency
  EXPECT_NEAR(var / expected, 1.0, 0.02);
}

TEST(Colored, DeterminismAndErrors) {
  ColoredNoiseGenerator gen{[](double f) { return 1.0 / (1.0 + f); }, 3, 0.1, 32, 11};
  const auto a = generate_colored(gen), b = generate_colored(gen);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.traces[i], b.traces[i]);
  EXPECT_NE(a.traces[0], a.traces[1]);

  auto neg = gen;
  neg.psd = [](double f) { return f > 2.0 ? -1.0 : 1.0; };
  EXPECT_THROW((void)generate_colored(neg), InvalidArgument);
  auto nan = gen;
  nan.psd = [](double) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW((void)generate_colored(nan), InvalidArgument);
  auto short_trace = gen;
  short_trace.n_samples = 1;
  EXPECT_THROW((void)generate_colored(short_trace), InvalidArgument);
  auto no_psd = gen;
  no_psd.psd = nullptr;
  EXPECT_THROW((void)generate_colored(no_psd), InvalidArgument);
}

TEST(Colored, OddLengthAndFrequencies) {
  const RVector f = rfft_frequencies(7, 0.5);
  ASSERT_EQ(f.size(), 4);
  EXPECT_DOUBLE_EQ(f[3], 3.0 / 3.5);
  ColoredNoiseGenerator gen{[](double) { return 1.0; }, 2, 0.5, 7, 1};
  const auto tr = generate_colored(gen);
  EXPECT_EQ(tr.n_steps(), 7);
  EXPECT_NEAR(tr.traces[0].sum(), 0.0, 1e-12);
}

TEST(Traces, CsvLayout) {
  const auto tr = generate_quasi_static({{0.1, 0.2}, 2, QuasiStaticMode::deterministic_quadrature}, 3);
  std::ostringstream os;
  write_traces_csv(os, tr);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "trace,step,weight,ch_0,ch_1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4 * 3);
}
