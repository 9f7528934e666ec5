#include "qoc/noise.hpp"

#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>

#include <unsupported/Eigen/FFT>

#include "qoc/errors.hpp"

namespace qoc {

double Rng::uniform() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void write_traces_csv(std::ostream &out, const NoiseTraces &traces) {
  out << "trace,step,weight";
  for (Eigen::Index c = 0; c < traces.n_channels(); ++c) out << ",ch_" << c;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < traces.n_traces(); ++i) {
    const RMatrix &tr = traces.traces[i];
    for (Eigen::Index l = 0; l < tr.rows(); ++l) {
      out << i << ',' << l << ',' << traces.weights[Eigen::Index(i)];
      for (Eigen::Index c = 0; c < tr.cols(); ++c) out << ',' << tr(l, c);
      out << '\n';
    }
  }
}

GaussHermiteRule gauss_hermite(std::size_t n) {
  if (n == 0) throw InvalidArgument("gauss_hermite: need at least one node");
  const auto m = static_cast<Eigen::Index>(n);
  // Golub-Welsch on the Jacobi matrix of He_k: x He_k = He_{k+1} + k He_{k-1}.
  RMatrix jacobi = RMatrix::Zero(m, m);
  for (Eigen::Index k = 1; k < m; ++k)
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
  const Eigen::SelfAdjointEigenSolver<RMatrix> eig(jacobi);
  GaussHermiteRule rule{eig.eigenvalues(), RVector(m)};
  // Polish with Newton on p_n = He_n / sqrt(n!) and take w = 1 / (n p_{n-1}^2),
  // which is accurate for the tiny outer weights where eigenvectors are not.
  for (Eigen::Index i = 0; i < m; ++i) {
    double x = rule.nodes[i], prev = 0.0;
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double p2 = (x * p0 - std::sqrt(double(k)) * p1) / std::sqrt(double(k + 1));
        p1 = p0;
        p0 = p2;
      }
      x -= p0 / (std::sqrt(double(m)) * p1);
      prev = p1;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / (double(m) * prev * prev);
  }
  // Enforce the exact mirror symmetry of the rule.
  for (Eigen::Index i = 0; i < m / 2; ++i) {
    const Eigen::Index j = m - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

NoiseTraces generate_quasi_static(const QuasiStaticGenerator &gen, Eigen::Index n_t) {
  if (n_t < 1) throw InvalidArgument("generate_quasi_static: n_t must be >= 1");
  if (gen.n_traces < 1) throw InvalidArgument("generate_quasi_static: n_traces must be >= 1");
  for (double s : gen.sigma)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw InvalidArgument("generate_quasi_static: standard deviation must be >= 0");
  const auto n_ch = static_cast<Eigen::Index>(gen.sigma.size());

  NoiseTraces out;
  if (gen.mode == QuasiStaticMode::monte_carlo) {
    Rng rng(gen.seed);
    out.traces.reserve(gen.n_traces);
    for (std::size_t i = 0; i < gen.n_traces; ++i) {
      RVector draw(n_ch);
      for (Eigen::Index c = 0; c < n_ch; ++c) draw[c] = gen.sigma[std::size_t(c)] * rng.normal();
      out.traces.push_back(draw.transpose().replicate(n_t, 1));
    }
    out.weights = RVector::Constant(Eigen::Index(gen.n_traces), 1.0 / double(gen.n_traces));
    return out;
  }

  const GaussHermiteRule rule = gauss_hermite(gen.n_traces);
  std::size_t total = 1;
  for (Eigen::Index c = 0; c < n_ch; ++c) total *= gen.n_traces;
  out.traces.reserve(total);
  out.weights.resize(Eigen::Index(total));
  for (std::size_t flat = 0; flat < total; ++flat) {
    RVector point(n_ch);
    double w = 1.0;
    std::size_t rest = flat;
    for (Eigen::Index c = 0; c < n_ch; ++c) {
      const auto idx = static_cast<Eigen::Index>(rest % gen.n_traces);
      rest /= gen.n_traces;
      point[c] = gen.sigma[std::size_t(c)] * rule.nodes[idx];
      w *= rule.weights[idx];
    }
    out.traces.push_back(point.transpose().replicate(n_t, 1));
    out.weights[Eigen::Index(flat)] = w;
  }
  return out;
}

RVector rfft_frequencies(Eigen::Index n, double dt) {
  RVector f(n / 2 + 1);
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = double(k) / (double(n) * dt);
  return f;
}

NoiseTraces generate_colored(const ColoredNoiseGenerator &gen) {
  const Eigen::Index n = gen.n_samples;
  if (n < 2) throw InvalidArgument("generate_colored: n_samples must be >= 2");
  if (!(gen.dt > 0.0)) throw InvalidArgument("generate_colored: dt must be positive");
  if (gen.n_traces < 1) throw InvalidArgument("generate_colored: n_traces must be >= 1");
  if (!gen.psd) throw InvalidArgument("generate_colored: no spectral density");

  const RVector freqs = rfft_frequencies(n, gen.dt);
  const bool even = n % 2 == 0;
  const Eigen::Index nyquist = even ? n / 2 : -1;
  RVector amp = RVector::Zero(freqs.size());
  for (Eigen::Index k = 1; k < freqs.size(); ++k) {
    const double s = gen.psd(freqs[k]);
    if (!std::isfinite(s) || s < 0.0)
      throw InvalidArgument("generate_colored: spectral density is negative or "
                            "non-finite at f = " + std::to_string(freqs[k]));
    // Interior bins carry half the power on each of +-f; Nyquist is real.
    amp[k] = k == nyquist ? std::sqrt(s * double(n) / gen.dt)
                          : std::sqrt(s * double(n) / (2.0 * gen.dt));
  }

  Eigen::FFT<double> fft;
  Rng rng(gen.seed);
  NoiseTraces out;
  out.traces.reserve(gen.n_traces);
  std::vector<complex> spectrum(static_cast<std::size_t>(n));
  std::vector<complex> signal;
  for (std::size_t i = 0; i < gen.n_traces; ++i) {
    spectrum.assign(spectrum.size(), complex(0.0, 0.0));
    for (Eigen::Index k = 1; k < freqs.size(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (k == nyquist) {
        spectrum[uk] = amp[k] * rng.normal();
        continue;
      }
      const double re = rng.normal();
      const double im = rng.normal();
      const complex x = amp[k] * complex(re, im) / std::numbers::sqrt2;
      spectrum[uk] = x;
      spectrum[static_cast<std::size_t>(n - k)] = std::conj(x);
    }
    fft.inv(signal, spectrum);
    RMatrix trace(n, 1);
    for (Eigen::Index l = 0; l < n; ++l) trace(l, 0) = signal[std::size_t(l)].real();
    out.traces.push_back(std::move(trace));
  }
  out.weights = RVector::Constant(Eigen::Index(gen.n_traces), 1.0 / double(gen.n_traces));
  return out;
}

}  // namespace qoc
