#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

/// Deterministic RNG: mt19937_64 with a hand-rolled uniform and Box-Muller
/// normal so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent child seed from (seed, stream) via splitmix64.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Sampled noise amplitudes b_k(t) with per-trace weights summing to one.
struct NoiseTraces {
  /// traces[i] is (n_t x n_noise_channels).
  std::vector<RMatrix> traces;
  RVector weights;

  [[nodiscard]] std::size_t n_traces() const noexcept { return traces.size(); }
  [[nodiscard]] Eigen::Index n_steps() const {
    return traces.empty() ? 0 : traces.front().rows();
  }
  [[nodiscard]] Eigen::Index n_channels() const {
    return traces.empty() ? 0 : traces.front().cols();
  }
};

/// Trace-major CSV dump: columns trace, step, weight, ch_0..ch_{n-1}.
void write_traces_csv(std::ostream &out, const NoiseTraces &traces);

enum class QuasiStaticMode { monte_carlo, deterministic_quadrature };

/// Noise that stays constant over the whole pulse.
struct QuasiStaticGenerator {
  std::vector<double> sigma;
  /// Monte Carlo: number of draws. Quadrature: nodes per channel; the trace
  /// set is the tensor grid with n_traces^n_channels points.
  std::size_t n_traces = 1;
  QuasiStaticMode mode = QuasiStaticMode::monte_carlo;
  std::uint64_t seed = 0;
};

[[nodiscard]] NoiseTraces generate_quasi_static(const QuasiStaticGenerator &gen,
                                                Eigen::Index n_t);

/// Probabilists' Gauss-Hermite rule: integrates f(x) against the standard
/// normal density. Weights sum to one. Nodes ascend.
struct GaussHermiteRule {
  RVector nodes;
  RVector weights;
};
[[nodiscard]] GaussHermiteRule gauss_hermite(std::size_t n);

/// One-sided spectral density in ordinary frequency, amplitude^2 / Hz.
using OneSidedPsd = std::function<double(double)>;

/// Stationary Gaussian noise with a prescribed spectral density, one channel.
struct ColoredNoiseGenerator {
  OneSidedPsd psd;
  std::size_t n_traces = 1;
  double dt = 1.0;
  Eigen::Index n_samples = 2;
  std::uint64_t seed = 0;
};

/// Shapes Hermitian-symmetric complex white noise by sqrt(S) on the FFT grid
/// f_k = k / (n dt) and transforms back. The DC bin is zero. The one-sided
/// periodogram 2 dt / n |X_k|^2 has expectation S(f_k) on interior bins.
[[nodiscard]] NoiseTraces generate_colored(const ColoredNoiseGenerator &gen);

/// Frequencies f_k = k / (n dt) for k = 0..n/2.
[[nodiscard]] RVector rfft_frequencies(Eigen::Index n, double dt);

}  // namespace qoc
