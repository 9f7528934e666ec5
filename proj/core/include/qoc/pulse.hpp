#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

/// Real (n_t x n_ch) matrix of piecewise-constant samples together with the
/// duration of each time step.
class PulseMatrix {
 public:
  PulseMatrix() = default;
  PulseMatrix(RMatrix values, RVector dt);
  /// Uniform grid of n_t steps of length dt.
  static PulseMatrix uniform(RMatrix values, double dt);

  [[nodiscard]] Eigen::Index n_steps() const noexcept { return values_.rows(); }
  [[nodiscard]] Eigen::Index n_channels() const noexcept { return values_.cols(); }
  [[nodiscard]] const RMatrix &values() const noexcept { return values_; }
  [[nodiscard]] const RVector &dt() const noexcept { return dt_; }
  [[nodiscard]] RVector start_times() const;
  [[nodiscard]] double total_time() const { return dt_.sum(); }

 private:
  RMatrix values_;
  RVector dt_;
};

/// Boundary samples added around the shaped pulse. Pad rows have no
/// sensitivity to the raw parameters.
struct Padding {
  Eigen::Index leading = 0;
  Eigen::Index trailing = 0;
  double value = 0.0;
  /// Duration of each pad sample; <= 0 reuses the adjacent output step.
  double dt = 0.0;
};

/// Linear, possibly time-nonlocal hardware model: vec(out) = T vec(in) + c.
/// vec() stacks channels, i.e. index = channel * n_t + step.
class TransferFunction {
 public:
  TransferFunction(RMatrix matrix, RVector offset, RVector input_dt,
                   Eigen::Index input_channels, RVector output_dt,
                   Eigen::Index output_channels, int oversampling = 1);

  static TransferFunction identity(const RVector &dt, Eigen::Index channels);
  /// Zero-order-hold oversampling followed by convolution with a Gaussian
  /// kernel of width sigma (in coarse steps), truncated at +-4 sigma and
  /// normalized to unit sum. Samples beyond the pulse edges count as zero.
  static TransferFunction gaussian(const RVector &dt, Eigen::Index channels,
                                   int oversampling, double sigma);

  /// Returns a copy with extra boundary rows.
  [[nodiscard]] TransferFunction with_padding(const Padding &pad) const;

  [[nodiscard]] const RMatrix &matrix() const noexcept { return matrix_; }
  [[nodiscard]] const RVector &offset() const noexcept { return offset_; }
  [[nodiscard]] const RVector &input_dt() const noexcept { return input_dt_; }
  [[nodiscard]] const RVector &output_dt() const noexcept { return output_dt_; }
  [[nodiscard]] Eigen::Index input_steps() const noexcept { return input_dt_.size(); }
  [[nodiscard]] Eigen::Index output_steps() const noexcept { return output_dt_.size(); }
  [[nodiscard]] Eigen::Index input_channels() const noexcept { return input_channels_; }
  [[nodiscard]] Eigen::Index output_channels() const noexcept { return output_channels_; }
  [[nodiscard]] int oversampling() const noexcept { return oversampling_; }

 private:
  RMatrix matrix_;
  RVector offset_;
  RVector input_dt_;
  RVector output_dt_;
  Eigen::Index input_channels_;
  Eigen::Index output_channels_;
  int oversampling_;
};

[[nodiscard]] PulseMatrix apply_transfer(const TransferFunction &tf,
                                         const PulseMatrix &raw);

/// Pulls dCost/d(transferred) back to dCost/d(raw) through T^T.
[[nodiscard]] RMatrix transfer_chain_gradient(const TransferFunction &tf,
                                              const RMatrix &grad_transferred);

/// Time-local, possibly nonlinear map from transferred parameters to control
/// amplitudes. Implementations work row by row.
class AmplitudeFunction {
 public:
  virtual ~AmplitudeFunction() = default;

  /// Number of output channels for a given input width; throws if the width
  /// is not supported.
  [[nodiscard]] virtual Eigen::Index output_channels(Eigen::Index input) const = 0;
  /// One row: input sample x at time t (start of the step).
  [[nodiscard]] virtual RVector forward_row(const RVector &x, double t) const = 0;
  /// d out_k / d in_i at one row, shape (out x in).
  [[nodiscard]] virtual RMatrix jacobian_row(const RVector &x, double t) const = 0;
};

class IdentityAmplitude final : public AmplitudeFunction {
 public:
  Eigen::Index output_channels(Eigen::Index input) const override { return input; }
  RVector forward_row(const RVector &x, double) const override { return x; }
  RMatrix jacobian_row(const RVector &x, double) const override {
    return RMatrix::Identity(x.size(), x.size());
  }
};

/// Same scalar function on every channel.
class PointwiseAmplitude final : public AmplitudeFunction {
 public:
  using Fn = std::function<double(double)>;
  PointwiseAmplitude(Fn f, Fn df) : f_(std::move(f)), df_(std::move(df)) {}

  Eigen::Index output_channels(Eigen::Index input) const override { return input; }
  RVector forward_row(const RVector &x, double t) const override;
  RMatrix jacobian_row(const RVector &x, double t) const override;

 private:
  Fn f_;
  Fn df_;
};

/// Rabi driving: input channel pairs (A, delta) map to A sin(omega t + delta).
class RabiAmplitude final : public AmplitudeFunction {
 public:
  explicit RabiAmplitude(double omega) : omega_(omega) {}

  Eigen::Index output_channels(Eigen::Index input) const override;
  RVector forward_row(const RVector &x, double t) const override;
  RMatrix jacobian_row(const RVector &x, double t) const override;

 private:
  double omega_;
};

/// User-provided row map and Jacobian.
class CustomAmplitude final : public AmplitudeFunction {
 public:
  using RowFn = std::function<RVector(const RVector &, double)>;
  using JacFn = std::function<RMatrix(const RVector &, double)>;
  CustomAmplitude(Eigen::Index inputs, Eigen::Index outputs, RowFn f, JacFn jac)
      : inputs_(inputs), outputs_(outputs), f_(std::move(f)), jac_(std::move(jac)) {}

  Eigen::Index output_channels(Eigen::Index input) const override;
  RVector forward_row(const RVector &x, double t) const override { return f_(x, t); }
  RMatrix jacobian_row(const RVector &x, double t) const override { return jac_(x, t); }

 private:
  Eigen::Index inputs_;
  Eigen::Index outputs_;
  RowFn f_;
  JacFn jac_;
};

[[nodiscard]] PulseMatrix apply_amplitude(const AmplitudeFunction &af,
                                          const PulseMatrix &transferred);

/// dCost/d(transferred)(l, i) = sum_k dCost/du(l, k) * du_k/dx_i at step l.
[[nodiscard]] RMatrix amplitude_jacobian_chain(const AmplitudeFunction &af,
                                               const PulseMatrix &transferred,
                                               const RMatrix &grad_u);

/// Compares the analytic Jacobian against central differences at every row
/// of `at`; throws NumericalError when the max relative deviation exceeds tol.
void check_amplitude_jacobian(const AmplitudeFunction &af, const PulseMatrix &at,
                              double tol = 1e-6);

/// Raw parameters -> transferred pulse -> control amplitudes, plus the
/// reverse gradient path.
class ControlPipeline {
 public:
  struct Forward {
    PulseMatrix transferred;
    PulseMatrix amplitudes;
  };

  ControlPipeline(TransferFunction tf,
                  std::shared_ptr<const AmplitudeFunction> af = nullptr);

  [[nodiscard]] Forward forward(const PulseMatrix &raw) const;
  /// dCost/du -> dCost/d(raw).
  [[nodiscard]] RMatrix backward(const PulseMatrix &transferred,
                                 const RMatrix &grad_u) const;

  [[nodiscard]] const TransferFunction &transfer() const noexcept { return tf_; }
  [[nodiscard]] const AmplitudeFunction &amplitude() const noexcept { return *af_; }
  [[nodiscard]] Eigen::Index raw_steps() const { return tf_.input_steps(); }
  [[nodiscard]] Eigen::Index raw_channels() const { return tf_.input_channels(); }

 private:
  TransferFunction tf_;
  std::shared_ptr<const AmplitudeFunction> af_;
};

/// CSV with columns t_start, dt, then one column per channel.
void write_pulse_csv(std::ostream &out, const PulseMatrix &pulse,
                     const std::vector<std::string> &channel_names = {});

}  // namespace qoc
