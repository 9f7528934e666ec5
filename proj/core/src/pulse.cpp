#include "qoc/pulse.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "qoc/errors.hpp"

namespace qoc {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

PulseMatrix::PulseMatrix(RMatrix values, RVector dt)
    : values_(std::move(values)), dt_(std::move(dt)) {
  if (values_.rows() < 1)
    throw InvalidArgument("PulseMatrix: at least one time step required");
  if (dt_.size() != values_.rows())
    throw InvalidArgument("PulseMatrix: " + std::to_string(dt_.size()) +
                          " step durations for " +
                          std::to_string(values_.rows()) + " steps");
  if ((dt_.array() <= 0.0).any() || !dt_.allFinite())
    throw InvalidArgument("PulseMatrix: step durations must be positive");
  if (!values_.allFinite())
    throw InvalidArgument("PulseMatrix: non-finite values");
}

PulseMatrix PulseMatrix::uniform(RMatrix values, double dt) {
  const auto n = values.rows();
  return PulseMatrix(std::move(values), RVector::Constant(n, dt));
}

RVector PulseMatrix::start_times() const {
  RVector t(dt_.size());
  double acc = 0.0;
  for (Eigen::Index l = 0; l < dt_.size(); ++l) {
    t[l] = acc;
    acc += dt_[l];
  }
  return t;
}

TransferFunction::TransferFunction(RMatrix matrix, RVector offset,
                                   RVector input_dt, Eigen::Index input_channels,
                                   RVector output_dt,
                                   Eigen::Index output_channels, int oversampling)
    : matrix_(std::move(matrix)),
      offset_(std::move(offset)),
      input_dt_(std::move(input_dt)),
      output_dt_(std::move(output_dt)),
      input_channels_(input_channels),
      output_channels_(output_channels),
      oversampling_(oversampling) {
  if (input_channels_ < 1 || output_channels_ < 1)
    throw InvalidArgument("TransferFunction: channel counts must be positive");
  if (oversampling_ < 1)
    throw InvalidArgument("TransferFunction: oversampling must be >= 1");
  if (input_dt_.size() < 1 || output_dt_.size() < 1)
    throw InvalidArgument("TransferFunction: empty time grid");
  if ((input_dt_.array() <= 0.0).any() || (output_dt_.array() <= 0.0).any())
    throw InvalidArgument("TransferFunction: step durations must be positive");
  const auto rows = output_dt_.size() * output_channels_;
  const auto cols = input_dt_.size() * input_channels_;
  if (matrix_.rows() != rows || matrix_.cols() != cols)
    throw InvalidArgument("TransferFunction: matrix is " +
                          shape_str(matrix_.rows(), matrix_.cols()) +
                          ", expected " + shape_str(rows, cols));
  if (offset_.size() != rows)
    throw InvalidArgument("TransferFunction: offset length mismatch");
  if (!matrix_.allFinite() || !offset_.allFinite())
    throw InvalidArgument("TransferFunction: non-finite entries");
}

TransferFunction TransferFunction::identity(const RVector &dt,
                                            Eigen::Index channels) {
  const auto n = dt.size() * channels;
  return TransferFunction(RMatrix::Identity(n, n), RVector::Zero(n), dt,
                          channels, dt, channels, 1);
}

TransferFunction TransferFunction::gaussian(const RVector &dt,
                                            Eigen::Index channels,
                                            int oversampling, double sigma) {
  if (oversampling < 1)
    throw InvalidArgument("gaussian transfer: oversampling must be >= 1");
  if (!(sigma >= 0.0))
    throw InvalidArgument("gaussian transfer: sigma must be >= 0");
  const Eigen::Index n_coarse = dt.size();
  const Eigen::Index n_fine = n_coarse * oversampling;

  RVector fine_dt(n_fine);
  RMatrix hold = RMatrix::Zero(n_fine, n_coarse);
  for (Eigen::Index l = 0; l < n_coarse; ++l)
    for (int j = 0; j < oversampling; ++j) {
      fine_dt[l * oversampling + j] = dt[l] / oversampling;
      hold(l * oversampling + j, l) = 1.0;
    }

  const double sigma_fine = sigma * oversampling;
  RMatrix conv = RMatrix::Identity(n_fine, n_fine);
  if (sigma_fine > 0.0) {
    const auto half = static_cast<Eigen::Index>(std::ceil(4.0 * sigma_fine));
    RVector kernel(2 * half + 1);
    for (Eigen::Index j = -half; j <= half; ++j)
      kernel[j + half] = std::exp(-double(j * j) / (2.0 * sigma_fine * sigma_fine));
    kernel /= kernel.sum();
    conv.setZero();
    for (Eigen::Index i = 0; i < n_fine; ++i)
      for (Eigen::Index m = std::max<Eigen::Index>(0, i - half);
           m <= std::min(n_fine - 1, i + half); ++m)
        conv(i, m) = kernel[i - m + half];
  }
  const RMatrix block = conv * hold;

  RMatrix t = RMatrix::Zero(n_fine * channels, n_coarse * channels);
  for (Eigen::Index c = 0; c < channels; ++c)
    t.block(c * n_fine, c * n_coarse, n_fine, n_coarse) = block;
  return TransferFunction(std::move(t), RVector::Zero(n_fine * channels), dt,
                          channels, std::move(fine_dt), channels, oversampling);
}

TransferFunction TransferFunction::with_padding(const Padding &pad) const {
  if (pad.leading < 0 || pad.trailing < 0)
    throw InvalidArgument("padding: negative sample count");
  const Eigen::Index n_old = output_steps();
  const Eigen::Index n_new = n_old + pad.leading + pad.trailing;
  const Eigen::Index ch = output_channels_;

  RVector dt_new(n_new);
  const double lead_dt = pad.dt > 0.0 ? pad.dt : output_dt_[0];
  const double trail_dt = pad.dt > 0.0 ? pad.dt : output_dt_[n_old - 1];
  dt_new.head(pad.leading).setConstant(lead_dt);
  dt_new.segment(pad.leading, n_old) = output_dt_;
  dt_new.tail(pad.trailing).setConstant(trail_dt);

  RMatrix t = RMatrix::Zero(n_new * ch, matrix_.cols());
  RVector c = RVector::Constant(n_new * ch, pad.value);
  for (Eigen::Index k = 0; k < ch; ++k) {
    t.middleRows(k * n_new + pad.leading, n_old) = matrix_.middleRows(k * n_old, n_old);
    c.segment(k * n_new + pad.leading, n_old) = offset_.segment(k * n_old, n_old);
  }
  return TransferFunction(std::move(t), std::move(c), input_dt_, input_channels_,
                          std::move(dt_new), ch, oversampling_);
}

PulseMatrix apply_transfer(const TransferFunction &tf, const PulseMatrix &raw) {
  if (raw.n_steps() != tf.input_steps() || raw.n_channels() != tf.input_channels())
    throw InvalidArgument("apply_transfer: pulse is " +
                          shape_str(raw.n_steps(), raw.n_channels()) +
                          ", transfer expects " +
                          shape_str(tf.input_steps(), tf.input_channels()));
  const RVector out = tf.matrix() * raw.values().reshaped() + tf.offset();
  return PulseMatrix(out.reshaped(tf.output_steps(), tf.output_channels()),
                     tf.output_dt());
}

RMatrix transfer_chain_gradient(const TransferFunction &tf,
                                const RMatrix &grad_transferred) {
  if (grad_transferred.rows() != tf.output_steps() ||
      grad_transferred.cols() != tf.output_channels())
    throw InvalidArgument("transfer_chain_gradient: gradient is " +
                          shape_str(grad_transferred.rows(), grad_transferred.cols()) +
                          ", transfer output is " +
                          shape_str(tf.output_steps(), tf.output_channels()));
  const RVector g = tf.matrix().transpose() * grad_transferred.reshaped();
  return g.reshaped(tf.input_steps(), tf.input_channels());
}

RVector PointwiseAmplitude::forward_row(const RVector &x, double) const {
  return x.unaryExpr([this](double v) { return f_(v); });
}

RMatrix PointwiseAmplitude::jacobian_row(const RVector &x, double) const {
  return x.unaryExpr([this](double v) { return df_(v); }).asDiagonal();
}

Eigen::Index RabiAmplitude::output_channels(Eigen::Index input) const {
  if (input % 2 != 0)
    throw InvalidArgument("RabiAmplitude: expects (amplitude, phase) channel pairs");
  return input / 2;
}

RVector RabiAmplitude::forward_row(const RVector &x, double t) const {
  RVector u(x.size() / 2);
  for (Eigen::Index k = 0; k < u.size(); ++k)
    u[k] = x[2 * k] * std::sin(omega_ * t + x[2 * k + 1]);
  return u;
}

RMatrix RabiAmplitude::jacobian_row(const RVector &x, double t) const {
  RMatrix j = RMatrix::Zero(x.size() / 2, x.size());
  for (Eigen::Index k = 0; k < j.rows(); ++k) {
    const double phase = omega_ * t + x[2 * k + 1];
    j(k, 2 * k) = std::sin(phase);
    j(k, 2 * k + 1) = x[2 * k] * std::cos(phase);
  }
  return j;
}

Eigen::Index CustomAmplitude::output_channels(Eigen::Index input) const {
  if (input != inputs_)
    throw InvalidArgument("CustomAmplitude: expects " + std::to_string(inputs_) +
                          " input channels, got " + std::to_string(input));
  return outputs_;
}

PulseMatrix apply_amplitude(const AmplitudeFunction &af,
                            const PulseMatrix &transferred) {
  const Eigen::Index n_out = af.output_channels(transferred.n_channels());
  const RVector t = transferred.start_times();
  RMatrix u(transferred.n_steps(), n_out);
  for (Eigen::Index l = 0; l < transferred.n_steps(); ++l) {
    const RVector row = af.forward_row(transferred.values().row(l).transpose(), t[l]);
    if (row.size() != n_out)
      throw InvalidArgument("apply_amplitude: row width mismatch");
    u.row(l) = row.transpose();
  }
  if (!u.allFinite())
    throw NumericalError("apply_amplitude: non-finite control amplitudes");
  return PulseMatrix(std::move(u), transferred.dt());
}

RMatrix amplitude_jacobian_chain(const AmplitudeFunction &af,
                                 const PulseMatrix &transferred,
                                 const RMatrix &grad_u) {
  const Eigen::Index n_out = af.output_channels(transferred.n_channels());
  if (grad_u.rows() != transferred.n_steps() || grad_u.cols() != n_out)
    throw InvalidArgument("amplitude_jacobian_chain: gradient is " +
                          shape_str(grad_u.rows(), grad_u.cols()) + ", expected " +
                          shape_str(transferred.n_steps(), n_out));
  const RVector t = transferred.start_times();
  RMatrix out(transferred.n_steps(), transferred.n_channels());
  for (Eigen::Index l = 0; l < transferred.n_steps(); ++l) {
    const RMatrix jac = af.jacobian_row(transferred.values().row(l).transpose(), t[l]);
    out.row(l) = grad_u.row(l) * jac;
  }
  return out;
}

void check_amplitude_jacobian(const AmplitudeFunction &af, const PulseMatrix &at,
                              double tol) {
  const RVector t = at.start_times();
  double worst = 0.0;
  for (Eigen::Index l = 0; l < at.n_steps(); ++l) {
    const RVector x = at.values().row(l).transpose();
    const RMatrix jac = af.jacobian_row(x, t[l]);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      RVector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const RVector fd = (af.forward_row(xp, t[l]) - af.forward_row(xm, t[l])) / (2.0 * h);
      const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      worst = std::max(worst, (fd - jac.col(i)).cwiseAbs().maxCoeff() / scale);
    }
  }
  if (worst > tol)
    throw NumericalError("amplitude function Jacobian disagrees with finite "
                         "differences (max deviation " + std::to_string(worst) + ")");
}

ControlPipeline::ControlPipeline(TransferFunction tf,
                                 std::shared_ptr<const AmplitudeFunction> af)
    : tf_(std::move(tf)),
      af_(af ? std::move(af) : std::make_shared<IdentityAmplitude>()) {
  (void)af_->output_channels(tf_.output_channels());
}

ControlPipeline::Forward ControlPipeline::forward(const PulseMatrix &raw) const {
  PulseMatrix transferred = apply_transfer(tf_, raw);
  PulseMatrix amplitudes = apply_amplitude(*af_, transferred);
  return {std::move(transferred), std::move(amplitudes)};
}

RMatrix ControlPipeline::backward(const PulseMatrix &transferred,
                                  const RMatrix &grad_u) const {
  return transfer_chain_gradient(tf_, amplitude_jacobian_chain(*af_, transferred, grad_u));
}

void write_pulse_csv(std::ostream &out, const PulseMatrix &pulse,
                     const std::vector<std::string> &channel_names) {
  out << "t_start,dt";
  for (Eigen::Index c = 0; c < pulse.n_channels(); ++c) {
    const auto idx = static_cast<std::size_t>(c);
    out << ',' << (idx < channel_names.size() ? channel_names[idx] : "ch_" + std::to_string(c));
  }
  out << '\n';
  const RVector t = pulse.start_times();
  out << std::setprecision(17);
  for (Eigen::Index l = 0; l < pulse.n_steps(); ++l) {
    out << t[l] << ',' << pulse.dt()[l];
    for (Eigen::Index c = 0; c < pulse.n_channels(); ++c) out << ',' << pulse.values()(l, c);
    out << '\n';
  }
}

}  // namespace qoc
