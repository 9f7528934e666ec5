// Scenario document parsing and validation.

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "qoc/errors.hpp"
#include "qoc/scenario.hpp"

namespace qoc {

using nlohmann::json;

namespace {

std::string join_errors(const std::vector<std::string> &errors) {
  std::string s = "invalid configuration:";
  for (const auto &e : errors) s += "\n  " + e;
  return s;
}

// Collects errors while walking the document; every lookup records what it
// could not find and returns nullopt so parsing can go on.
class Checker {
 public:
  std::vector<std::string> errors;

  void error(const std::string &path, const std::string &msg) {
    errors.push_back((path.empty() ? "/" : path) + ": " + msg);
  }

  // Reports missing required and unknown keys. False when j is not an object.
  bool keys(const json &j, const std::string &path, std::initializer_list<const char *> required,
            std::initializer_list<const char *> optional) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    for (const char *k : required)
      if (!j.contains(k)) error(path + "/" + k, "missing required key");
    for (const auto &[k, v] : j.items()) {
      bool known = false;
      for (const char *r : required) known = known || k == r;
      for (const char *o : optional) known = known || k == o;
      if (!known) error(path + "/" + k, "unknown key");
    }
    return true;
  }

  std::optional<double> number(const json &j, const std::string &path) {
    if (!j.is_number()) {
      error(path, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      error(path, "expected a finite number");
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> number(const json &obj, const std::string &path, const char *key,
                               std::optional<double> fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    return number(obj[key], path + "/" + key);
  }

  std::optional<long long> integer(const json &j, const std::string &path, long long min) {
    if (!j.is_number_integer()) {
      error(path, "expected an integer");
      return std::nullopt;
    }
    const auto v = j.get<long long>();
    if (v < min) {
      error(path, "must be at least " + std::to_string(min));
      return std::nullopt;
    }
    return v;
  }

  std::optional<long long> integer(const json &obj, const std::string &path, const char *key,
                                   long long min, std::optional<long long> fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    return integer(obj[key], path + "/" + key, min);
  }

  std::optional<bool> boolean(const json &obj, const std::string &path, const char *key,
                              bool fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) {
      error(path + "/" + key, "expected true or false");
      return std::nullopt;
    }
    return obj[key].get<bool>();
  }

  std::optional<std::string> string(const json &obj, const std::string &path, const char *key,
                                    std::optional<std::string> fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    if (!obj[key].is_string()) {
      error(path + "/" + key, "expected a string");
      return std::nullopt;
    }
    return obj[key].get<std::string>();
  }

  std::optional<complex> scalar(const json &j, const std::string &path) {
    if (j.is_number()) {
      const auto v = number(j, path);
      if (!v) return std::nullopt;
      return complex(*v, 0.0);
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
      const auto re = number(j[0], path + "/0");
      const auto im = number(j[1], path + "/1");
      if (re && im) return complex(*re, *im);
      return std::nullopt;
    }
    error(path, "expected a number or a [re, im] pair");
    return std::nullopt;
  }

  std::optional<CVector> state(const json &j, const std::string &path) {
    if (!j.is_array() || j.empty()) {
      error(path, "expected a non-empty array of amplitudes");
      return std::nullopt;
    }
    CVector v(Eigen::Index(j.size()));
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto c = scalar(j[i], path + "/" + std::to_string(i));
      if (c) v[Eigen::Index(i)] = *c;
      ok = ok && c.has_value();
    }
    if (!ok) return std::nullopt;
    return v;
  }

  std::optional<Operator> named(const std::string &name, std::size_t dim, const std::string &path) {
    const auto need_qubit = [&]() {
      if (dim != 2) error(path, "'" + name + "' is a two-level operator; dimension is " +
                                    std::to_string(dim));
      return dim == 2;
    };
    if (name == "pauli_x") return need_qubit() ? std::optional(pauli(Pauli::x)) : std::nullopt;
    if (name == "pauli_y") return need_qubit() ? std::optional(pauli(Pauli::y)) : std::nullopt;
    if (name == "pauli_z") return need_qubit() ? std::optional(pauli(Pauli::z)) : std::nullopt;
    if (name == "sigma_plus") return need_qubit() ? std::optional(pauli(Pauli::plus)) : std::nullopt;
    if (name == "sigma_minus")
      return need_qubit() ? std::optional(pauli(Pauli::minus)) : std::nullopt;
    if (name == "identity") return Operator::identity(dim);
    if (name == "zero") return Operator::zero(dim);
    if (name == "number" || name == "destroy" || name == "create") {
      CMatrix m = CMatrix::Zero(Eigen::Index(dim), Eigen::Index(dim));
      for (Eigen::Index n = 0; n < Eigen::Index(dim); ++n) {
        if (name == "number") m(n, n) = double(n);
        if (n + 1 < Eigen::Index(dim)) {
          if (name == "destroy") m(n, n + 1) = std::sqrt(double(n + 1));
          if (name == "create") m(n + 1, n) = std::sqrt(double(n + 1));
        }
      }
      return Operator(m);
    }
    error(path, "unknown operator name '" + name + "'");
    return std::nullopt;
  }

  // String name, nested numeric array, or an object with one of op / kron /
  // sum / exp plus an optional complex scale.
  std::optional<Operator> op(const json &j, const std::string &path, std::size_t dim) {
    if (j.is_string()) return named(j.get<std::string>(), dim, path);
    if (j.is_array()) return literal(j, path);
    if (!j.is_object()) {
      error(path, "expected an operator name, matrix literal, or operator object");
      return std::nullopt;
    }
    if (!keys(j, path, {}, {"op", "kron", "sum", "exp", "scale", "dim"})) return std::nullopt;
    const int forms = int(j.contains("op")) + int(j.contains("kron")) + int(j.contains("sum")) +
                      int(j.contains("exp"));
    if (forms != 1) {
      error(path, "operator object needs exactly one of op, kron, sum, exp");
      return std::nullopt;
    }
    std::size_t local_dim = dim;
    if (j.contains("dim")) {
      const auto v = integer(j["dim"], path + "/dim", 1);
      if (!v) return std::nullopt;
      local_dim = std::size_t(*v);
    }
    complex scale(1.0, 0.0);
    if (j.contains("scale")) {
      const auto s = scalar(j["scale"], path + "/scale");
      if (!s) return std::nullopt;
      scale = *s;
    }
    std::optional<Operator> out;
    if (j.contains("op")) {
      out = op(j["op"], path + "/op", local_dim);
    } else if (j.contains("kron") || j.contains("sum")) {
      const char *key = j.contains("kron") ? "kron" : "sum";
      const json &parts = j[key];
      if (!parts.is_array() || parts.empty()) {
        error(path + "/" + key, "expected a non-empty list of operators");
        return std::nullopt;
      }
      for (std::size_t i = 0; i < parts.size(); ++i) {
        // Kron factors default to qubits; sum terms share the outer dimension.
        const auto part = op(parts[i], path + "/" + key + "/" + std::to_string(i),
                             j.contains("kron") && !j.contains("dim") ? 2 : local_dim);
        if (!part) return std::nullopt;
        if (!out) {
          out = part;
        } else if (j.contains("kron")) {
          out = kron(*out, *part);
        } else if (out->dim() != part->dim()) {
          error(path + "/sum/" + std::to_string(i), "dimension mismatch in sum");
          return std::nullopt;
        } else {
          *out += *part;
        }
      }
    } else {
      const auto gen = op(j["exp"], path + "/exp", local_dim);
      if (!gen) return std::nullopt;
      out = matexp(*gen, scale);
      return out;
    }
    if (out) *out *= scale;
    return out;
  }

  std::optional<Operator> literal(const json &j, const std::string &path) {
    const std::size_t n = j.size();
    if (n == 0) {
      error(path, "empty matrix literal");
      return std::nullopt;
    }
    CMatrix m = CMatrix::Zero(Eigen::Index(n), Eigen::Index(n));
    bool ok = true;
    for (std::size_t r = 0; r < n; ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!j[r].is_array() || j[r].size() != n) {
        error(rp, "matrix literal must be square with " + std::to_string(n) + " columns");
        return std::nullopt;
      }
      for (std::size_t c = 0; c < n; ++c) {
        const auto v = scalar(j[r][c], rp + "/" + std::to_string(c));
        if (v) m(Eigen::Index(r), Eigen::Index(c)) = *v;
        ok = ok && v.has_value();
      }
    }
    if (!ok) return std::nullopt;
    return Operator(m);
  }

  // An operator of the given dimension that must be Hermitian.
  std::optional<Operator> hermitian(const json &j, const std::string &path, std::size_t dim,
                                    const std::string &what) {
    auto o = op(j, path, dim);
    if (!o) return std::nullopt;
    if (o->dim() != dim) {
      error(path, what + " has dimension " + std::to_string(o->dim()) + ", expected " +
                      std::to_string(dim));
      return std::nullopt;
    }
    if (!o->is_hermitian()) {
      error(path, what + " is not Hermitian");
      return std::nullopt;
    }
    return o;
  }

  std::optional<std::vector<double>> numbers(const json &j, const std::string &path) {
    if (j.is_number()) {
      const auto v = number(j, path);
      if (!v) return std::nullopt;
      return std::vector<double>{*v};
    }
    if (!j.is_array() || j.empty()) {
      error(path, "expected a number or a non-empty list of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto v = number(j[i], path + "/" + std::to_string(i));
      if (v) out.push_back(*v);
      ok = ok && v.has_value();
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<SpectrumConfig> spectrum(const json &j, const std::string &path) {
    if (!keys(j, path, {"amplitude"}, {"exponent", "convention"})) return std::nullopt;
    SpectrumConfig s;
    const auto a = number(j, path, "amplitude", std::nullopt);
    const auto e = number(j, path, "exponent", 0.0);
    const auto c = string(j, path, "convention", "one_sided_frequency");
    if (a && *a < 0.0) error(path + "/amplitude", "spectral density must be non-negative");
    if (c && *c != "one_sided_frequency" && *c != "two_sided_angular")
      error(path + "/convention", "expected one_sided_frequency or two_sided_angular");
    if (!a || !e || !c || *a < 0.0) return std::nullopt;
    s.amplitude = *a;
    s.exponent = *e;
    s.convention = *c == "two_sided_angular" ? SpectralDensity::Convention::two_sided_angular
                                             : SpectralDensity::Convention::one_sided_frequency;
    return s;
  }

  void minimizer(const json &j, const std::string &path, BoxMinimizerOptions &m, bool &lsq) {
    if (auto v = number(j, path, "g_tol", m.g_tol)) m.g_tol = *v;
    if (auto v = number(j, path, "f_tol", m.f_tol)) m.f_tol = *v;
    if (auto v = integer(j, path, "max_iter", 0, m.max_iter)) m.max_iter = int(*v);
    if (auto v = integer(j, path, "memory", 1, m.memory)) m.memory = int(*v);
    if (j.contains("max_seconds")) {
      if (auto v = number(j["max_seconds"], path + "/max_seconds")) {
        if (*v <= 0.0) error(path + "/max_seconds", "must be positive");
        m.max_seconds = *v;
      }
    }
    if (m.g_tol < 0.0) error(path + "/g_tol", "must be non-negative");
    if (m.f_tol < 0.0) error(path + "/f_tol", "must be non-negative");
    if (auto v = boolean(j, path, "least_squares", lsq)) lsq = *v;
  }
};

#define QOC_MINIMIZER_KEYS "g_tol", "f_tol", "max_iter", "memory", "max_seconds", "least_squares"

void parse_system(Checker &ck, const json &doc, ScenarioConfig &cfg) {
  const json &sys = doc["system"];
  if (!ck.keys(sys, "/system", {"dimension", "controls"}, {"drift", "drift_per_step", "noise", "lindblad"})) return;
  const auto dim = ck.integer(sys, "/system", "dimension", 1, std::nullopt);
  if (!dim) return;
  cfg.dimension = std::size_t(*dim);
  const std::size_t d = cfg.dimension;

  const json &ctrl = sys.value("controls", json());
  if (!ctrl.is_array() || ctrl.empty()) {
    ck.error("/system/controls", "expected a non-empty list of operators");
  } else {
    for (std::size_t k = 0; k < ctrl.size(); ++k)
      if (auto o = ck.hermitian(ctrl[k], "/system/controls/" + std::to_string(k), d,
                                "control operator C_" + std::to_string(k)))
        cfg.system.controls.push_back(*o);
  }

  if (sys.contains("drift") && sys.contains("drift_per_step"))
    ck.error("/system", "give either drift or drift_per_step");
  if (sys.contains("drift")) {
    if (auto o = ck.hermitian(sys["drift"], "/system/drift", d, "drift operator"))
      cfg.system.drift.push_back(*o);
  } else if (sys.contains("drift_per_step")) {
    const json &dr = sys["drift_per_step"];
    if (!dr.is_array() || dr.empty()) ck.error("/system/drift_per_step", "expected a list of operators");
    for (std::size_t l = 0; dr.is_array() && l < dr.size(); ++l)
      if (auto o = ck.hermitian(dr[l], "/system/drift_per_step/" + std::to_string(l), d,
                                "drift operator at step " + std::to_string(l)))
        cfg.system.drift.push_back(*o);
  }

  if (sys.contains("noise")) {
    const json &nz = sys["noise"];
    if (!nz.is_array()) ck.error("/system/noise", "expected a list of noise terms");
    for (std::size_t a = 0; nz.is_array() && a < nz.size(); ++a) {
      const std::string p = "/system/noise/" + std::to_string(a);
      if (!ck.keys(nz[a], p, {"operator"}, {"susceptibility"})) continue;
      auto o = ck.hermitian(nz[a]["operator"], p + "/operator", d,
                            "noise operator B_" + std::to_string(a));
      if (!o) continue;
      NoiseTerm term{*o, {}};
      if (nz[a].contains("susceptibility")) {
        const json &s = nz[a]["susceptibility"];
        const std::string sp = p + "/susceptibility";
        if (ck.keys(s, sp, {}, {"constant", "linear"})) {
          const auto c0 = ck.number(s, sp, "constant", 1.0);
          std::optional<std::vector<double>> lin;
          if (s.contains("linear")) lin = ck.numbers(s["linear"], sp + "/linear");
          if (lin && lin->size() != cfg.system.controls.size())
            ck.error(sp + "/linear", "needs one coefficient per control operator");
          else if (c0 && lin) {
            const RVector c = Eigen::Map<const RVector>(lin->data(), Eigen::Index(lin->size()));
            const double base = *c0;
            term.susceptibility.value = [c, base](const RVector &u, double) {
              return base + c.dot(u);
            };
            term.susceptibility.gradient = [c](const RVector &, double) { return c; };
          } else if (c0 && *c0 != 1.0) {
            const double base = *c0;
            term.susceptibility.value = [base](const RVector &, double) { return base; };
          }
        }
      }
      cfg.system.noise.push_back(std::move(term));
    }
  }

  if (sys.contains("lindblad")) {
    const json &lb = sys["lindblad"];
    if (!lb.is_array()) ck.error("/system/lindblad", "expected a list of dissipators");
    for (std::size_t n = 0; lb.is_array() && n < lb.size(); ++n) {
      const std::string p = "/system/lindblad/" + std::to_string(n);
      if (!ck.keys(lb[n], p, {"operator", "rate"}, {})) continue;
      auto o = ck.op(lb[n]["operator"], p + "/operator", d);
      const auto g = ck.number(lb[n], p, "rate", std::nullopt);
      if (g && *g < 0.0) ck.error(p + "/rate", "decay rate must be non-negative");
      if (o && o->dim() != d)
        ck.error(p + "/operator", "Lindblad operator has the wrong dimension");
      if (!o || !g || *g < 0.0 || o->dim() != d) continue;
      cfg.lindblad.operators.push_back(*o);
      cfg.lindblad.rates.push_back(LindbladRate{*g, {}, {}});
    }
  }
}

void parse_pulse(Checker &ck, const json &doc, ScenarioConfig &cfg) {
  const json &pl = doc["pulse"];
  if (!ck.keys(pl, "/pulse", {"n_t", "dt"}, {"bounds", "initial", "transfer", "amplitude"}))
    return;
  const auto n_t = ck.integer(pl, "/pulse", "n_t", 1, std::nullopt);
  auto dts = ck.numbers(pl["dt"], "/pulse/dt");
  if (!n_t || !dts) return;
  cfg.n_t = Eigen::Index(*n_t);
  if (dts->size() == 1) dts->assign(std::size_t(cfg.n_t), dts->front());
  if (Eigen::Index(dts->size()) != cfg.n_t) {
    ck.error("/pulse/dt", "needs one value or n_t values");
    return;
  }
  for (double v : *dts)
    if (!(v > 0.0)) {
      ck.error("/pulse/dt", "time steps must be positive");
      return;
    }
  cfg.dt = Eigen::Map<const RVector>(dts->data(), cfg.n_t);

  const Eigen::Index n_ctrl = Eigen::Index(cfg.system.controls.size());
  std::shared_ptr<const AmplitudeFunction> amp;
  Eigen::Index raw = n_ctrl;
  if (pl.contains("amplitude")) {
    const json &a = pl["amplitude"];
    if (ck.keys(a, "/pulse/amplitude", {"kind"}, {"omega", "scale"})) {
      const auto kind = ck.string(a, "/pulse/amplitude", "kind", std::nullopt);
      if (kind == "identity") {
      } else if (kind == "rabi") {
        const auto w = ck.number(a, "/pulse/amplitude", "omega", std::nullopt);
        if (w) amp = std::make_shared<RabiAmplitude>(*w);
        raw = 2 * n_ctrl;
      } else if (kind == "tanh") {
        const auto s = ck.number(a, "/pulse/amplitude", "scale", 1.0);
        if (s) {
          const double sc = *s;
          amp = std::make_shared<PointwiseAmplitude>(
              [sc](double x) { return sc * std::tanh(x); },
              [sc](double x) { return sc / (std::cosh(x) * std::cosh(x)); });
        }
      } else if (kind) {
        ck.error("/pulse/amplitude/kind", "expected identity, rabi, or tanh");
      }
      if (kind != "rabi" && a.contains("omega")) ck.error("/pulse/amplitude/omega", "only for rabi");
      if (kind != "tanh" && a.contains("scale")) ck.error("/pulse/amplitude/scale", "only for tanh");
    }
  }
  cfg.raw_channels = raw;

  std::optional<TransferFunction> tf;
  try {
    tf = TransferFunction::identity(cfg.dt, raw);
    if (pl.contains("transfer")) {
      const json &t = pl["transfer"];
      if (ck.keys(t, "/pulse/transfer", {"kind"}, {"oversampling", "sigma", "padding"})) {
        const auto kind = ck.string(t, "/pulse/transfer", "kind", std::nullopt);
        if (kind == "gaussian") {
          const auto os = ck.integer(t, "/pulse/transfer", "oversampling", 1, 1);
          const auto sg = ck.number(t, "/pulse/transfer", "sigma", std::nullopt);
          if (sg && !(*sg > 0.0)) ck.error("/pulse/transfer/sigma", "must be positive");
          if (os && sg && *sg > 0.0) tf = TransferFunction::gaussian(cfg.dt, raw, int(*os), *sg);
        } else if (kind && *kind != "identity") {
          ck.error("/pulse/transfer/kind", "expected identity or gaussian");
        } else if (kind && (t.contains("oversampling") || t.contains("sigma"))) {
          ck.error("/pulse/transfer", "oversampling and sigma are only for gaussian");
        }
        if (t.contains("padding")) {
          const json &p = t["padding"];
          if (ck.keys(p, "/pulse/transfer/padding", {}, {"leading", "trailing", "value", "dt"})) {
            Padding pad;
            const auto lead = ck.integer(p, "/pulse/transfer/padding", "leading", 0, 0);
            const auto trail = ck.integer(p, "/pulse/transfer/padding", "trailing", 0, 0);
            const auto val = ck.number(p, "/pulse/transfer/padding", "value", 0.0);
            const auto pdt = ck.number(p, "/pulse/transfer/padding", "dt", 0.0);
            if (lead && trail && val && pdt) {
              pad.leading = Eigen::Index(*lead);
              pad.trailing = Eigen::Index(*trail);
              pad.value = *val;
              pad.dt = *pdt;
              tf = tf->with_padding(pad);
            }
          }
        }
      }
    }
  } catch (const std::exception &e) {
    ck.error("/pulse/transfer", e.what());
    tf.reset();
  }
  if (tf) cfg.pipeline = ControlPipeline(*tf, amp);

  cfg.lower = RMatrix::Constant(cfg.n_t, raw, -std::numeric_limits<double>::infinity());
  cfg.upper = RMatrix::Constant(cfg.n_t, raw, std::numeric_limits<double>::infinity());
  if (pl.contains("bounds")) {
    const json &b = pl["bounds"];
    auto pair = [&](const json &j, const std::string &p) -> std::optional<std::pair<double, double>> {
      if (!j.is_array() || j.size() != 2) {
        ck.error(p, "expected [lower, upper]");
        return std::nullopt;
      }
      const auto lo = ck.number(j[0], p + "/0");
      const auto hi = ck.number(j[1], p + "/1");
      if (!lo || !hi) return std::nullopt;
      if (*lo > *hi) {
        ck.error(p, "lower bound above upper bound");
        return std::nullopt;
      }
      return std::pair{*lo, *hi};
    };
    if (b.is_array() && b.size() == 2 && b[0].is_number()) {
      if (auto lh = pair(b, "/pulse/bounds")) {
        cfg.lower.setConstant(lh->first);
        cfg.upper.setConstant(lh->second);
      }
    } else if (b.is_array() && Eigen::Index(b.size()) == raw) {
      for (Eigen::Index c = 0; c < raw; ++c)
        if (auto lh = pair(b[std::size_t(c)], "/pulse/bounds/" + std::to_string(c))) {
          cfg.lower.col(c).setConstant(lh->first);
          cfg.upper.col(c).setConstant(lh->second);
        }
    } else {
      ck.error("/pulse/bounds", "expected [lower, upper] or one pair per raw channel (" +
                                    std::to_string(raw) + ")");
    }
  }

  if (pl.contains("initial")) {
    const json &in = pl["initial"];
    if (ck.keys(in, "/pulse/initial", {"kind"}, {"low", "high", "value", "values"})) {
      const auto kind = ck.string(in, "/pulse/initial", "kind", std::nullopt);
      if (kind == "random") {
        cfg.initial.kind = InitialConfig::Kind::random;
        const auto lo = ck.number(in, "/pulse/initial", "low", 0.0);
        const auto hi = ck.number(in, "/pulse/initial", "high", 1.0);
        if (lo && hi && *lo > *hi) ck.error("/pulse/initial", "low above high");
        if (lo) cfg.initial.low = *lo;
        if (hi) cfg.initial.high = *hi;
      } else if (kind == "constant") {
        cfg.initial.kind = InitialConfig::Kind::constant;
        if (auto v = ck.number(in, "/pulse/initial", "value", std::nullopt)) cfg.initial.value = *v;
      } else if (kind == "values") {
        cfg.initial.kind = InitialConfig::Kind::values;
        const json &v = in.value("values", json());
        if (!v.is_array() || Eigen::Index(v.size()) != cfg.n_t) {
          ck.error("/pulse/initial/values", "expected n_t rows");
        } else {
          cfg.initial.values.resize(cfg.n_t, raw);
          for (Eigen::Index l = 0; l < cfg.n_t; ++l) {
            const std::string p = "/pulse/initial/values/" + std::to_string(l);
            const auto row = ck.numbers(v[std::size_t(l)], p);
            if (row && Eigen::Index(row->size()) == raw)
              cfg.initial.values.row(l) = Eigen::Map<const RVector>(row->data(), raw).transpose();
            else if (row)
              ck.error(p, "expected " + std::to_string(raw) + " values");
          }
        }
      } else if (kind) {
        ck.error("/pulse/initial/kind", "expected random, constant, or values");
      }
    }
  }
}

void parse_noise(Checker &ck, const json &doc, ScenarioConfig &cfg) {
  if (!doc.contains("noise")) return;
  const json &nz = doc["noise"];
  if (!nz.is_object()) {
    ck.error("/noise", "expected an object of named generators");
    return;
  }
  for (const auto &[name, g] : nz.items()) {
    const std::string p = "/noise/" + name;
    if (!ck.keys(g, p, {"kind"}, {"sigma", "n_traces", "mode", "psd", "substeps"})) continue;
    NoiseConfig nc;
    const auto kind = ck.string(g, p, "kind", std::nullopt);
    const auto n = ck.integer(g, p, "n_traces", 1, 1);
    if (n) nc.n_traces = std::size_t(*n);
    if (kind == "quasi_static") {
      nc.kind = NoiseConfig::Kind::quasi_static;
      if (!g.contains("sigma")) ck.error(p + "/sigma", "missing required key");
      else if (auto s = ck.numbers(g["sigma"], p + "/sigma")) {
        for (double v : *s)
          if (v < 0.0) ck.error(p + "/sigma", "standard deviation must be non-negative");
        nc.sigma = *s;
      }
      const auto mode = ck.string(g, p, "mode", "monte_carlo");
      if (mode == "quadrature") nc.mode = QuasiStaticMode::deterministic_quadrature;
      else if (mode && *mode != "monte_carlo")
        ck.error(p + "/mode", "expected monte_carlo or quadrature");
      if (g.contains("psd") || g.contains("substeps"))
        ck.error(p, "psd and substeps are only for colored noise");
    } else if (kind == "colored") {
      nc.kind = NoiseConfig::Kind::colored;
      if (!g.contains("psd")) ck.error(p + "/psd", "missing required key");
      else if (auto s = ck.spectrum(g["psd"], p + "/psd")) nc.psd = *s;
      if (auto m = ck.integer(g, p, "substeps", 1, 1)) nc.substeps = Eigen::Index(*m);
      if (g.contains("sigma") || g.contains("mode"))
        ck.error(p, "sigma and mode are only for quasi_static noise");
    } else if (kind) {
      ck.error(p + "/kind", "expected quasi_static or colored");
    }
    cfg.noise[name] = std::move(nc);
  }
}

void parse_costs(Checker &ck, const json &doc, ScenarioConfig &cfg) {
  const json &cs = doc["costs"];
  if (!cs.is_array() || cs.empty()) {
    ck.error("/costs", "expected a non-empty list of cost functions");
    return;
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::string p = "/costs/" + std::to_string(i);
    const json &c = cs[i];
    if (!c.is_object()) {
      ck.error(p, "expected an object");
      continue;
    }
    CostConfig cc;
    const auto kind = ck.string(c, p, "kind", std::nullopt);
    if (!kind) {
      if (!c.contains("kind")) ck.error(p + "/kind", "missing required key");
      continue;
    }
    const std::size_t d = cfg.dimension;
    auto target = [&](bool unitary) {
      if (!c.contains("target")) return;
      auto t = ck.op(c["target"], p + "/target", d);
      if (!t) return;
      if (t->dim() != d) ck.error(p + "/target", "target has the wrong dimension");
      else if (unitary && !t->is_unitary()) ck.error(p + "/target", "target is not unitary");
      else cc.target = *t;
    };
    if (*kind == "operation_infidelity" || *kind == "open_infidelity") {
      ck.keys(c, p, {"kind", "label", "target"}, {"weight"});
      cc.kind = *kind == "operation_infidelity" ? CostConfig::Kind::operation_infidelity
                                                : CostConfig::Kind::open_infidelity;
      if (cc.kind == CostConfig::Kind::open_infidelity && cfg.lindblad.operators.empty() &&
          !(doc.contains("system") && doc["system"].contains("lindblad")))
        ck.error(p, "open_infidelity needs system.lindblad");
      target(true);
    } else if (*kind == "noise_infidelity") {
      ck.keys(c, p, {"kind", "label", "target", "noise"}, {"neglect_systematic", "weight"});
      cc.kind = CostConfig::Kind::noise_infidelity;
      target(true);
      if (auto n = ck.string(c, p, "noise", std::nullopt)) {
        cc.noise = *n;
        const auto it = cfg.noise.find(*n);
        if (it == cfg.noise.end()) {
          ck.error(p + "/noise", "no noise generator named '" + *n + "'");
        } else if (cfg.system.noise.empty()) {
          ck.error(p + "/noise", "system has no noise terms");
        } else if (it->second.kind == NoiseConfig::Kind::quasi_static &&
                   !it->second.sigma.empty() && it->second.sigma.size() != cfg.system.noise.size()) {
          ck.error("/noise/" + *n + "/sigma",
                   "needs one value per system noise term (" +
                       std::to_string(cfg.system.noise.size()) + ")");
        }
      }
      if (auto v = ck.boolean(c, p, "neglect_systematic", true)) cc.neglect_systematic = *v;
    } else if (*kind == "filter_function") {
      ck.keys(c, p, {"kind", "label", "spectrum"}, {"noise_operators", "omega", "weight"});
      cc.kind = CostConfig::Kind::filter_function;
      if (c.contains("noise_operators")) {
        const json &no = c["noise_operators"];
        if (!no.is_array() || no.empty()) ck.error(p + "/noise_operators", "expected a list");
        for (std::size_t a = 0; no.is_array() && a < no.size(); ++a) {
          const std::string np = p + "/noise_operators/" + std::to_string(a);
          if (!ck.keys(no[a], np, {"operator"}, {"sensitivity"})) continue;
          auto o = ck.hermitian(no[a]["operator"], np + "/operator", d,
                                "filter-function noise operator " + std::to_string(a));
          // Sensitivities live on the transferred time grid; empty means 1.
          RVector s;
          const Eigen::Index n_out = cfg.pipeline.transfer().output_steps();
          if (no[a].contains("sensitivity")) {
            if (auto v = ck.numbers(no[a]["sensitivity"], np + "/sensitivity")) {
              if (v->size() == 1) s = RVector::Constant(n_out, v->front());
              else if (Eigen::Index(v->size()) == n_out)
                s = Eigen::Map<const RVector>(v->data(), n_out);
              else ck.error(np + "/sensitivity", "needs one value or one per transferred step");
            }
          }
          if (o) cc.ff_noise.push_back({*o, s});
        }
      } else if (cfg.system.noise.empty()) {
        ck.error(p, "filter_function needs noise_operators or system noise terms");
      }
      if (c.contains("spectrum")) {
        const json &sp = c["spectrum"];
        if (sp.is_array()) {
          for (std::size_t a = 0; a < sp.size(); ++a)
            if (auto s = ck.spectrum(sp[a], p + "/spectrum/" + std::to_string(a)))
              cc.spectra.push_back(*s);
        } else if (auto s = ck.spectrum(sp, p + "/spectrum")) {
          cc.spectra.push_back(*s);
        }
      }
      if (c.contains("omega")) {
        const json &om = c["omega"];
        const std::string op = p + "/omega";
        try {
          if (om.is_array()) {
            if (auto v = ck.numbers(om, op))
              cc.grid = FrequencyGrid::from_samples(
                  Eigen::Map<const RVector>(v->data(), Eigen::Index(v->size())));
          } else if (ck.keys(om, op, {"kind"}, {"min", "max", "n"})) {
            const auto k = ck.string(om, op, "kind", std::nullopt);
            const auto n = ck.integer(om, op, "n", 2, 200);
            if (k == "default") {
              if (n) cc.ff_points = Eigen::Index(*n);
              if (om.contains("min") || om.contains("max"))
                ck.error(op, "min and max are only for kind log");
            } else if (k == "log") {
              const auto lo = ck.number(om, op, "min", std::nullopt);
              const auto hi = ck.number(om, op, "max", std::nullopt);
              if (lo && hi && n) cc.grid = FrequencyGrid::log_spaced(*lo, *hi, Eigen::Index(*n));
            } else if (k) {
              ck.error(op + "/kind", "expected default or log");
            }
          }
        } catch (const std::exception &e) {
          ck.error(op, e.what());
        }
      }
    } else if (*kind == "leakage") {
      ck.keys(c, p, {"kind", "label", "computational"}, {"weight"});
      cc.kind = CostConfig::Kind::leakage;
      const json &ci = c.value("computational", json());
      if (!ci.is_array() || ci.empty()) {
        ck.error(p + "/computational", "expected a non-empty list of basis indices");
      } else {
        for (std::size_t k = 0; k < ci.size(); ++k)
          if (auto v = ck.integer(ci[k], p + "/computational/" + std::to_string(k), 0)) {
            if (std::size_t(*v) >= d) ck.error(p + "/computational", "index out of range");
            else cc.computational.push_back(Eigen::Index(*v));
          }
      }
    } else if (*kind == "state_infidelity") {
      ck.keys(c, p, {"kind", "label", "initial", "target"}, {"weight"});
      cc.kind = CostConfig::Kind::state_infidelity;
      auto state = [&](const char *key, CVector &out) {
        if (!c.contains(key)) return;
        auto v = ck.state(c[key], p + "/" + key);
        if (!v) return;
        if (std::size_t(v->size()) != d) ck.error(p + "/" + key, "state has the wrong dimension");
        else if (std::abs(v->norm() - 1.0) > 1e-8) ck.error(p + "/" + key, "state is not normalized");
        else out = *v;
      };
      state("initial", cc.initial_state);
      state("target", cc.target_state);
    } else {
      ck.error(p + "/kind",
               "expected operation_infidelity, noise_infidelity, filter_function, "
               "open_infidelity, leakage, or state_infidelity");
      continue;
    }
    if (auto l = ck.string(c, p, "label", std::nullopt)) {
      if (!labels.insert(*l).second) ck.error(p + "/label", "duplicate label '" + *l + "'");
      cc.label = *l;
    }
    if (c.contains("weight"))
      ck.error(p + "/weight", "weights belong to optimizer stages");
    cfg.costs.push_back(std::move(cc));
  }
}

void parse_optimizer(Checker &ck, const json &doc, ScenarioConfig &cfg) {
  const json &op = doc["optimizer"];
  if (!ck.keys(op, "/optimizer", {"stages"},
               {"seed", "n_starts", "n_threads", QOC_MINIMIZER_KEYS}))
    return;
  if (op.contains("seed")) {
    if (!op["seed"].is_number_unsigned() && !(op["seed"].is_number_integer() && op["seed"] >= 0))
      ck.error("/optimizer/seed", "expected a non-negative integer");
    else cfg.seed = op["seed"].get<std::uint64_t>();
  }
  if (auto v = ck.integer(op, "/optimizer", "n_starts", 1, 1)) cfg.n_starts = std::size_t(*v);
  if (auto v = ck.integer(op, "/optimizer", "n_threads", 0, 1)) cfg.n_threads = unsigned(*v);
  BoxMinimizerOptions base;
  bool base_lsq = false;
  ck.minimizer(op, "/optimizer", base, base_lsq);

  const json &st = op["stages"];
  if (!st.is_array()) {
    ck.error("/optimizer/stages", "expected a list of stages");
    return;
  }
  std::set<std::string> names;
  for (std::size_t s = 0; s < st.size(); ++s) {
    const std::string p = "/optimizer/stages/" + std::to_string(s);
    if (!ck.keys(st[s], p, {"name", "costs"}, {"weights", QOC_MINIMIZER_KEYS})) continue;
    StageConfig sc;
    sc.minimizer = base;
    sc.least_squares = base_lsq;
    if (auto n = ck.string(st[s], p, "name", std::nullopt)) {
      sc.name = *n;
      if (n->empty() || n->find_first_of("/\\. ") != std::string::npos)
        ck.error(p + "/name", "stage names must be non-empty without '/', '\\\\', '.', or spaces");
      if (!names.insert(*n).second) ck.error(p + "/name", "duplicate stage name '" + *n + "'");
    }
    const json &cl = st[s]["costs"];
    if (!cl.is_array() || cl.empty()) {
      ck.error(p + "/costs", "expected a non-empty list of cost labels");
    } else {
      for (std::size_t i = 0; i < cl.size(); ++i) {
        if (!cl[i].is_string()) {
          ck.error(p + "/costs/" + std::to_string(i), "expected a cost label");
          continue;
        }
        const auto label = cl[i].get<std::string>();
        bool found = false;
        for (const auto &c : cfg.costs) found = found || c.label == label;
        if (!found) ck.error(p + "/costs/" + std::to_string(i), "unknown cost label '" + label + "'");
        sc.costs.push_back(label);
      }
    }
    if (st[s].contains("weights")) {
      if (auto w = ck.numbers(st[s]["weights"], p + "/weights")) {
        if (w->size() != sc.costs.size()) ck.error(p + "/weights", "needs one weight per cost");
        for (double v : *w)
          if (v < 0.0) ck.error(p + "/weights", "weights must be non-negative");
        sc.weights = *w;
      }
    }
    ck.minimizer(st[s], p, sc.minimizer, sc.least_squares);
    cfg.stages.push_back(std::move(sc));
  }
}

void parse_semantics(Checker &ck, ScenarioConfig &cfg) {
  if (!ck.errors.empty()) return;
  try {
    cfg.system.validate(cfg.pipeline.transfer().output_steps());
  } catch (const std::exception &e) {
    ck.error("/system", e.what());
  }
  const auto out = cfg.pipeline.amplitude().output_channels(cfg.pipeline.transfer().output_channels());
  if (out != Eigen::Index(cfg.system.controls.size()))
    ck.error("/pulse/amplitude", "produces " + std::to_string(out) + " channels for " +
                                     std::to_string(cfg.system.controls.size()) + " controls");
  for (const auto &c : cfg.costs) {
    if (c.kind == CostConfig::Kind::filter_function) {
      const std::size_t channels = c.ff_noise.empty() ? cfg.system.noise.size() : c.ff_noise.size();
      if (c.spectra.size() != 1 && c.spectra.size() != channels)
        ck.error("/costs", "'" + c.label + "' needs one spectrum or one per noise operator");
    }
    if (c.kind == CostConfig::Kind::noise_infidelity) {
      const auto &n = cfg.noise.at(c.noise);
      if (n.kind == NoiseConfig::Kind::colored) {
        const RVector &fine = cfg.pipeline.transfer().output_dt();
        if ((fine.array() != fine[0]).any())
          ck.error("/noise/" + c.noise, "colored noise needs a uniform time grid");
      }
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

SpectralDensity SpectrumConfig::density() const {
  const double a = amplitude, e = exponent;
  return SpectralDensity{[a, e](double x) { return e == 0.0 ? a : a * std::pow(x, e); },
                         convention};
}

const CostConfig &ScenarioConfig::cost(const std::string &label) const {
  for (const auto &c : costs)
    if (c.label == label) return c;
  throw InvalidArgument("no cost labelled '" + label + "'");
}

std::string ScenarioConfig::hash() const {
  // FNV-1a over the canonical serialization.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : source.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

ScenarioConfig parse_config(const json &doc) {
  Checker ck;
  ScenarioConfig cfg;
  if (!doc.is_object()) {
    ck.error("", "expected a JSON object with system, pulse, costs, and optimizer blocks");
    throw ConfigError(ck.errors);
  }
  cfg.source = doc;
  ck.keys(doc, "", {"system", "pulse", "costs", "optimizer"}, {"schema_version", "noise", "name"});
  if (doc.contains("schema_version") &&
      !(doc["schema_version"].is_number_integer() && doc["schema_version"] == kSchemaVersion))
    ck.error("/schema_version", "unsupported schema version (expected " +
                                    std::to_string(kSchemaVersion) + ")");
  if (doc.contains("system")) parse_system(ck, doc, cfg);
  if (doc.contains("pulse") && cfg.dimension > 0) parse_pulse(ck, doc, cfg);
  parse_noise(ck, doc, cfg);
  if (doc.contains("costs") && cfg.dimension > 0) parse_costs(ck, doc, cfg);
  if (doc.contains("optimizer")) parse_optimizer(ck, doc, cfg);
  parse_semantics(ck, cfg);
  if (!ck.errors.empty()) throw ConfigError(ck.errors);
  return cfg;
}

ScenarioConfig parse_config_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    return parse_config(json::object());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return parse_config(doc);
}

}  // namespace qoc
