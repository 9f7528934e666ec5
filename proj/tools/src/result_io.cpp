#include "qoc/result_io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <system_error>

#include "qoc/errors.hpp"

namespace qoc {

using nlohmann::json;

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

double as_number(const json &j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InvalidArgument("result document: expected a number");
}

json vec(const RVector &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

json mat(const RMatrix &m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

RVector to_vec(const json &j) {
  RVector v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[Eigen::Index(i)] = as_number(j[i]);
  return v;
}

RMatrix to_mat(const json &j) {
  if (j.empty()) return RMatrix();
  RMatrix m(Eigen::Index(j.size()), Eigen::Index(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw InvalidArgument("result document: ragged matrix");
    m.row(Eigen::Index(r)) = to_vec(j[r]).transpose();
  }
  return m;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

const json &select_stage(const json &doc, const std::string &stage) {
  const json &stages = doc.at("stages");
  if (stages.empty()) throw InvalidArgument("result document has no stages");
  if (stage.empty()) return stages.back();
  for (const auto &s : stages)
    if (s.at("name") == stage) return s;
  std::size_t pos = 0;
  try {
    const auto idx = std::stoul(stage, &pos);
    if (pos == stage.size() && idx < stages.size()) return stages[idx];
  } catch (const std::exception &) {
  }
  throw InvalidArgument("result document has no stage '" + stage + "'");
}

const json &select_start(const json &doc, const ExportSelection &sel) {
  const json &st = select_stage(doc, sel.stage);
  const json &starts = st.at("starts");
  const std::size_t idx = sel.start < 0 ? st.at("best_start").get<std::size_t>()
                                        : std::size_t(sel.start);
  if (idx >= starts.size())
    throw InvalidArgument("stage '" + st.at("name").get<std::string>() + "' has no start " +
                          std::to_string(idx));
  return starts[idx];
}

}  // namespace

json to_json(const OptimResult &r) {
  json j;
  j["seed"] = r.seed;
  j["labels"] = r.labels;
  j["reason"] = to_string(r.reason);
  j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["final_scalar"] = number(r.final_scalar);
  j["final_costs"] = vec(r.final_costs);
  j["dt"] = vec(r.dt);
  j["initial_parameters"] = mat(r.initial_parameters);
  j["final_parameters"] = mat(r.final_parameters);
  j["final_pulse"] = {{"dt", vec(r.final_pulse.dt())}, {"values", mat(r.final_pulse.values())}};
  json hist = json::array();
  for (const auto &c : r.cost_history) hist.push_back(vec(c));
  j["cost_history"] = hist;
  json gn = json::array();
  for (double g : r.gradient_norms) gn.push_back(number(g));
  j["gradient_norms"] = gn;
  return j;
}

OptimResult optim_result_from_json(const json &j) {
  OptimResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  r.reason = termination_from_string(j.at("reason").get<std::string>());
  r.message = j.at("message").get<std::string>();
  r.iterations = j.at("iterations").get<int>();
  r.final_scalar = as_number(j.at("final_scalar"));
  r.final_costs = to_vec(j.at("final_costs"));
  r.dt = to_vec(j.at("dt"));
  r.initial_parameters = to_mat(j.at("initial_parameters"));
  r.final_parameters = to_mat(j.at("final_parameters"));
  const json &p = j.at("final_pulse");
  if (!p.at("values").empty()) r.final_pulse = PulseMatrix(to_mat(p.at("values")), to_vec(p.at("dt")));
  for (const auto &c : j.at("cost_history")) r.cost_history.push_back(to_vec(c));
  for (const auto &g : j.at("gradient_norms")) r.gradient_norms.push_back(as_number(g));
  return r;
}

json to_json(const FilterFunctionResult &ff) {
  return {{"omega", vec(ff.omega)}, {"values", mat(ff.values)}};
}

json result_document(const ScenarioConfig &cfg, const ScenarioRun &run) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config_hash"] = run.config_hash;
  doc["seed"] = run.seed;
  doc["config"] = cfg.source;
  json stages = json::array();
  for (std::size_t k = 0; k < run.stages.size(); ++k) {
    const StageRun &sr = run.stages[k];
    json st;
    st["name"] = sr.name;
    st["costs"] = cfg.stages[k].costs;
    std::vector<double> w = cfg.stages[k].weights;
    if (w.empty()) w.assign(cfg.stages[k].costs.size(), 1.0);
    st["weights"] = w;
    st["best_start"] = sr.results.best_index();
    json starts = json::array();
    for (std::size_t i = 0; i < sr.results.size(); ++i) {
      json r = to_json(sr.results.results()[i]);
      if (i < sr.filter_functions.size() && sr.filter_functions[i])
        r["filter_function"] = to_json(*sr.filter_functions[i]);
      starts.push_back(std::move(r));
    }
    st["starts"] = std::move(starts);
    stages.push_back(std::move(st));
  }
  doc["stages"] = std::move(stages);
  return doc;
}

json timing_document(const ScenarioRun &run, double wall_seconds) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config_hash"] = run.config_hash;
  doc["written"] = iso_now();
  doc["wall_seconds"] = wall_seconds;
  json stages = json::array();
  for (const auto &sr : run.stages) {
    json starts = json::array();
    for (const auto &r : sr.results.results()) {
      const RuntimeStats &s = r.stats;
      starts.push_back({{"total_seconds", s.total_seconds},
                        {"cost_seconds", s.cost_seconds},
                        {"gradient_seconds", s.gradient_seconds},
                        {"pipeline_seconds", s.pipeline_seconds},
                        {"evaluations", s.evaluations},
                        {"gradient_evaluations", s.gradient_evaluations}});
    }
    stages.push_back({{"name", sr.name}, {"starts", starts}});
  }
  doc["stages"] = stages;
  return doc;
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string export_pulse_csv(const json &doc, const ExportSelection &sel) {
  const OptimResult r = optim_result_from_json(select_start(doc, sel));
  std::ostringstream os;
  write_pulse_csv(os, r.final_pulse);
  return os.str();
}

std::string export_costs_csv(const json &doc, const ExportSelection &sel) {
  DataContainer dc;
  dc.append(optim_result_from_json(select_start(doc, sel)));
  std::ostringstream os;
  write_table_csv(os, analyse(dc).cost_tables.front());
  return os.str();
}

std::string export_filter_function_csv(const json &doc, const ExportSelection &sel) {
  const json &start = select_start(doc, sel);
  if (!start.contains("filter_function"))
    throw InvalidArgument("selected stage has no filter-function cost");
  FilterFunctionResult ff;
  ff.omega = to_vec(start["filter_function"].at("omega"));
  ff.values = to_mat(start["filter_function"].at("values"));
  std::ostringstream os;
  write_filter_function_csv(os, ff);
  return os.str();
}

}  // namespace qoc
