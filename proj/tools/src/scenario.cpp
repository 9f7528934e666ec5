#include "qoc/scenario.hpp"

#include <chrono>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qoc/errors.hpp"
#include "qoc/parallel.hpp"
#include "qoc/result_io.hpp"

namespace qoc {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

std::uint64_t name_hash(const std::string &s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::shared_ptr<const NoiseTraces> make_traces(const ScenarioConfig &cfg, const std::string &name) {
  const NoiseConfig &nc = cfg.noise.at(name);
  const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, kNoiseStream), name_hash(name));
  const TransferFunction &tf = cfg.pipeline.transfer();
  const Eigen::Index n_fine = tf.output_steps();
  if (nc.kind == NoiseConfig::Kind::quasi_static) {
    QuasiStaticGenerator gen{nc.sigma, nc.n_traces, nc.mode, seed};
    return std::make_shared<NoiseTraces>(generate_quasi_static(gen, n_fine));
  }
  // Independent colored traces per noise channel, sampled on the sub-step grid.
  const std::size_t channels = cfg.system.noise.size();
  const Eigen::Index n_samples = n_fine * nc.substeps;
  const double dt = tf.output_dt()[0] / double(nc.substeps);
  auto out = std::make_shared<NoiseTraces>();
  out->traces.assign(nc.n_traces, RMatrix(n_samples, Eigen::Index(channels)));
  const SpectralDensity s = nc.psd.density();
  for (std::size_t a = 0; a < channels; ++a) {
    ColoredNoiseGenerator gen;
    // The generator takes a one-sided density in ordinary frequency.
    gen.psd = [s](double f) {
      return s.convention == SpectralDensity::Convention::one_sided_frequency
                 ? s.fn(f)
                 : 2.0 * s.fn(2.0 * std::numbers::pi * f);
    };
    gen.n_traces = nc.n_traces;
    gen.dt = dt;
    gen.n_samples = n_samples;
    gen.seed = derive_seed(seed, a);
    const NoiseTraces ch = generate_colored(gen);
    for (std::size_t i = 0; i < nc.n_traces; ++i) out->traces[i].col(Eigen::Index(a)) = ch.traces[i].col(0);
    out->weights = ch.weights;
  }
  return out;
}

std::shared_ptr<const CostFunction> make_cost(const ScenarioConfig &cfg, const CostConfig &c) {
  switch (c.kind) {
    case CostConfig::Kind::operation_infidelity:
      return std::make_shared<OperationInfidelity>(cfg.system, c.target, c.label);
    case CostConfig::Kind::noise_infidelity:
      return std::make_shared<OperationNoiseInfidelity>(cfg.system, c.target,
                                                        make_traces(cfg, c.noise),
                                                        c.neglect_systematic, c.label);
    case CostConfig::Kind::filter_function: {
      FilterFunctionInfidelity ff;
      ff.spec = cfg.system;
      ff.noise = c.ff_noise;
      for (const auto &s : c.spectra) ff.spectra.push_back(s.density());
      ff.grid = c.grid.omega.size() ? c.grid
                                    : FrequencyGrid::default_for(cfg.pipeline.transfer().output_dt(),
                                                                 c.ff_points);
      return std::make_shared<FilterFunctionCost>(std::move(ff), c.label);
    }
    case CostConfig::Kind::open_infidelity:
      return std::make_shared<OpenSystemInfidelity>(cfg.system, cfg.lindblad, c.target, c.label);
    case CostConfig::Kind::leakage:
      return std::make_shared<LeakageCost>(cfg.system, c.computational, c.label);
    case CostConfig::Kind::state_infidelity:
      return std::make_shared<StateInfidelity>(cfg.system, c.initial_state, c.target_state,
                                               c.label);
  }
  throw InvalidArgument("unknown cost kind");
}

const FilterFunctionCost *first_filter_cost(const Simulator &sim) {
  for (const auto &c : sim.costs())
    if (auto f = dynamic_cast<const FilterFunctionCost *>(c.get())) return f;
  return nullptr;
}

OptimResult failed_result(const Simulator &sim, const RMatrix &params, const RVector &dt,
                          std::uint64_t seed, std::string message) {
  OptimResult r;
  r.labels = sim.labels();
  r.initial_parameters = params;
  r.final_parameters = params;
  r.dt = dt;
  r.reason = Termination::error;
  r.message = std::move(message);
  r.seed = seed;
  r.final_scalar = std::numeric_limits<double>::infinity();
  return r;
}

std::string stage_dir_name(std::size_t k, const std::string &name) {
  return "stage" + std::to_string(k) + "_" + name;
}

template <typename Writer>
void write_csv(const std::filesystem::path &path, Writer &&w) {
  std::ostringstream os;
  w(os);
  write_file_atomic(path, os.str());
}

}  // namespace

std::vector<std::shared_ptr<const CostFunction>> build_stage_costs(const ScenarioConfig &cfg,
                                                                   const StageConfig &stage) {
  std::vector<std::shared_ptr<const CostFunction>> out;
  for (const auto &label : stage.costs) out.push_back(make_cost(cfg, cfg.cost(label)));
  return out;
}

std::shared_ptr<const Simulator> build_stage_simulator(const ScenarioConfig &cfg,
                                                       const StageConfig &stage) {
  return std::make_shared<Simulator>(cfg.pipeline, build_stage_costs(cfg, stage), stage.weights);
}

RMatrix initial_parameters(const ScenarioConfig &cfg, std::size_t start) {
  switch (cfg.initial.kind) {
    case InitialConfig::Kind::constant:
      return RMatrix::Constant(cfg.n_t, cfg.raw_channels, cfg.initial.value);
    case InitialConfig::Kind::values:
      return cfg.initial.values;
    case InitialConfig::Kind::random:
      break;
  }
  return random_initial(cfg.n_t, cfg.raw_channels, cfg.initial.low, cfg.initial.high,
                        derive_seed(cfg.seed, start));
}

ScenarioRun execute_scenario(const ScenarioConfig &cfg) {
  ScenarioRun run;
  run.config_hash = cfg.hash();
  run.seed = cfg.seed;
  std::vector<std::shared_ptr<const Simulator>> sims;
  for (const auto &st : cfg.stages) {
    try {
      sims.push_back(build_stage_simulator(cfg, st));
    } catch (const std::exception &e) {
      throw PipelineError("stage " + st.name, e.what());
    }
  }

  const std::size_t n_stages = cfg.stages.size();
  std::vector<std::vector<OptimResult>> results(n_stages, std::vector<OptimResult>(cfg.n_starts));
  std::vector<std::vector<std::optional<FilterFunctionResult>>> ffs(
      n_stages, std::vector<std::optional<FilterFunctionResult>>(cfg.n_starts));

  parallel_for(cfg.n_starts, cfg.n_threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(cfg.seed, i);
    RMatrix params = initial_parameters(cfg, i);
    bool failed = false;
    for (std::size_t k = 0; k < n_stages; ++k) {
      const Simulator &sim = *sims[k];
      if (failed) {
        results[k][i] = failed_result(sim, params, cfg.dt, seed, "skipped: an earlier stage failed");
        continue;
      }
      try {
        OptimizerOptions opts;
        opts.minimizer = cfg.stages[k].minimizer;
        opts.least_squares = cfg.stages[k].least_squares;
        const Optimizer opt(sims[k], cfg.lower, cfg.upper, opts);
        results[k][i] = opt.run_optimization(params, seed);
        params = results[k][i].final_parameters;
        if (const auto *ff = first_filter_cost(sim))
          ffs[k][i] = ff->model().filter_function(
              cfg.pipeline.forward(PulseMatrix(params, cfg.dt)).amplitudes);
      } catch (const std::exception &e) {
        results[k][i] = failed_result(sim, params, cfg.dt, seed,
                                      "stage " + cfg.stages[k].name + ": " + e.what());
        failed = true;
      }
    }
  });

  for (std::size_t k = 0; k < n_stages; ++k) {
    StageRun sr;
    sr.name = cfg.stages[k].name;
    sr.results.config_hash = run.config_hash;
    for (auto &r : results[k]) sr.results.append(std::move(r));
    sr.filter_functions = std::move(ffs[k]);
    run.stages.push_back(std::move(sr));
  }
  return run;
}

int run_scenario(const ScenarioConfig &cfg, const std::filesystem::path &out_dir,
                 std::ostream &log) {
  if (cfg.stages.empty()) {
    log << "warning: the optimizer has no stages; nothing to do\n";
    return 0;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioRun run;
  try {
    run = execute_scenario(cfg);
  } catch (const std::exception &e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  int status = 0;
  try {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "result.json", result_document(cfg, run).dump(2) + "\n");
    write_file_atomic(out_dir / "timing.json", timing_document(run, wall).dump(2) + "\n");
    for (std::size_t k = 0; k < run.stages.size(); ++k) {
      const StageRun &sr = run.stages[k];
      const auto dir = out_dir / stage_dir_name(k, sr.name);
      std::filesystem::create_directories(dir);
      const Analysis an = analyse(sr.results);
      for (std::size_t i = 0; i < sr.results.size(); ++i) {
        const OptimResult &r = sr.results.results()[i];
        const std::string suffix = "start" + std::to_string(i) + ".csv";
        if (r.reason == Termination::error) {
          log << "error: start " << i << ", " << r.message << "\n";
          status = 2;
          continue;
        }
        write_csv(dir / ("costs_" + suffix), [&](std::ostream &os) { write_table_csv(os, an.cost_tables[i]); });
        write_csv(dir / ("pulse_" + suffix), [&](std::ostream &os) { write_table_csv(os, an.pulse_tables[i]); });
        if (sr.filter_functions[i])
          write_csv(dir / ("filterfn_" + suffix),
                    [&](std::ostream &os) { write_filter_function_csv(os, *sr.filter_functions[i]); });
      }
      const OptimResult &best = sr.results.results()[sr.results.best_index()];
      log << "stage " << sr.name << ": best start " << sr.results.best_index() << ", "
          << to_string(best.reason) << " after " << best.iterations << " iterations;";
      for (std::size_t e = 0; e < best.labels.size() && e < std::size_t(best.final_costs.size()); ++e)
        log << " " << best.labels[e] << " = " << best.final_costs[Eigen::Index(e)];
      log << "\n";
    }
  } catch (const std::exception &e) {
    log << "error: writing results: " << e.what() << "\n";
    return 2;
  }
  log << "wrote " << out_dir.string() << " in " << wall << " s\n";
  return status;
}

}  // namespace qoc
