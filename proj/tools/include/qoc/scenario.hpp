#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qoc/filter_functions.hpp"
#include "qoc/optimization.hpp"

namespace qoc {

inline constexpr int kSchemaVersion = 1;

/// Every problem found while validating a config, with JSON-pointer paths.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  [[nodiscard]] const std::vector<std::string> &errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct SpectrumConfig {
  /// S(x) = amplitude * x^exponent in the chosen convention.
  double amplitude = 0.0;
  double exponent = 0.0;
  SpectralDensity::Convention convention = SpectralDensity::Convention::one_sided_frequency;

  [[nodiscard]] SpectralDensity density() const;
};

struct NoiseConfig {
  enum class Kind { quasi_static, colored };
  Kind kind = Kind::quasi_static;
  std::vector<double> sigma;
  std::size_t n_traces = 1;
  QuasiStaticMode mode = QuasiStaticMode::monte_carlo;
  SpectrumConfig psd;
  /// Colored noise: propagation sub-steps per pulse step.
  Eigen::Index substeps = 1;
};

struct CostConfig {
  enum class Kind {
    operation_infidelity,
    noise_infidelity,
    filter_function,
    open_infidelity,
    leakage,
    state_infidelity
  };
  Kind kind = Kind::operation_infidelity;
  std::string label;
  Operator target;
  std::string noise;
  bool neglect_systematic = true;
  /// Filter function: noise operators and per-step sensitivities; empty
  /// means the system noise terms.
  std::vector<FilterNoise> ff_noise;
  std::vector<SpectrumConfig> spectra;
  /// Empty omega: 1/T .. 1/dt_min with ff_points samples.
  FrequencyGrid grid;
  Eigen::Index ff_points = 200;
  std::vector<Eigen::Index> computational;
  CVector initial_state;
  CVector target_state;
};

struct StageConfig {
  std::string name;
  std::vector<std::string> costs;
  std::vector<double> weights;
  BoxMinimizerOptions minimizer;
  bool least_squares = false;
};

struct InitialConfig {
  enum class Kind { random, constant, values };
  Kind kind = Kind::random;
  double low = 0.0;
  double high = 1.0;
  double value = 0.0;
  RMatrix values;
};

struct ScenarioConfig {
  /// Canonical (sorted-key) form of the input document.
  nlohmann::json source;
  std::size_t dimension = 0;
  HamiltonianSpec system;
  LindbladSpec lindblad;

  Eigen::Index n_t = 0;
  RVector dt;
  Eigen::Index raw_channels = 0;
  RMatrix lower;
  RMatrix upper;
  InitialConfig initial;
  ControlPipeline pipeline{TransferFunction::identity(RVector::Ones(1), 1)};

  std::map<std::string, NoiseConfig> noise;
  std::vector<CostConfig> costs;
  std::vector<StageConfig> stages;

  std::uint64_t seed = 0;
  std::size_t n_starts = 1;
  unsigned n_threads = 1;

  [[nodiscard]] const CostConfig &cost(const std::string &label) const;
  /// Hex digest of the canonical source.
  [[nodiscard]] std::string hash() const;
};

/// Validates and builds; throws ConfigError carrying every error found.
[[nodiscard]] ScenarioConfig parse_config(const nlohmann::json &doc);
[[nodiscard]] ScenarioConfig parse_config_file(const std::filesystem::path &path);

[[nodiscard]] nlohmann::json preset(const std::string &name);
[[nodiscard]] std::vector<std::string> preset_names();

/// Cost objects for one stage. Noise traces are drawn from the master seed
/// and the generator name only, so every start in a stage sees the same set.
[[nodiscard]] std::vector<std::shared_ptr<const CostFunction>>
build_stage_costs(const ScenarioConfig &cfg, const StageConfig &stage);

[[nodiscard]] std::shared_ptr<const Simulator> build_stage_simulator(const ScenarioConfig &cfg,
                                                                     const StageConfig &stage);

/// The initial raw parameters of start i.
[[nodiscard]] RMatrix initial_parameters(const ScenarioConfig &cfg, std::size_t start);

struct StageRun {
  std::string name;
  DataContainer results;
  /// Per start: filter function at the final pulse, for stages with a
  /// filter-function cost.
  std::vector<std::optional<FilterFunctionResult>> filter_functions;
};

struct ScenarioRun {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StageRun> stages;
};

/// Runs all stages; start i carries its own parameters from stage to stage.
[[nodiscard]] ScenarioRun execute_scenario(const ScenarioConfig &cfg);

/// execute_scenario plus the output files. Returns the process exit status.
int run_scenario(const ScenarioConfig &cfg, const std::filesystem::path &out_dir,
                 std::ostream &log);

}  // namespace qoc
