// qoc: run, validate, and export optimal-control scenarios.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "qoc/result_io.hpp"
#include "qoc/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

int report(const qoc::ConfigError &e) {
  std::cerr << "configuration has " << e.errors().size() << " error(s):\n";
  for (const auto &msg : e.errors()) std::cerr << "  " << msg << "\n";
  return kValidation;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Quantum optimal control scenarios"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> starts;
  std::optional<unsigned> threads;
  auto *run = app.add_subcommand("run", "Run all optimizer stages of a scenario");
  run->add_option("config", config_path, "Scenario file (JSON)");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--starts", starts, "Override the number of multi-start runs")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Worker threads for multi-start (0 = all cores)");
  run->add_option("--preset", preset_name, "Built-in scenario instead of a file")
      ->check(CLI::IsMember(qoc::preset_names()));

  std::string validate_path;
  auto *validate = app.add_subcommand("validate", "Check a scenario file and list every error");
  validate->add_option("config", validate_path, "Scenario file (JSON)")->required();

  std::string pulse_from, costs_from, ff_from, export_out, stage;
  long start = -1;
  auto *exp = app.add_subcommand("export", "Write CSV data from a result document");
  auto *g = exp->add_option_group("what");
  g->add_option("--pulse", pulse_from, "Final transferred pulse");
  g->add_option("--costs", costs_from, "Cost history");
  g->add_option("--filterfn", ff_from, "Filter function at the final pulse");
  g->require_option(1);
  exp->add_option("--stage", stage, "Stage name or index (default: last)");
  exp->add_option("--start", start, "Start index (default: best)");
  exp->add_option("-o,--output", export_out, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  if (*validate) {
    try {
      const auto cfg = qoc::parse_config_file(validate_path);
      std::cout << validate_path << ": ok (" << cfg.stages.size() << " stage(s), hash "
                << cfg.hash() << ")\n";
      return kOk;
    } catch (const qoc::ConfigError &e) {
      return report(e);
    }
  }

  if (*run) {
    if (config_path.empty() == preset_name.empty()) {
      std::cerr << "run: give exactly one of <config> or --preset\n";
      return kValidation;
    }
    qoc::ScenarioConfig cfg;
    try {
      nlohmann::json doc = preset_name.empty() ? nlohmann::json() : qoc::preset(preset_name);
      if (!preset_name.empty()) {
        cfg = qoc::parse_config(doc);
      } else {
        cfg = qoc::parse_config_file(config_path);
        doc = cfg.source;
      }
      // Overrides go through the document so they are part of the recorded config.
      if (seed || starts || threads) {
        if (seed) doc["optimizer"]["seed"] = *seed;
        if (starts) doc["optimizer"]["n_starts"] = *starts;
        if (threads) doc["optimizer"]["n_threads"] = *threads;
        cfg = qoc::parse_config(doc);
      }
    } catch (const qoc::ConfigError &e) {
      return report(e);
    } catch (const std::exception &e) {
      std::cerr << "error: " << e.what() << "\n";
      return kValidation;
    }
    return qoc::run_scenario(cfg, out_dir, std::cerr);
  }

  try {
    const std::string &from = !pulse_from.empty() ? pulse_from : !costs_from.empty() ? costs_from : ff_from;
    const auto doc = qoc::read_json_file(from);
    const qoc::ExportSelection sel{stage, start};
    const std::string csv = !pulse_from.empty()   ? qoc::export_pulse_csv(doc, sel)
                            : !costs_from.empty() ? qoc::export_costs_csv(doc, sel)
                                                  : qoc::export_filter_function_csv(doc, sel);
    if (export_out.empty())
      std::cout << csv;
    else
      qoc::write_file_atomic(export_out, csv);
  } catch (const std::exception &e) {
    std::cerr << "export: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
