#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "statemat/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitPipeline = 3;

void print_report(const statemat::RunReport& r) {
  std::cout << "scenario " << r.scenario << " (seed " << r.seed << ")\n";
  if (r.batch) {
    const auto& b = *r.batch;
    std::cout << "  batch [" << b.start << ", " << b.end << "] s: error vs truth "
              << 100.0 * b.error_vs_truth << "%, model vs truth "
              << 100.0 * b.model_vs_truth << "%\n";
    if (b.lyapunov) {
      std::cout << "  lyapunov baseline: error vs truth " << 100.0 * b.lyapunov_error
                << "% (simplified " << 100.0 * b.lyapunov_simplified_error << "%)\n";
    }
  }
  if (r.recursive) {
    std::cout << "  recursive: " << r.recursive->emissions << " emissions, "
              << r.recursive->gaps << " gaps, final error "
              << 100.0 * r.recursive->final_error << "%, "
              << 1e3 * (r.recursive->mean_update_seconds + r.recursive->mean_recompute_seconds)
              << " ms per sample\n";
  }
  if (r.detection) {
    const auto& d = *r.detection;
    std::cout << "  detection: ";
    if (!d.alarm_time) {
      std::cout << "no alarm\n";
    } else {
      std::cout << "alarm at " << *d.alarm_time << " s, implicated {";
      const auto& ids = d.localization->implicated;
      for (std::size_t i = 0; i < ids.size(); ++i) std::cout << (i ? "," : "") << ids[i];
      std::cout << "} at " << *d.snapshot_time << " s\n";
    }
  }
  if (!r.files.empty()) std::cout << "  outputs in " << r.out_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate power-system state matrices from ambient fluctuations"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Simulate, estimate and detect for one scenario");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory");
  auto* seed_opt = run->add_option("--seed", seed, "Noise seed");

  std::string sweep_param;
  std::vector<std::string> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_out;
  auto* sw = app.add_subcommand("sweep", "Median error over seeds for each parameter value");
  sw->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  sw->add_option("--param", sweep_param, "window_length | noise_std | beta_w")->required();
  sw->add_option("--values", sweep_values, "Values; beta_w takes beta:w pairs")->required();
  sw->add_option("--seeds", sweep_seeds, "Seeds (default: the scenario seed)");
  sw->add_option("--out", sweep_out, "CSV path (default: <output_dir>/sweep_<param>.csv)");

  auto* val = app.add_subcommand("validate", "Parse and check a scenario");
  val->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  statemat::Scenario scenario;
  try {
    scenario = statemat::load_scenario(scenario_path);
  } catch (const statemat::Error& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  }

  if (*val) {
    std::cout << scenario_path << ": ok\n";
    return 0;
  }

  try {
    if (*run) {
      statemat::RunOptions opt;
      if (!out_dir.empty()) opt.out_dir = out_dir;
      if (*seed_opt) opt.seed = seed;
      print_report(statemat::run_scenario(scenario, opt));
      return 0;
    }
    const auto param = statemat::parse_sweep_param(sweep_param);
    if (sweep_seeds.empty()) sweep_seeds.push_back(scenario.noise.seed);
    const auto rows = statemat::sweep(scenario, param, sweep_values, sweep_seeds);
    std::filesystem::path path = sweep_out;
    if (path.empty()) {
      path = std::filesystem::path(scenario.output_dir) / ("sweep_" + sweep_param + ".csv");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    statemat::write_sweep_csv(rows, param, path);
    for (const auto& r : rows) {
      std::cout << sweep_param << '=' << r.value << ": ";
      if (r.median) {
        std::cout << "median error " << 100.0 * *r.median << "%";
      } else {
        std::cout << "no successful seeds";
      }
      std::cout << " (" << r.errors.size() << " ok, " << r.failures.size() << " failed)\n";
      for (const auto& f : r.failures) std::cout << "  " << f << '\n';
    }
    std::cout << "wrote " << path.string() << '\n';
    return 0;
  } catch (const statemat::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const statemat::PipelineError& e) {
    std::cerr << "pipeline error in " << e.what() << '\n';
    return kExitPipeline;
  } catch (const statemat::Error& e) {
    std::cerr << "pipeline error: " << e.what() << '\n';
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << '\n';
    return kExitPipeline;
  }
}
