#include "chern/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace chern;

int main(int argc, char** argv) {
  CLI::App app{"Chern and Segre forms and currents of singular hermitian metrics"};
  std::string config_path, out, schedule;
  int resolution = 0;
  std::uint64_t seed = 0;
  double tolerance = 0;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out, "directory for the JSON and CSV reports");
  app.add_option("--resolution", resolution, "grid points per real axis")->check(CLI::PositiveNumber);
  app.add_option("--eps-schedule", schedule, "start:ratio:count");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tolerance", tolerance, "relative tolerance")->check(CLI::PositiveNumber);
  app.require_subcommand(1);
  for (const char* name : {"symbolic", "chern-forms", "segre", "converge", "iterated", "mass", "cohomology"})
    app.add_subcommand(name)->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    const Pipeline pipeline = parse_pipeline(app.get_subcommands().front()->get_name());
    ExperimentConfig config = ExperimentConfig::defaults(pipeline);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      nlohmann::json j = nlohmann::json::parse(in);
      if (!j.contains("pipeline")) j["pipeline"] = to_string(pipeline);
      if (j["pipeline"] != to_string(pipeline))
        throw ConfigError("config pipeline '" + j["pipeline"].get<std::string>() + "' does not match the subcommand");
      config = ExperimentConfig::from_json(j);
    }
    if (!out.empty()) config.out = out;
    if (resolution) config.resolution = resolution;
    if (!schedule.empty()) config.schedule = parse_schedule(schedule);
    if (app.count("--seed")) config.seed = seed;
    if (tolerance > 0) config.tolerance = tolerance;

    const ExperimentResult r = run_experiment(config);
    write_result(config, r);
    std::cout << to_string(pipeline) << " " << config.name << ": " << to_string(r.outcome) << " ("
              << r.report["timings"]["total_seconds"].get<double>() << " s) -> " << config.out << "/" << config.name
              << ".json\n";
    return exit_code(r.outcome);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
