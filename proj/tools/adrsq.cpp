// Scenario-driven front end. Exit status: 0 when every check passes, 2 when
// a check fails, 1 on hard errors (bad input, construction failures).
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "adrsq/pipeline.hpp"

namespace {

int run(const std::string& command, const std::string& scenario_path, const std::string& out_dir, int refine,
        int levels) {
  const auto scenario = adrsq::load_scenario(scenario_path);
  adrsq::PipelineOptions options;
  options.refine = refine;
  if (command == "convergence") {
    const auto rows = adrsq::emit_convergence(scenario, levels, options);
    std::filesystem::create_directories(out_dir);
    const auto table = adrsq::convergence_table(rows);
    adrsq::write_file_atomic((std::filesystem::path(out_dir) / "convergence.csv").string(), adrsq::to_csv(table));
    std::cout << adrsq::to_csv(table);
    return 0;
  }
  const auto report = adrsq::run_pipeline(scenario, adrsq::command_from_string(command), options);
  adrsq::write_report(report, out_dir);
  for (const auto& s : report.stages) std::cout << s.name << ": " << s.status << "\n";
  return report.exit_status();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Square-function verification harness for ADR boundaries"};
  app.require_subcommand(1, 1);
  std::string scenario;
  std::string out = "out";
  int refine = -1;
  int threads = 0;
  int levels = 3;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"verify-geometry", "sample the ADR bounds of the boundary set"},
      {"build-grid", "build the dyadic grid and write grid.json"},
      {"verify-grid", "check the dyadic grid properties"},
      {"run-t1", "T1 Carleson functional, K(eps) and global square norms"},
      {"run-tb", "Tb hypotheses, stopping times, sawtooth and level sets"},
      {"tail", "annulus tail of a bounded set"},
      {"all", "every stage"},
      {"convergence", "rerun the T1 part at doubled resolutions, write convergence.csv"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "scenario JSON")->required();
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--refine", refine, "box quadrature refinement (overrides the scenario)");
    sub->add_option("--threads", threads, "worker threads, 0 for all cores")->capture_default_str();
    if (name == "convergence") sub->add_option("--levels", levels, "refinement levels (>= 2)")->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (threads < 0) {
    std::cerr << "error: --threads must be >= 0\n";
    return 1;
  }
  adrsq::set_thread_count(static_cast<unsigned>(threads));
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, scenario, out, refine, levels);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
