#pragma once

#include <string>
#include <vector>

#include "adrsq/scenario.hpp"

namespace adrsq {

/// Per-cube or per-sweep rows, written as <name>.csv next to the report.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct StageReport {
  std::string name;
  bool pass = false;
  std::string status;  // pass | fail | hypotheses-not-met
  Json values = Json::object();
  Json context = Json::object();
  std::vector<Table> tables;
};

struct PipelineReport {
  std::string scenario;
  std::vector<StageReport> stages;
  Json constants_measured = Json::object();
  std::vector<std::pair<std::string, std::string>> files;  // extra artifacts (name, contents)

  bool pass() const;
  /// 0 when every stage passed, 2 otherwise.
  int exit_status() const;
  Json to_json() const;
  const StageReport* stage(const std::string& name) const;
};

enum class Command { VerifyGeometry, BuildGrid, VerifyGrid, RunT1, RunTb, Tail, All };

Command command_from_string(const std::string& name);
std::string to_string(Command c);

/// Errors inside a stage are rethrown with the stage name in the message.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineOptions {
  int refine = -1;  // overrides the scenario's box quadrature refinement when >= 0
};

/// Runs the stages implied by the command (restricted to the scenario's
/// stage list when it has one), in the fixed order
/// geometry, grid, whitney, kernel, tb-hypotheses, stopping, sawtooth,
/// K-epsilon, level-set, t1, tail.
PipelineReport run_pipeline(const Scenario& scenario, Command command, const PipelineOptions& options = {});

/// report.json plus one CSV per table, each written to a temporary file and
/// renamed into place.
void write_report(const PipelineReport& report, const std::string& out_dir);

void write_file_atomic(const std::string& path, const std::string& contents);

std::string to_csv(const Table& table);

/// Shortest round-trip decimal for a double.
std::string format_number(double v);

struct ConvergenceRow {
  int resolution = 0;
  int whitney_k_max = 0;
  double K_eps = 0.0;  // at the smallest configured eps (0 when none)
  double t1_sup = 0.0;
  double global_ratio = 0.0;  // first test function
};

/// Reruns the T1 part at resolution * 2^i, i < levels. Needs levels >= 2.
std::vector<ConvergenceRow> emit_convergence(const Scenario& scenario, int levels, const PipelineOptions& options = {});
Table convergence_table(const std::vector<ConvergenceRow>& rows);

}  // namespace adrsq
