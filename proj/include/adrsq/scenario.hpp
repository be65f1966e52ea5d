#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adrsq/tb.hpp"

namespace adrsq {

struct TestFunctionSpec {
  std::string kind;  // gaussian-derivative | gaussian | spike | constant | random-normal | csv
  Json params;
};

struct ScenarioConstants {
  double C0 = 2.0;
  double p = 2.0;
  std::vector<double> eps;  // K(eps) curve
  std::vector<double> N;    // level-set sweep
  double eta_min = 0.1;
  double t1_bound = 1e-3;
  double global_ratio_bound = 1.0;
  std::optional<double> global_ratio_min;
  double sawtooth_bound = 1.0;
  double sawtooth_p = 2.0;    // sawtooth functional exponent, in (1, 2]
  double sublemma_p = 1.5;    // level-set exponent, in (1, 2)
  std::optional<double> goodlambda_beta;
  double tail_bound = 1.0;
  double tail_ratio_lo = 0.4;
  double tail_ratio_hi = 0.6;
};

struct TailSpec {
  int k_max_annulus = 8;
  TailQuadrature quadrature;
  int random_functions = 20;
};

struct Scenario {
  std::string name;
  std::string base_dir;  // for relative paths in the document
  SetKind set_kind = SetKind::SegmentLine;
  int resolution = 0;
  Json set_params = Json::object();
  int grid_k_min = 0;
  int grid_k_max = 0;
  GridConstants declared;
  Box whitney_window;
  int whitney_k_min = 0;
  int whitney_k_max = 0;
  Kernel kernel;
  TestSystemSpec test_system;
  ScenarioConstants constants;
  std::vector<TestFunctionSpec> test_functions;
  std::optional<TailSpec> tail;
  std::vector<std::string> stages;  // empty: every stage the command implies
  int refine = 0;
  int adr_samples = 200;
  int kernel_samples = 2000;
  std::uint64_t seed = 0;
  Json document;  // as loaded
};

/// Parses and checks a scenario document. Throws ScenarioError naming the
/// offending field, e.g. "kernel.alpha".
Scenario parse_scenario(const Json& doc, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Same scenario at resolution * 2^step with the Whitney floor lowered by
/// step levels.
Scenario refined_scenario(const Scenario& s, int step);

BoundarySet make_set(const Scenario& s);

/// Materialises a test function on the set's nodes.
BoundaryFunction make_test_function(const TestFunctionSpec& spec, const BoundarySet& set, std::uint64_t seed,
                                    const std::string& base_dir);

}  // namespace adrsq
