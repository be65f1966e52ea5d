#include "adrsq/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace adrsq {

namespace {

// Field access with dotted names in every error.
const Json& child(const Json& parent, const std::string& path, const std::string& key) {
  const std::string name = path.empty() ? key : path + "." + key;
  if (!parent.is_object()) throw ScenarioError(path, "expected an object");
  auto it = parent.find(key);
  if (it == parent.end()) throw ScenarioError(name, "missing");
  return *it;
}

double number(const Json& parent, const std::string& path, const std::string& key) {
  const auto& v = child(parent, path, key);
  if (!v.is_number()) throw ScenarioError(path.empty() ? key : path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const Json& parent, const std::string& path, const std::string& key, double fallback) {
  if (!parent.contains(key)) return fallback;
  return number(parent, path, key);
}

int integer(const Json& parent, const std::string& path, const std::string& key) {
  const auto& v = child(parent, path, key);
  if (!v.is_number_integer()) throw ScenarioError(path.empty() ? key : path + "." + key, "expected an integer");
  return v.get<int>();
}

int integer_or(const Json& parent, const std::string& path, const std::string& key, int fallback) {
  if (!parent.contains(key)) return fallback;
  return integer(parent, path, key);
}

std::string text(const Json& parent, const std::string& path, const std::string& key) {
  const auto& v = child(parent, path, key);
  if (!v.is_string()) throw ScenarioError(path.empty() ? key : path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> numbers_or(const Json& parent, const std::string& path, const std::string& key) {
  if (!parent.contains(key)) return {};
  const auto& v = child(parent, path, key);
  const std::string name = path + "." + key;
  if (!v.is_array()) throw ScenarioError(name, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ScenarioError(name, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Point point_of(const Json& v, const std::string& name, int dim) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim) {
    throw ScenarioError(name, "expected " + std::to_string(dim) + " coordinates");
  }
  Point p{0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    if (!v[i].is_number()) throw ScenarioError(name, "expected numbers");
    p[i] = v[i].get<double>();
  }
  return p;
}

}  // namespace

Scenario parse_scenario(const Json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ScenarioError("", "scenario must be a JSON object");
  Scenario s;
  s.document = doc;
  s.base_dir = base_dir;
  s.name = doc.contains("name") ? text(doc, "", "name") : "scenario";

  const auto& set = child(doc, "", "set");
  try {
    s.set_kind = set_kind_from_string(text(set, "set", "kind"));
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError("set.kind", e.what());
  }
  s.resolution = integer(set, "set", "resolution");
  if (s.resolution < 1) throw ScenarioError("set.resolution", "must be positive");
  if (set.contains("params")) {
    if (!set["params"].is_object()) throw ScenarioError("set.params", "expected an object");
    s.set_params = set["params"];
  }
  const int dim = s.set_kind == SetKind::Sphere ? 3 : 2;

  const auto& grid = child(doc, "", "grid");
  s.grid_k_min = integer(grid, "grid", "k_min");
  s.grid_k_max = integer(grid, "grid", "k_max");
  if (s.grid_k_max < s.grid_k_min) throw ScenarioError("grid.k_max", "must be >= grid.k_min");
  if (grid.contains("declared")) {
    const auto& d = grid["declared"];
    s.declared.alpha0 = number_or(d, "grid.declared", "alpha0", s.declared.alpha0);
    s.declared.eta_thin = number_or(d, "grid.declared", "eta_thin", s.declared.eta_thin);
    s.declared.C1 = number_or(d, "grid.declared", "C1", s.declared.C1);
    s.declared.C2 = number_or(d, "grid.declared", "C2", s.declared.C2);
  }

  const auto& whit = child(doc, "", "whitney");
  const auto& window = child(whit, "whitney", "window");
  s.whitney_window.lo = point_of(child(window, "whitney.window", "lo"), "whitney.window.lo", dim);
  s.whitney_window.hi = point_of(child(window, "whitney.window", "hi"), "whitney.window.hi", dim);
  s.whitney_k_min = integer(whit, "whitney", "k_min");
  s.whitney_k_max = integer(whit, "whitney", "k_max");
  if (s.whitney_k_max < s.whitney_k_min) throw ScenarioError("whitney.k_max", "must be >= whitney.k_min");

  const auto& kernel = child(doc, "", "kernel");
  try {
    s.kernel.kind = kernel_kind_from_string(text(kernel, "kernel", "kind"));
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError("kernel.kind", e.what());
  }
  s.kernel.alpha = number(kernel, "kernel", "alpha");
  if (!(s.kernel.alpha > 0.0)) throw ScenarioError("kernel.alpha", "must be positive");
  s.kernel.c_psi = number(kernel, "kernel", "c_psi");
  if (!(s.kernel.c_psi > 0.0)) throw ScenarioError("kernel.c_psi", "must be positive");
  s.kernel.scale = number_or(kernel, "kernel", "scale", 1.0);
  s.kernel.coefficient = number_or(kernel, "kernel", "coefficient", 1.0);
  s.kernel.n = dim - 1;
  if (s.kernel.kind == KernelKind::PoissonDerivative && dim != 2) {
    throw ScenarioError("kernel.kind", "PoissonDerivative is defined for n = 1 only");
  }

  if (!doc.contains("seed")) throw ScenarioError("seed", "missing (every randomised step draws from it)");
  if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) {
    throw ScenarioError("seed", "expected a nonnegative integer");
  }
  if (doc["seed"].is_number_integer() && doc["seed"].get<long long>() < 0) {
    throw ScenarioError("seed", "expected a nonnegative integer");
  }
  s.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("test_system")) {
    const auto& ts = doc["test_system"];
    try {
      s.test_system.kind = test_system_kind_from_string(text(ts, "test_system", "generator"));
    } catch (const ScenarioError&) {
      throw;
    } catch (const Error& e) {
      throw ScenarioError("test_system.generator", e.what());
    }
    s.test_system.value = number_or(ts, "test_system", "value", 1.0);
    s.test_system.complex = ts.value("complex", false);
    if (s.test_system.kind == TestSystemKind::RandomAccretive) {
      s.test_system.seed = ts.contains("seed") ? static_cast<std::uint64_t>(integer(ts, "test_system", "seed")) : s.seed;
    }
  }

  const Json empty = Json::object();
  const auto& c = doc.contains("constants") ? doc["constants"] : empty;
  auto& k = s.constants;
  k.C0 = number_or(c, "constants", "C0", k.C0);
  if (!(k.C0 > 0.0)) throw ScenarioError("constants.C0", "must be positive");
  k.p = number_or(c, "constants", "p", k.p);
  if (!(k.p > 1.0) || !std::isfinite(k.p)) throw ScenarioError("constants.p", "must lie in (1, inf)");
  k.eps = numbers_or(c, "constants", "eps");
  for (double e : k.eps) {
    if (!(e > 0.0)) throw ScenarioError("constants.eps", "entries must be positive");
  }
  k.N = numbers_or(c, "constants", "N");
  for (double n : k.N) {
    if (!(n > 0.0)) throw ScenarioError("constants.N", "entries must be positive");
  }
  k.eta_min = number_or(c, "constants", "eta_min", k.eta_min);
  if (!(k.eta_min > 0.0)) throw ScenarioError("constants.eta_min", "must be positive");
  k.t1_bound = number_or(c, "constants", "t1_bound", k.t1_bound);
  k.global_ratio_bound = number_or(c, "constants", "global_ratio_bound", k.global_ratio_bound);
  if (c.contains("global_ratio_min")) k.global_ratio_min = number(c, "constants", "global_ratio_min");
  k.sawtooth_bound = number_or(c, "constants", "sawtooth_bound", k.sawtooth_bound);
  k.sawtooth_p = number_or(c, "constants", "sawtooth_p", k.sawtooth_p);
  if (!(k.sawtooth_p > 1.0 && k.sawtooth_p <= 2.0)) throw ScenarioError("constants.sawtooth_p", "must lie in (1, 2]");
  k.sublemma_p = number_or(c, "constants", "sublemma_p", k.sublemma_p);
  if (!(k.sublemma_p > 1.0 && k.sublemma_p < 2.0)) throw ScenarioError("constants.sublemma_p", "must lie in (1, 2)");
  if (c.contains("goodlambda_beta")) {
    k.goodlambda_beta = number(c, "constants", "goodlambda_beta");
    if (!(*k.goodlambda_beta > 0.0 && *k.goodlambda_beta < 1.0)) {
      throw ScenarioError("constants.goodlambda_beta", "must lie in (0, 1)");
    }
  }
  k.tail_bound = number_or(c, "constants", "tail_bound", k.tail_bound);
  if (c.contains("tail_ratio_range")) {
    const auto r = numbers_or(c, "constants", "tail_ratio_range");
    if (r.size() != 2 || !(r[0] < r[1])) throw ScenarioError("constants.tail_ratio_range", "expected [lo, hi]");
    k.tail_ratio_lo = r[0];
    k.tail_ratio_hi = r[1];
  }

  if (doc.contains("test_functions")) {
    const auto& tf = doc["test_functions"];
    if (!tf.is_array()) throw ScenarioError("test_functions", "expected an array");
    for (std::size_t i = 0; i < tf.size(); ++i) {
      const std::string path = "test_functions[" + std::to_string(i) + "]";
      TestFunctionSpec f;
      f.kind = text(tf[i], path, "kind");
      f.params = tf[i];
      static const std::vector<std::string> kinds{"gaussian-derivative", "gaussian", "spike", "constant",
                                                  "random-normal", "csv"};
      if (std::find(kinds.begin(), kinds.end(), f.kind) == kinds.end()) {
        throw ScenarioError(path + ".kind", "unknown test function '" + f.kind + "'");
      }
      if (f.kind == "csv") text(tf[i], path, "path");
      if (f.kind == "spike") integer(tf[i], path, "node");
      s.test_functions.push_back(std::move(f));
    }
  }

  if (doc.contains("tail")) {
    const auto& t = doc["tail"];
    TailSpec ts;
    ts.k_max_annulus = integer(t, "tail", "k_max_annulus");
    if (ts.k_max_annulus < 3) throw ScenarioError("tail.k_max_annulus", "must be >= 3");
    ts.quadrature.radial_points = integer_or(t, "tail", "radial_points", ts.quadrature.radial_points);
    ts.quadrature.angular_points = integer_or(t, "tail", "angular_points", ts.quadrature.angular_points);
    ts.random_functions = integer_or(t, "tail", "random_functions", ts.random_functions);
    if (ts.quadrature.radial_points < 1) throw ScenarioError("tail.radial_points", "must be positive");
    if (ts.quadrature.angular_points < 4) throw ScenarioError("tail.angular_points", "must be >= 4");
    if (ts.random_functions < 0) throw ScenarioError("tail.random_functions", "must be >= 0");
    s.tail = ts;
  }

  if (doc.contains("stages")) {
    const auto& st = doc["stages"];
    if (!st.is_array()) throw ScenarioError("stages", "expected an array of stage names");
    for (const auto& v : st) {
      if (!v.is_string()) throw ScenarioError("stages", "expected an array of stage names");
      s.stages.push_back(v.get<std::string>());
    }
  }
  s.refine = integer_or(doc, "", "refine", 0);
  if (s.refine < 0 || s.refine > 4) throw ScenarioError("refine", "must lie in [0, 4]");
  s.adr_samples = integer_or(doc, "", "adr_samples", s.adr_samples);
  s.kernel_samples = integer_or(doc, "", "kernel_samples", s.kernel_samples);
  if (s.adr_samples < 1) throw ScenarioError("adr_samples", "must be positive");
  if (s.kernel_samples < 1) throw ScenarioError("kernel_samples", "must be positive");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_scenario(doc, dir.empty() ? "." : dir.string());
}

Scenario refined_scenario(const Scenario& s, int step) {
  Scenario r = s;
  r.resolution = s.resolution << step;
  r.whitney_k_max = s.whitney_k_max + step;
  return r;
}

BoundarySet make_set(const Scenario& s) {
  Json params = s.set_params;
  return BoundarySet::make(s.set_kind, s.resolution, params);
}

BoundaryFunction make_test_function(const TestFunctionSpec& spec, const BoundarySet& set, std::uint64_t seed,
                                    const std::string& base_dir) {
  BoundaryFunction f(set.size(), 0.0);
  const auto& p = spec.params;
  if (spec.kind == "gaussian-derivative" || spec.kind == "gaussian") {
    const double c = p.value("center", 0.5);
    const double w = p.value("width", 0.125);
    const double cut = p.value("cutoff", 8.0);
    if (!(w > 0.0)) throw ScenarioError("test_functions.width", "must be positive");
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = set.point(static_cast<int>(i))[0] - c;
      if (std::abs(x) > cut * w) continue;
      const double g = std::exp(-x * x / (2.0 * w * w));
      f[i] = spec.kind == "gaussian" ? g : x * g;
    }
  } else if (spec.kind == "spike") {
    const int node = p.at("node").get<int>();
    if (node < 0 || node >= static_cast<int>(set.size())) throw ScenarioError("test_functions.node", "out of range");
    f[node] = 1.0;
  } else if (spec.kind == "constant") {
    const double v = p.value("value", 1.0);
    for (auto& x : f) x = v;
  } else if (spec.kind == "random-normal") {
    std::mt19937_64 rng(p.value("seed", seed));
    std::normal_distribution<double> g;
    for (auto& x : f) x = g(rng);
  } else if (spec.kind == "csv") {
    auto path = std::filesystem::path(p.at("path").get<std::string>());
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    f = read_boundary_function_csv(path.string(), set);
  } else {
    throw ScenarioError("test_functions.kind", "unknown test function '" + spec.kind + "'");
  }
  return f;
}

}  // namespace adrsq
