#include "adrsq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>

namespace adrsq {

namespace {

const std::vector<std::string> kStageOrder{"geometry", "grid",      "whitney",   "kernel", "tb-hypotheses", "stopping",
                                           "sawtooth", "K-epsilon", "level-set", "t1",     "tail"};

std::vector<std::string> stages_for(Command c) {
  switch (c) {
    case Command::VerifyGeometry: return {"geometry"};
    case Command::BuildGrid:
    case Command::VerifyGrid: return {"grid"};
    case Command::RunT1: return {"geometry", "grid", "whitney", "kernel", "K-epsilon", "t1"};
    case Command::RunTb:
      return {"geometry", "grid", "whitney", "kernel", "tb-hypotheses", "stopping", "sawtooth", "level-set"};
    case Command::Tail: return {"geometry", "kernel", "tail"};
    case Command::All: return kStageOrder;
  }
  return {};
}

Json box_json(const Box& b, int dim) {
  Json lo = Json::array(), hi = Json::array();
  for (int i = 0; i < dim; ++i) {
    lo.push_back(b.lo[i]);
    hi.push_back(b.hi[i]);
  }
  return {{"lo", lo}, {"hi", hi}};
}

Table cube_table(const std::string& name, const std::vector<CubeRow>& rows) {
  Table t{name, {"cube_id", "level", "value"}, {}};
  for (const auto& r : rows) t.rows.push_back({std::to_string(r.cube), std::to_string(r.level), format_number(r.value)});
  return t;
}

bool non_increasing(const std::vector<double>& v, double slack = 0.0) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + slack) return false;
  }
  return true;
}

// Lazily built shared state; each piece is built at most once per run.
class Context {
 public:
  Context(const Scenario& s, int refine) : s_(s), refine_(refine) {}

  const Scenario& scenario() const { return s_; }
  int refine() const { return refine_; }
  int dim() const { return set().ambient_dim(); }

  const BoundarySet& set() const {
    if (!set_) set_ = std::make_unique<BoundarySet>(make_set(s_));
    return *set_;
  }
  const DyadicGrid& grid() const {
    if (!grid_) grid_ = std::make_unique<DyadicGrid>(build_grid(set(), s_.grid_k_min, s_.grid_k_max, s_.declared));
    return *grid_;
  }
  const WhitneyDecomposition& whitney() const {
    if (!whit_) {
      whit_ = std::make_unique<WhitneyDecomposition>(
          build_whitney(set(), s_.whitney_window, s_.whitney_k_min, s_.whitney_k_max));
    }
    return *whit_;
  }
  const WhitneyRegions& regions() const {
    if (!regions_) regions_ = std::make_unique<WhitneyRegions>(whitney(), grid(), set());
    return *regions_;
  }
  const ThetaField& theta1() const {
    if (!theta1_) {
      const std::vector<double> one(set().size(), 1.0);
      theta1_ = std::make_unique<ThetaField>(theta_field(s_.kernel, set(), whitney(), one, {}, refine_));
    }
    return *theta1_;
  }
  const TestSystem& system() const {
    if (!system_) {
      system_ = std::make_unique<TestSystem>(
          make_test_system(grid(), set(), s_.test_system, s_.constants.C0, s_.constants.p));
    }
    return *system_;
  }
  Json truncation() const {
    const auto t = truncation_context(regions(), refine_);
    return {{"window", box_json(t.window, dim())},
            {"whitney_levels", {t.whitney_k_min, t.whitney_k_max}},
            {"grid_levels", {t.grid_k_min, t.grid_k_max}},
            {"floor_scale", t.floor_scale},
            {"refine", t.refine},
            {"aperture_beta", regions().beta_star()}};
  }

 private:
  const Scenario& s_;
  int refine_;
  mutable std::unique_ptr<BoundarySet> set_;
  mutable std::unique_ptr<DyadicGrid> grid_;
  mutable std::unique_ptr<WhitneyDecomposition> whit_;
  mutable std::unique_ptr<WhitneyRegions> regions_;
  mutable std::unique_ptr<ThetaField> theta1_;
  mutable std::unique_ptr<TestSystem> system_;
};

StageReport stage_geometry(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& set = ctx.set();
  const auto rep = verify_adr(set, ctx.scenario().adr_samples, ctx.scenario().seed);
  st.pass = rep.pass;
  st.values = {{"c_lower", rep.c_lower},
               {"c_upper", rep.c_upper},
               {"samples", rep.samples},
               {"adr_constant", set.adr_constant()},
               {"nodes", set.size()},
               {"spacing", set.spacing()},
               {"distance_error", set.distance_error()}};
  st.context = {{"kind", to_string(set.kind())}, {"resolution", set.resolution()}, {"bounded", set.bounded()}};
  measured["adr_c_lower"] = rep.c_lower;
  measured["adr_c_upper"] = rep.c_upper;
  return st;
}

StageReport stage_grid(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& grid = ctx.grid();
  const auto rep = verify_grid(grid, ctx.set());
  st.pass = rep.pass();
  auto check = [](const GridPropertyCheck& c) {
    return Json{{"pass", c.pass}, {"violations", c.violations}, {"detail", c.detail}};
  };
  st.values = {{"cubes", grid.size()},
               {"coverage", check(rep.coverage)},
               {"nesting", check(rep.nesting)},
               {"size_bounds", check(rep.size_bounds)},
               {"surface_ball", check(rep.surface_ball)},
               {"thin_boundary", check(rep.thin_boundary)},
               {"C1", rep.C1},
               {"alpha0", rep.alpha0},
               {"eta_thin", rep.eta_thin},
               {"C2", rep.C2}};
  const auto& d = grid.declared();
  st.context = {{"levels", {grid.k_min(), grid.k_max()}},
                {"declared", {{"alpha0", d.alpha0}, {"eta_thin", d.eta_thin}, {"C1", d.C1}, {"C2", d.C2}}}};
  Table strip{"grid_thin_boundary", {"tau", "strip_ratio"}, {}};
  for (std::size_t i = 0; i < rep.tau.size(); ++i) {
    strip.rows.push_back({format_number(rep.tau[i]), format_number(rep.strip_ratio[i])});
  }
  Table cubes{"grid_cubes", {"cube_id", "level", "value"}, {}};
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const auto& c = grid.cube(static_cast<int>(q));
    cubes.rows.push_back({std::to_string(q), std::to_string(c.level), format_number(c.measure)});
  }
  st.tables = {std::move(cubes), std::move(strip)};
  measured["C1"] = rep.C1;
  measured["alpha0"] = rep.alpha0;
  measured["eta_thin"] = rep.eta_thin;
  measured["C2"] = rep.C2;
  return st;
}

StageReport stage_whitney(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& whit = ctx.whitney();
  const auto band = whit.check();
  const auto& regions = ctx.regions();
  st.pass = band.pass() && regions.beta_ok();
  st.values = {{"boxes", whit.size()},
               {"band_violations", band.band_violations},
               {"touching_pairs", band.touching_pairs},
               {"touching_violations", band.touching_violations},
               {"overlap_violations", band.overlap_violations},
               {"min_lower_ratio", band.min_lower_ratio},
               {"max_upper_ratio", band.max_upper_ratio},
               {"aperture_beta", regions.beta_star()},
               {"covered_volume", whit.covered_volume()},
               {"near_excluded_volume", whit.near_excluded_volume()},
               {"far_excluded_volume", whit.far_excluded_volume()}};
  st.context = ctx.truncation();
  Table levels{"whitney_levels", {"level", "boxes"}, {}};
  for (int k = whit.k_min(); k <= whit.k_max(); ++k) {
    levels.rows.push_back({std::to_string(k), std::to_string(whit.level(k).size())});
  }
  st.tables = {std::move(levels)};
  measured["aperture_beta"] = regions.beta_star();
  return st;
}

StageReport stage_kernel(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& k = ctx.scenario().kernel;
  const auto rep = verify_kernel(k, ctx.set(), ctx.scenario().kernel_samples, ctx.scenario().seed);
  st.pass = rep.decay_ok && rep.holder_ok;
  st.values = {{"decay_ok", rep.decay_ok},
               {"holder_ok", rep.holder_ok},
               {"measured_C_decay", rep.measured_C_decay},
               {"measured_C_holder", rep.measured_C_holder},
               {"samples", rep.samples},
               {"min_delta", rep.min_delta}};
  st.context = {{"kind", to_string(k.kind)}, {"alpha", k.alpha}, {"c_psi", k.c_psi}, {"scale", k.scale}};
  measured["kernel_C_decay"] = rep.measured_C_decay;
  measured["kernel_C_holder"] = rep.measured_C_holder;
  return st;
}

StageReport stage_hypotheses(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& sys = ctx.system();
  const auto rep = verify_tb_hypotheses(sys, ctx.regions(), ctx.scenario().kernel, ctx.refine());
  st.pass = rep.pass();
  auto worst_value = [](const std::vector<CubeRow>& rows, int cube) {
    for (const auto& r : rows) {
      if (r.cube == cube) return r.value;
    }
    return 0.0;
  };
  auto failures = [](const std::vector<CubeRow>& rows) {
    int n = 0;
    for (const auto& r : rows) n += r.pass ? 0 : 1;
    return n;
  };
  st.values = {{"eq1", {{"pass", rep.pass_eq1}, {"worst_cube", rep.worst_eq1},
                        {"worst_value", worst_value(rep.eq1, rep.worst_eq1)}, {"failures", failures(rep.eq1)},
                        {"threshold", 1.0 / sys.C0}}},
               {"eq2", {{"pass", rep.pass_eq2}, {"worst_cube", rep.worst_eq2},
                        {"worst_value", worst_value(rep.eq2, rep.worst_eq2)}, {"failures", failures(rep.eq2)},
                        {"threshold", sys.C0}}},
               {"eq3", {{"pass", rep.pass_eq3}, {"worst_cube", rep.worst_eq3},
                        {"worst_value", worst_value(rep.eq3, rep.worst_eq3)}, {"failures", failures(rep.eq3)},
                        {"threshold", sys.C0}}}};
  st.context = ctx.truncation();
  st.context["generator"] = sys.generator;
  st.context["C0"] = sys.C0;
  st.context["p"] = sys.p;
  st.tables = {cube_table("tb_eq1", rep.eq1), cube_table("tb_eq2", rep.eq2), cube_table("tb_eq3", rep.eq3)};
  measured["eq3_sup"] = worst_value(rep.eq3, rep.worst_eq3);
  return st;
}

struct StoppingState {
  std::vector<StoppingFamily> families;
};

StageReport stage_stopping(const Context& ctx, Json& measured, StoppingState& state) {
  StageReport st;
  const auto& grid = ctx.grid();
  const auto& set = ctx.set();
  const auto& sys = ctx.system();
  const double C0 = sys.C0;
  state.families.clear();
  int degenerate = 0, non_maximal = 0, disagreements = 0;
  double certificate = std::numeric_limits<double>::infinity();
  const std::vector<double> no_im;
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const int qi = static_cast<int>(q);
    auto fam = stopping_time(grid, set, qi, sys.re[q], C0);
    if (fam.degenerate) {
      ++degenerate;
    } else {
      if (!fam.maximal) ++non_maximal;
      const auto good = good_cubes(grid, qi, fam.members);
      if (good != good_cubes_by_containment(grid, qi, fam.members)) ++disagreements;
      certificate = std::min(certificate,
                             good_certificate(grid, set, good, sys.re[q], sys.complex() ? sys.im[q] : no_im));
    }
    state.families.push_back(std::move(fam));
  }
  const auto packing = verify_packing(grid, state.families, ctx.scenario().constants.eta_min);
  const bool cert_ok = !(certificate < 1.0 / C0);
  st.pass = packing.pass && degenerate == 0 && non_maximal == 0 && disagreements == 0 && cert_ok;
  st.values = {{"eta_packing_min", packing.min_eta},
               {"worst_cube", packing.worst},
               {"degenerate_families", degenerate},
               {"non_maximal_families", non_maximal},
               {"good_definition_disagreements", disagreements},
               {"good_certificate_min", std::isfinite(certificate) ? Json(certificate) : Json(nullptr)},
               {"certificate_threshold", 1.0 / C0}};
  st.context = {{"C0", C0}, {"eta_min", ctx.scenario().constants.eta_min}, {"generator", sys.generator}};
  Table fam{"stopping_families", {"cube_id", "level", "members", "packing_ratio"}, {}};
  for (const auto& f : state.families) {
    fam.rows.push_back({std::to_string(f.parent), std::to_string(grid.cube(f.parent).level),
                        std::to_string(f.members.size()), format_number(f.packing_ratio)});
  }
  st.tables = {cube_table("stopping_packing", packing.rows), std::move(fam)};
  measured["eta_packing"] = packing.min_eta;
  return st;
}

StageReport stage_sawtooth(const Context& ctx, Json& measured, const StoppingState& state) {
  StageReport st;
  const auto& grid = ctx.grid();
  const auto& regions = ctx.regions();
  const auto& k = ctx.scenario().constants;
  std::vector<double> eps = k.eps;
  if (eps.empty()) eps.push_back(std::ldexp(0.5, -grid.k_max()));
  // Inclusion Gamma_{Q,eps}(x) in Gamma_{Q_k,eps}(x) u gamma_{Q,eps}(x).
  long checks = 0, violations = 0;
  for (const auto& fam : state.families) {
    if (fam.degenerate) continue;
    for (int qk : fam.members) {
      for (int c : descendants(grid, qk)) {
        if (grid.cube(c).level != grid.k_max()) continue;
        const int x = grid.cube(c).members.front();
        for (double e : eps) {
          const auto big = cone(regions, x, {ConeKind::GammaQEps, fam.parent, e, nullptr}).boxes;
          const auto left = cone(regions, x, {ConeKind::GammaQEps, qk, e, nullptr}).boxes;
          const auto saw = cone(regions, x, {ConeKind::SawtoothGammaQEps, fam.parent, e, &fam.members}).boxes;
          ++checks;
          if (!includes(set_union(left, saw), big)) ++violations;
        }
      }
    }
  }
  std::vector<CubeRow> rows(state.families.size());
  parallel_for(state.families.size(), [&](std::size_t i) {
    const auto& fam = state.families[i];
    FunctionalSpec fs;
    fs.variant = ConeVariant::Sawtooth;
    fs.family = &fam.members;
    fs.exponent = k.sawtooth_p;
    rows[i] = {fam.parent, grid.cube(fam.parent).level, carleson_functional(regions, ctx.theta1(), fam.parent, fs), true};
  });
  double sup = 0.0;
  for (auto& r : rows) {
    r.pass = r.value <= k.sawtooth_bound;
    sup = std::max(sup, r.value);
  }
  st.pass = violations == 0 && sup <= k.sawtooth_bound;
  st.values = {{"inclusion_checks", checks},
               {"inclusion_violations", violations},
               {"sawtooth_sup", sup},
               {"sawtooth_bound", k.sawtooth_bound}};
  st.context = ctx.truncation();
  st.context["p"] = k.sawtooth_p;
  st.context["eps"] = eps;
  st.tables = {cube_table("sawtooth_functional", rows)};
  measured["sawtooth_sup"] = sup;
  return st;
}

StageReport stage_k_epsilon(const Context& ctx, Json& measured) {
  StageReport st;
  auto eps = ctx.scenario().constants.eps;
  std::sort(eps.begin(), eps.end());
  std::vector<double> K;
  Table t{"K_epsilon", {"eps", "K"}, {}};
  for (double e : eps) {
    K.push_back(K_epsilon(ctx.regions(), ctx.theta1(), e));
    t.rows.push_back({format_number(e), format_number(K.back())});
  }
  st.pass = non_increasing(K);
  st.values = {{"eps", eps}, {"K", K}, {"monotone", st.pass}};
  st.context = ctx.truncation();
  st.tables = {std::move(t)};
  measured["K_epsilon"] = K;
  return st;
}

StageReport stage_level_set(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& grid = ctx.grid();
  const auto& k = ctx.scenario().constants;
  auto N = k.N;
  std::sort(N.begin(), N.end());
  std::vector<std::vector<double>> frac(grid.size(), std::vector<double>(N.size(), 0.0));
  parallel_for(grid.size(), [&](std::size_t q) {
    for (std::size_t i = 0; i < N.size(); ++i) {
      frac[q][i] = level_set_fraction(ctx.regions(), ctx.theta1(), static_cast<int>(q), N[i], k.sublemma_p);
    }
  });
  bool monotone = true;
  std::vector<double> worst(N.size(), 0.0);
  for (const auto& row : frac) {
    monotone = monotone && non_increasing(row);
    for (std::size_t i = 0; i < N.size(); ++i) worst[i] = std::max(worst[i], row[i]);
  }
  bool goodlambda = true;
  if (k.goodlambda_beta && !N.empty()) goodlambda = worst.back() <= 1.0 - *k.goodlambda_beta;
  st.pass = monotone && goodlambda;
  st.values = {{"N", N}, {"max_fraction", worst}, {"monotone", monotone}};
  if (k.goodlambda_beta) {
    st.values["goodlambda_beta"] = *k.goodlambda_beta;
    st.values["goodlambda_holds"] = goodlambda;
  }
  st.context = ctx.truncation();
  st.context["p"] = k.sublemma_p;
  Table t{"level_set", {"N", "max_fraction"}, {}};
  for (std::size_t i = 0; i < N.size(); ++i) t.rows.push_back({format_number(N[i]), format_number(worst[i])});
  st.tables = {std::move(t)};
  measured["level_set_max_fraction"] = worst;
  return st;
}

StageReport stage_t1(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& s = ctx.scenario();
  const auto& regions = ctx.regions();
  std::vector<BoundaryFunction> fs;
  for (const auto& spec : s.test_functions) fs.push_back(make_test_function(spec, ctx.set(), s.seed, s.base_dir));
  const auto rep = t1_check(regions, ctx.theta1(), s.kernel, fs, ctx.refine(), s.constants.t1_bound,
                            s.constants.global_ratio_bound);
  bool ratio_min_ok = true;
  if (s.constants.global_ratio_min) {
    for (std::size_t i = 0; i < rep.global_ratios.size(); ++i) {
      if (s.test_functions[i].kind == "spike") continue;  // not band-limited, reported only
      ratio_min_ok = ratio_min_ok && rep.global_ratios[i] >= *s.constants.global_ratio_min;
    }
  }
  // Fubini: Carleson norm of alpha_Q = mass of U_Q equals the sup of the
  // Gamma_Q functional counted with multiplicity.
  const auto& grid = ctx.grid();
  std::vector<double> alpha(grid.size(), 0.0);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    alpha[q] = local_square_function(regions.region(static_cast<int>(q)), ctx.theta1());
  }
  double sum_sup = 0.0;
  FunctionalSpec sum_spec;
  sum_spec.multiplicity = Multiplicity::Sum;
  for (std::size_t q = 0; q < grid.size(); ++q) {
    sum_sup = std::max(sum_sup, carleson_functional(regions, ctx.theta1(), static_cast<int>(q), sum_spec));
  }
  const double norm = carleson_norm(grid, alpha);
  st.pass = rep.pass && ratio_min_ok;
  st.values = {{"carleson_sup", rep.carleson_sup},
               {"worst_cube", rep.worst_cube},
               {"t1_bound", s.constants.t1_bound},
               {"global_ratios", rep.global_ratios},
               {"l2_norms_squared", rep.l2_norms_squared},
               {"global_ratio_bound", s.constants.global_ratio_bound},
               {"alpha_carleson_norm", norm},
               {"multiplicity_functional_sup", sum_sup}};
  if (s.constants.global_ratio_min) st.values["global_ratio_min"] = *s.constants.global_ratio_min;
  st.context = ctx.truncation();
  Json kinds = Json::array();
  for (const auto& f : s.test_functions) kinds.push_back(f.kind);
  st.context["test_functions"] = kinds;
  Table g{"t1_global_ratios", {"test_function", "kind", "l2_norm_squared", "ratio"}, {}};
  for (std::size_t i = 0; i < rep.global_ratios.size(); ++i) {
    g.rows.push_back({std::to_string(i), s.test_functions[i].kind, format_number(rep.l2_norms_squared[i]),
                      format_number(rep.global_ratios[i])});
  }
  st.tables = {cube_table("t1_carleson", rep.rows), std::move(g)};
  measured["t1_carleson_sup"] = rep.carleson_sup;
  measured["global_ratios"] = rep.global_ratios;
  return st;
}

StageReport stage_tail(const Context& ctx, Json& measured) {
  StageReport st;
  const auto& s = ctx.scenario();
  if (!s.tail) throw ScenarioError("tail", "missing (needed by the tail stage)");
  const auto& set = ctx.set();
  // f = 1 first (the decay profile), then the seeded random functions:
  // a random mean plus noise, since the tail only sees the mean at leading order.
  std::vector<BoundaryFunction> fs{BoundaryFunction(set.size(), 1.0)};
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < s.tail->random_functions; ++i) {
    BoundaryFunction f(set.size());
    const double mean = u(rng);
    for (auto& v : f) v = mean + u(rng);
    fs.push_back(std::move(f));
  }
  const auto reps = bounded_tail(set, s.kernel, fs, s.tail->k_max_annulus, s.tail->quadrature);
  const auto& base = reps.front();
  bool decay_ok = !base.successive_ratios.empty();
  for (double r : base.successive_ratios) decay_ok = decay_ok && r >= s.constants.tail_ratio_lo && r <= s.constants.tail_ratio_hi;
  std::vector<double> ratios;
  for (std::size_t i = 1; i < reps.size(); ++i) ratios.push_back(reps[i].ratio_to_l2);
  const double worst = ratios.empty() ? base.ratio_to_l2 : *std::max_element(ratios.begin(), ratios.end());
  const double worst_all = std::max(worst, base.ratio_to_l2);
  st.pass = decay_ok && worst_all <= s.constants.tail_bound;
  st.values = {{"r0", base.r0},
               {"contributions", base.contributions},
               {"successive_ratios", base.successive_ratios},
               {"total", base.total},
               {"ratio_to_l2", base.ratio_to_l2},
               {"random_ratio_max", worst},
               {"random_functions", ratios.size()},
               {"tail_bound", s.constants.tail_bound},
               {"ratio_range", {s.constants.tail_ratio_lo, s.constants.tail_ratio_hi}}};
  st.context = {{"k", base.k},
                {"radial_points", s.tail->quadrature.radial_points},
                {"angular_points", s.tail->quadrature.angular_points},
                {"kernel", to_string(s.kernel.kind)}};
  Table t{"tail_annuli", {"k", "contribution", "ratio_to_previous"}, {}};
  for (std::size_t i = 0; i < base.k.size(); ++i) {
    t.rows.push_back({std::to_string(base.k[i]), format_number(base.contributions[i]),
                      i == 0 ? std::string() : format_number(base.successive_ratios[i - 1])});
  }
  Table r{"tail_random", {"function", "ratio_to_l2"}, {}};
  for (std::size_t i = 0; i < ratios.size(); ++i) r.rows.push_back({std::to_string(i), format_number(ratios[i])});
  st.tables = {std::move(t), std::move(r)};
  measured["tail_successive_ratios"] = base.successive_ratios;
  measured["tail_ratio_max"] = worst_all;
  return st;
}

}  // namespace

bool PipelineReport::pass() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageReport& s) { return s.pass; });
}

int PipelineReport::exit_status() const { return pass() ? 0 : 2; }

const StageReport* PipelineReport::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

Json PipelineReport::to_json() const {
  Json doc;
  doc["schema"] = 1;
  doc["scenario"] = scenario;
  doc["pass"] = pass();
  Json arr = Json::array();
  for (const auto& s : stages) {
    Json tables = Json::array();
    for (const auto& t : s.tables) tables.push_back(t.name + ".csv");
    arr.push_back({{"name", s.name},
                   {"pass", s.pass},
                   {"status", s.status},
                   {"values", s.values},
                   {"context", s.context},
                   {"tables", tables}});
  }
  doc["stages"] = std::move(arr);
  doc["constants_measured"] = constants_measured;
  return doc;
}

Command command_from_string(const std::string& name) {
  for (auto c : {Command::VerifyGeometry, Command::BuildGrid, Command::VerifyGrid, Command::RunT1, Command::RunTb,
                 Command::Tail, Command::All}) {
    if (to_string(c) == name) return c;
  }
  throw Error("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::VerifyGeometry: return "verify-geometry";
    case Command::BuildGrid: return "build-grid";
    case Command::VerifyGrid: return "verify-grid";
    case Command::RunT1: return "run-t1";
    case Command::RunTb: return "run-tb";
    case Command::Tail: return "tail";
    case Command::All: return "all";
  }
  return "unknown";
}

PipelineReport run_pipeline(const Scenario& scenario, Command command, const PipelineOptions& options) {
  const int refine = options.refine >= 0 ? options.refine : scenario.refine;
  Context ctx(scenario, refine);
  PipelineReport report;
  report.scenario = scenario.name;

  std::vector<std::string> wanted = stages_for(command);
  if (!scenario.stages.empty()) {
    for (const auto& name : scenario.stages) {
      if (std::find(kStageOrder.begin(), kStageOrder.end(), name) == kStageOrder.end()) {
        throw ScenarioError("stages", "unknown stage '" + name + "'");
      }
    }
    std::erase_if(wanted, [&](const std::string& n) {
      return std::find(scenario.stages.begin(), scenario.stages.end(), n) == scenario.stages.end();
    });
  }
  if (command == Command::All) {
    // The bounded tail only exists for bounded sets.
    const bool bounded = ctx.set().bounded();
    if (!bounded) std::erase(wanted, std::string("tail"));
  }

  StoppingState stopping;
  bool hypotheses_failed = false;
  const std::vector<std::string> downstream{"stopping", "sawtooth", "level-set"};
  for (const auto& name : kStageOrder) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    StageReport st;
    if (hypotheses_failed && std::find(downstream.begin(), downstream.end(), name) != downstream.end()) {
      st.name = name;
      st.pass = false;
      st.status = "hypotheses-not-met";
      st.values = {{"skipped_because", "tb-hypotheses"}};
      report.stages.push_back(std::move(st));
      continue;
    }
    log(LogLevel::Info, "stage " + name);
    try {
      if (name == "geometry") st = stage_geometry(ctx, report.constants_measured);
      else if (name == "grid") st = stage_grid(ctx, report.constants_measured);
      else if (name == "whitney") st = stage_whitney(ctx, report.constants_measured);
      else if (name == "kernel") st = stage_kernel(ctx, report.constants_measured);
      else if (name == "tb-hypotheses") st = stage_hypotheses(ctx, report.constants_measured);
      else if (name == "stopping") st = stage_stopping(ctx, report.constants_measured, stopping);
      else if (name == "sawtooth") {
        if (stopping.families.empty()) {
          StoppingState tmp;
          Json scratch;
          stage_stopping(ctx, scratch, tmp);
          stopping = std::move(tmp);
        }
        st = stage_sawtooth(ctx, report.constants_measured, stopping);
      } else if (name == "K-epsilon") st = stage_k_epsilon(ctx, report.constants_measured);
      else if (name == "level-set") st = stage_level_set(ctx, report.constants_measured);
      else if (name == "t1") st = stage_t1(ctx, report.constants_measured);
      else if (name == "tail") st = stage_tail(ctx, report.constants_measured);
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    st.name = name;
    st.status = st.pass ? "pass" : "fail";
    if (name == "tb-hypotheses" && !st.pass) hypotheses_failed = true;
    report.stages.push_back(std::move(st));
  }
  if (command == Command::BuildGrid) {
    report.files.emplace_back("grid.json", to_json(ctx.grid()).dump(1) + "\n");
  }
  return report;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string to_csv(const Table& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << contents;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_report(const PipelineReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  for (const auto& s : report.stages) {
    for (const auto& t : s.tables) write_file_atomic((dir / (t.name + ".csv")).string(), to_csv(t));
  }
  for (const auto& [name, contents] : report.files) write_file_atomic((dir / name).string(), contents);
  write_file_atomic((dir / "report.json").string(), report.to_json().dump(2) + "\n");
}

std::vector<ConvergenceRow> emit_convergence(const Scenario& scenario, int levels, const PipelineOptions& options) {
  if (levels < 2) throw Error("convergence: >= 2 levels required");
  const int refine = options.refine >= 0 ? options.refine : scenario.refine;
  std::vector<ConvergenceRow> rows;
  for (int i = 0; i < levels; ++i) {
    const auto s = refined_scenario(scenario, i);
    log(LogLevel::Info, "convergence level " + std::to_string(i) + ": resolution " + std::to_string(s.resolution));
    Context ctx(s, refine);
    ConvergenceRow row;
    row.resolution = s.resolution;
    row.whitney_k_max = s.whitney_k_max;
    if (!s.constants.eps.empty()) {
      row.K_eps = K_epsilon(ctx.regions(), ctx.theta1(), *std::min_element(s.constants.eps.begin(), s.constants.eps.end()));
    }
    std::vector<BoundaryFunction> fs;
    if (!s.test_functions.empty()) fs.push_back(make_test_function(s.test_functions.front(), ctx.set(), s.seed, s.base_dir));
    const auto t1 = t1_check(ctx.regions(), ctx.theta1(), s.kernel, fs, refine, s.constants.t1_bound,
                             s.constants.global_ratio_bound);
    row.t1_sup = t1.carleson_sup;
    row.global_ratio = t1.global_ratios.empty() ? 0.0 : t1.global_ratios.front();
    rows.push_back(row);
  }
  return rows;
}

Table convergence_table(const std::vector<ConvergenceRow>& rows) {
  Table t{"convergence", {"resolution", "whitney_k_max", "K_eps", "t1_sup", "global_ratio"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.resolution), std::to_string(r.whitney_k_max), format_number(r.K_eps),
                      format_number(r.t1_sup), format_number(r.global_ratio)});
  }
  return t;
}

}  // namespace adrsq
