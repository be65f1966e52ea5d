#include "adrsq/tb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace adrsq {

namespace {

std::vector<int> leaves_under(const DyadicGrid& grid, int q) {
  std::vector<int> out;
  for (int c : descendants(grid, q)) {
    if (grid.cube(c).level == grid.k_max()) out.push_back(c);
  }
  return out;
}

ConeKind rooted_kind(ConeVariant v) {
  switch (v) {
    case ConeVariant::Gamma: return ConeKind::GammaQ;
    case ConeVariant::Sawtooth: return ConeKind::SawtoothGammaQ;
    case ConeVariant::Truncated: return ConeKind::GammaQEps;
    case ConeVariant::SawtoothTruncated: return ConeKind::SawtoothGammaQEps;
  }
  return ConeKind::GammaQ;
}

double box_sum(const std::vector<int>& boxes, const ThetaField& field) {
  double s = 0.0;
  for (int b : boxes) {
    if (b < 0 || b >= static_cast<int>(field.computed.size()) || !field.computed[b]) {
      throw Error("square function: no Theta value for Whitney box " + std::to_string(b));
    }
    s += field.mass[b];
  }
  return s;
}

// Square function of one cone given the cubes it joins.
double cone_mass(const WhitneyRegions& regions, const ThetaField& field, const std::vector<int>& cubes,
                 Multiplicity mult) {
  if (mult == Multiplicity::Sum) {
    double s = 0.0;
    for (int c : cubes) s += box_sum(regions.region(c), field);
    return s;
  }
  std::vector<int> boxes;
  for (int c : cubes) boxes.insert(boxes.end(), regions.region(c).begin(), regions.region(c).end());
  std::sort(boxes.begin(), boxes.end());
  boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
  return box_sum(boxes, field);
}

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

std::string to_string(TestSystemKind kind) {
  switch (kind) {
    case TestSystemKind::Constant1: return "constant-1";
    case TestSystemKind::HalfIndicator: return "half-indicator";
    case TestSystemKind::RandomAccretive: return "random-accretive";
    case TestSystemKind::Zero: return "zero";
    case TestSystemKind::Constant: return "constant";
  }
  return "unknown";
}

TestSystemKind test_system_kind_from_string(const std::string& name) {
  for (auto k : {TestSystemKind::Constant1, TestSystemKind::HalfIndicator, TestSystemKind::RandomAccretive,
                 TestSystemKind::Zero, TestSystemKind::Constant}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown test system generator '" + name + "'");
}

TestSystem make_test_system(const DyadicGrid& grid, const BoundarySet& set, const TestSystemSpec& spec, double C0,
                            double p) {
  if (!(C0 > 0.0)) throw Error("test system needs C0 > 0");
  if (!(p > 1.0) || !std::isfinite(p)) throw Error("test system needs p in (1, inf)");
  TestSystem sys;
  sys.generator = to_string(spec.kind);
  sys.C0 = C0;
  sys.p = p;
  const std::size_t nodes = set.size();
  sys.re.assign(grid.size(), BoundaryFunction(nodes, 0.0));

  switch (spec.kind) {
    case TestSystemKind::Zero:
      break;
    case TestSystemKind::Constant1:
    case TestSystemKind::Constant: {
      const double v = spec.kind == TestSystemKind::Constant ? spec.value : 1.0;
      for (std::size_t q = 0; q < grid.size(); ++q) {
        for (int m : grid.cube(static_cast<int>(q)).members) sys.re[q][m] = v;
      }
      break;
    }
    case TestSystemKind::HalfIndicator: {
      for (std::size_t q = 0; q < grid.size(); ++q) {
        const auto& c = grid.cube(static_cast<int>(q));
        const auto& support = c.children.empty() ? c.members : grid.cube(c.children.front()).members;
        for (int m : support) sys.re[q][m] = 1.0;
      }
      break;
    }
    case TestSystemKind::RandomAccretive: {
      if (!spec.seed) throw Error("random-accretive test system needs a seed");
      if (spec.complex) sys.im.assign(grid.size(), BoundaryFunction(nodes, 0.0));
      std::mt19937_64 rng(*spec.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t q = 0; q < grid.size(); ++q) {
        const int qi = static_cast<int>(q);
        const auto& c = grid.cube(qi);
        const auto sub = descendants(grid, qi);
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
          auto& re = sys.re[q];
          for (int m : c.members) re[m] = 1.0;
          // Damp random proper subcubes; nested damping compounds.
          for (int s : sub) {
            if (s == qi || unit(rng) >= 0.25) continue;
            const double factor = -0.5 + unit(rng);
            for (int m : grid.cube(s).members) re[m] *= factor;
          }
          if (spec.complex) {
            for (int m : c.members) sys.im[q][m] = unit(rng) - 0.5;
          }
          double sr = 0.0, si = 0.0, sp = 0.0;
          for (int m : c.members) {
            const double im = spec.complex ? sys.im[q][m] : 0.0;
            sr += re[m] * set.weight(m);
            si += im * set.weight(m);
            sp += std::pow(std::hypot(re[m], im), p) * set.weight(m);
          }
          ok = std::hypot(sr, si) >= c.measure / C0 && sp <= C0 * c.measure && sr > c.measure / C0;
        }
        if (!ok) throw Error("random-accretive: no admissible b_Q after 1000 draws");
      }
      break;
    }
  }
  return sys;
}

ThetaField ThetaField::scaled(double lambda) const {
  ThetaField f = *this;
  for (auto& v : f.mass) v *= lambda * lambda;
  for (auto& v : f.mass_flat) v *= lambda * lambda;
  return f;
}

ThetaField theta_field(const Kernel& kernel, const BoundarySet& set, const WhitneyDecomposition& whit,
                       std::span<const double> re, std::span<const double> im, int refine,
                       const std::vector<int>* boxes) {
  ThetaField field;
  field.refine = refine;
  field.mass.assign(whit.size(), 0.0);
  field.mass_flat.assign(whit.size(), 0.0);
  field.computed.assign(whit.size(), 0);
  std::vector<int> ids;
  if (boxes) {
    ids = *boxes;
  } else {
    ids.resize(whit.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  }
  const int dim = whit.dim();
  std::vector<Point> pts;
  std::vector<double> wts;
  std::vector<double> deltas;
  std::vector<int> owner;
  for (int b : ids) {
    const auto& box = whit.box(b);
    if (refine <= 0) {
      pts.push_back(box.center);
      wts.push_back(box.volume);
      deltas.push_back(box.delta_center);
      owner.push_back(b);
      continue;
    }
    for (const auto& [pt, w] : box_quadrature(box, refine, dim)) {
      pts.push_back(pt);
      wts.push_back(w);
      deltas.push_back(0.0);
      owner.push_back(b);
    }
  }
  if (refine > 0) parallel_for(pts.size(), [&](std::size_t i) { deltas[i] = set.delta(pts[i]); });
  const auto tr = theta_apply(kernel, set, re, pts, deltas);
  std::vector<double> ti;
  if (!im.empty()) ti = theta_apply(kernel, set, im, pts, deltas);
  const double n1 = set.n() + 1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v2 = tr[i] * tr[i] + (ti.empty() ? 0.0 : ti[i] * ti[i]);
    field.mass[owner[i]] += v2 * wts[i] / std::pow(deltas[i], n1);
    field.mass_flat[owner[i]] += v2 * wts[i] / deltas[i];
    field.computed[owner[i]] = 1;
  }
  return field;
}

std::vector<int> tent_boxes(const WhitneyRegions& regions, int q) {
  std::vector<int> boxes;
  for (int c : descendants(regions.grid(), q)) {
    const auto& u = regions.region(c);
    boxes.insert(boxes.end(), u.begin(), u.end());
  }
  std::sort(boxes.begin(), boxes.end());
  boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
  return boxes;
}

double local_square_function(const ConeRegion& cone, const ThetaField& field) { return box_sum(cone.boxes, field); }

double local_square_function(const std::vector<int>& boxes, const ThetaField& field) { return box_sum(boxes, field); }

std::vector<double> cone_values(const WhitneyRegions& regions, const ThetaField& field, int q,
                                const FunctionalSpec& spec) {
  const auto& grid = regions.grid();
  const bool sawtooth = spec.variant == ConeVariant::Sawtooth || spec.variant == ConeVariant::SawtoothTruncated;
  if (sawtooth && spec.family == nullptr) throw Error("sawtooth functional needs a stopping family");
  if (!(spec.exponent > 0.0)) throw Error("functional exponent must be positive");
  ConeSpec cs{rooted_kind(spec.variant), q, spec.eps, spec.family};
  // One cone per leaf; members of a leaf share every ancestor.
  std::vector<double> per_node(grid.node_count(), 0.0);
  for (int leaf : leaves_under(grid, q)) {
    const auto cubes = cone_cubes(regions, grid.cube(leaf).members.front(), cs);
    const double g = std::pow(cone_mass(regions, field, cubes, spec.multiplicity), 0.5 * spec.exponent);
    for (int m : grid.cube(leaf).members) per_node[m] = g;
  }
  std::vector<double> out;
  out.reserve(grid.cube(q).members.size());
  for (int m : grid.cube(q).members) out.push_back(per_node[m]);
  return out;
}

double carleson_functional(const WhitneyRegions& regions, const ThetaField& field, int q, const FunctionalSpec& spec) {
  const auto& c = regions.grid().cube(q);
  const auto g = cone_values(regions, field, q, spec);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += regions.set().weight(c.members[i]) * g[i];
  return s / c.measure;
}

TruncationContext truncation_context(const WhitneyRegions& regions, int refine, double eps) {
  TruncationContext t;
  t.window = regions.whitney().window();
  t.whitney_k_min = regions.whitney().k_min();
  t.whitney_k_max = regions.whitney().k_max();
  t.grid_k_min = regions.grid().k_min();
  t.grid_k_max = regions.grid().k_max();
  t.floor_scale = regions.whitney().floor_scale();
  t.eps = eps;
  t.refine = refine;
  return t;
}

double global_square_norm(const ThetaField& field) {
  double s = 0.0;
  for (std::size_t b = 0; b < field.mass_flat.size(); ++b) {
    if (field.computed[b]) s += field.mass_flat[b];
  }
  return s;
}

StoppingFamily stopping_time(const DyadicGrid& grid, const BoundarySet& set, int q, std::span<const double> b_re,
                             double C0) {
  if (!(C0 > 0.0)) throw Error("stopping time needs C0 > 0");
  StoppingFamily fam;
  fam.parent = q;
  auto stops = [&](int c) {
    double s = 0.0;
    for (int m : grid.cube(c).members) s += b_re[m] * set.weight(m);
    return s <= grid.cube(c).measure / C0;
  };
  if (stops(q)) {
    fam.degenerate = true;
    fam.members = {q};
    fam.packing_ratio = 1.0;
    fam.eta_packing = 0.0;
    fam.maximal = false;
    return fam;
  }
  // Depth-first with pruning below selected cubes gives the maximal ones.
  std::vector<int> stack(grid.cube(q).children.rbegin(), grid.cube(q).children.rend());
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    if (stops(c)) {
      fam.members.push_back(c);
      continue;
    }
    const auto& ch = grid.cube(c).children;
    stack.insert(stack.end(), ch.rbegin(), ch.rend());
  }
  std::sort(fam.members.begin(), fam.members.end());
  double covered = 0.0;
  for (int m : fam.members) {
    covered += grid.cube(m).measure;
    if (stops(grid.cube(m).parent)) fam.maximal = false;
  }
  fam.packing_ratio = covered / grid.cube(q).measure;
  fam.eta_packing = 1.0 - fam.packing_ratio;
  return fam;
}

std::vector<int> good_cubes(const DyadicGrid& grid, int q, const std::vector<int>& family) {
  std::vector<int> out;
  for (int c : descendants(grid, q)) {
    const auto& cc = grid.cube(c);
    bool good = true;
    for (int k : family) {
      const auto& ck = grid.cube(k);
      const bool meets = grid.contains(c, k) || grid.contains(k, c);
      if (meets && !(cc.length > ck.length)) {
        good = false;
        break;
      }
    }
    if (good) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> good_cubes_by_containment(const DyadicGrid& grid, int q, const std::vector<int>& family) {
  std::vector<int> out;
  for (int c : descendants(grid, q)) {
    if (is_good(grid, c, family)) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double good_certificate(const DyadicGrid& grid, const BoundarySet& set, const std::vector<int>& good,
                        std::span<const double> b_re, std::span<const double> b_im) {
  double worst = std::numeric_limits<double>::infinity();
  for (int c : good) {
    double sr = 0.0, si = 0.0;
    for (int m : grid.cube(c).members) {
      sr += b_re[m] * set.weight(m);
      if (!b_im.empty()) si += b_im[m] * set.weight(m);
    }
    worst = std::min(worst, std::hypot(sr, si) / grid.cube(c).measure);
  }
  return worst;
}

TbHypothesisReport verify_tb_hypotheses(const TestSystem& system, const WhitneyRegions& regions, const Kernel& kernel,
                                        int refine) {
  const auto& grid = regions.grid();
  const auto& set = regions.set();
  const std::size_t nq = grid.size();
  TbHypothesisReport rep;
  rep.eq1.resize(nq);
  rep.eq2.resize(nq);
  rep.eq3.resize(nq);
  const std::vector<double> no_im;
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const int q = static_cast<int>(qi);
    const auto& c = grid.cube(q);
    const auto& re = system.re[qi];
    const auto& im = system.complex() ? system.im[qi] : no_im;
    double sr = 0.0, si = 0.0;
    for (int m : c.members) {
      sr += re[m] * set.weight(m);
      if (!im.empty()) si += im[m] * set.weight(m);
    }
    double sp = 0.0;
    for (std::size_t m = 0; m < set.size(); ++m) {
      const double v = std::hypot(re[m], im.empty() ? 0.0 : im[m]);
      if (v != 0.0) sp += std::pow(v, system.p) * set.weight(static_cast<int>(m));
    }
    rep.eq1[qi] = {q, c.level, std::hypot(sr, si) / c.measure, std::hypot(sr, si) >= c.measure / system.C0};
    rep.eq2[qi] = {q, c.level, sp / c.measure, sp <= system.C0 * c.measure};

    const auto boxes = tent_boxes(regions, q);
    const auto field = theta_field(kernel, set, regions.whitney(), re, im, refine, &boxes);
    FunctionalSpec fs;
    fs.exponent = system.p;
    const double v3 = carleson_functional(regions, field, q, fs);
    rep.eq3[qi] = {q, c.level, v3, v3 <= system.C0};
  }
  auto worst = [](const std::vector<CubeRow>& rows, bool larger_is_worse) {
    int w = -1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (w < 0 || (larger_is_worse ? rows[i].value > rows[w].value : rows[i].value < rows[w].value)) {
        w = static_cast<int>(i);
      }
    }
    return w < 0 ? -1 : rows[w].cube;
  };
  rep.worst_eq1 = worst(rep.eq1, false);
  rep.worst_eq2 = worst(rep.eq2, true);
  rep.worst_eq3 = worst(rep.eq3, true);
  for (const auto& r : rep.eq1) rep.pass_eq1 = rep.pass_eq1 && r.pass;
  for (const auto& r : rep.eq2) rep.pass_eq2 = rep.pass_eq2 && r.pass;
  for (const auto& r : rep.eq3) rep.pass_eq3 = rep.pass_eq3 && r.pass;
  return rep;
}

PackingReport verify_packing(const DyadicGrid& grid, const std::vector<StoppingFamily>& families, double eta_min) {
  if (!(eta_min > 0.0)) throw Error("verify_packing needs eta_min > 0");
  PackingReport rep;
  for (const auto& f : families) {
    const auto& c = grid.cube(f.parent);
    rep.rows.push_back({f.parent, c.level, f.packing_ratio, f.eta_packing >= eta_min});
    if (rep.worst < 0 || f.eta_packing < rep.min_eta) {
      rep.min_eta = f.eta_packing;
      rep.worst = f.parent;
    }
  }
  rep.pass = rep.min_eta >= eta_min;
  return rep;
}

double K_epsilon(const WhitneyRegions& regions, const ThetaField& theta1, double eps) {
  if (!(eps > 0.0)) throw Error("K(eps) needs eps > 0");
  const auto& grid = regions.grid();
  std::vector<double> vals(grid.size(), 0.0);
  FunctionalSpec fs;
  fs.variant = ConeVariant::Truncated;
  fs.eps = eps;
  parallel_for(grid.size(), [&](std::size_t q) { vals[q] = carleson_functional(regions, theta1, static_cast<int>(q), fs); });
  double sup = 0.0;
  for (double v : vals) sup = std::max(sup, v);
  return sup;
}

double level_set_fraction(const WhitneyRegions& regions, const ThetaField& theta1, int q, double N, double p) {
  if (!(N > 0.0)) throw Error("level_set_fraction needs N > 0");
  if (!(p > 1.0 && p < 2.0)) throw Error("level_set_fraction needs p in (1, 2)");
  FunctionalSpec fs;
  fs.exponent = p;
  const auto g = cone_values(regions, theta1, q, fs);
  const auto& c = regions.grid().cube(q);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] > N) s += regions.set().weight(c.members[i]);
  }
  return s / c.measure;
}

double carleson_norm(const DyadicGrid& grid, std::span<const double> alpha) {
  if (alpha.size() != grid.size()) throw Error("carleson_norm: one coefficient per cube required");
  // Bottom-up accumulation of sum_{Q in Q0} alpha_Q sigma(Q).
  std::vector<double> acc(grid.size(), 0.0);
  for (int k = grid.k_max(); k >= grid.k_min(); --k) {
    for (int q : grid.level(k)) {
      if (alpha[q] < 0.0) throw Error("carleson_norm: coefficients must be nonnegative");
      acc[q] += alpha[q] * grid.cube(q).measure;
      const int parent = grid.cube(q).parent;
      if (parent >= 0) acc[parent] += acc[q];
    }
  }
  double sup = 0.0;
  for (std::size_t q = 0; q < grid.size(); ++q) sup = std::max(sup, acc[q] / grid.cube(static_cast<int>(q)).measure);
  return sup;
}

EmbeddingResult carleson_embedding_check(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> alpha,
                                         std::span<const double> f) {
  EmbeddingResult r;
  r.norm = carleson_norm(grid, alpha);
  // sum_x w(x) sum_{Q ni x} alpha_Q |E_Q f|^2 = sum_Q alpha_Q sigma(Q) |E_Q f|^2
  for (std::size_t q = 0; q < grid.size(); ++q) {
    if (alpha[q] == 0.0) continue;
    const double e = dyadic_average(grid, set, f, static_cast<int>(q));
    r.lhs += alpha[q] * grid.cube(static_cast<int>(q)).measure * e * e;
  }
  std::vector<double> af(f.begin(), f.end());
  for (auto& v : af) v = std::abs(v);
  const auto M = dyadic_maximal(grid, set, af);
  for (int node : grid.nodes()) r.rhs += set.weight(node) * M[node] * M[node];
  if (r.lhs > 0.0) {
    if (!(r.rhs > 0.0) || !(r.norm > 0.0)) throw Error("carleson embedding: positive lhs with zero rhs");
    r.ratio = r.lhs / (r.norm * r.rhs);
  }
  return r;
}

T1Report t1_check(const WhitneyRegions& regions, const ThetaField& theta1, const Kernel& kernel,
                  const std::vector<BoundaryFunction>& test_functions, int refine, double carleson_bound,
                  double ratio_bound) {
  const auto& grid = regions.grid();
  T1Report rep;
  rep.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t q) {
    const int qi = static_cast<int>(q);
    rep.rows[q] = {qi, grid.cube(qi).level, carleson_functional(regions, theta1, qi, FunctionalSpec{}), true};
  });
  for (auto& row : rep.rows) {
    row.pass = row.value <= carleson_bound;
    if (rep.worst_cube < 0 || row.value > rep.carleson_sup) {
      rep.carleson_sup = row.value;
      rep.worst_cube = row.cube;
    }
  }
  bool ok = rep.carleson_sup <= carleson_bound;
  for (const auto& f : test_functions) {
    const double l2 = l2_norm_squared(regions.set(), f);
    const auto field = theta_field(kernel, regions.set(), regions.whitney(), f, {}, refine);
    const double ratio = l2 > 0.0 ? global_square_norm(field) / l2 : 0.0;
    rep.global_ratios.push_back(ratio);
    rep.l2_norms_squared.push_back(l2);
    ok = ok && ratio <= ratio_bound;
  }
  rep.pass = ok;
  return rep;
}

TailReport bounded_tail(const BoundarySet& set, const Kernel& kernel, std::span<const double> f, int k_max_annulus,
                        const TailQuadrature& quad) {
  return bounded_tail(set, kernel, std::vector<BoundaryFunction>{BoundaryFunction(f.begin(), f.end())}, k_max_annulus,
                      quad)
      .front();
}

std::vector<TailReport> bounded_tail(const BoundarySet& set, const Kernel& kernel,
                                     const std::vector<BoundaryFunction>& fs, int k_max_annulus,
                                     const TailQuadrature& quad) {
  if (!set.bounded()) throw Error("bounded_tail needs a bounded set");
  if (k_max_annulus < 3) throw Error("bounded_tail needs k_max_annulus >= 3");
  if (quad.radial_points < 1 || quad.angular_points < 4) throw Error("bounded_tail: quadrature too coarse");
  const int dim = set.ambient_dim();
  if (dim != 2 && dim != 3) throw Error("bounded_tail supports ambient dimension 2 or 3");
  std::vector<TailReport> reps(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    reps[i].r0 = set.diameter();
    reps[i].l2_norm_squared = l2_norm_squared(set, fs[i]);
  }
  const double r0 = set.diameter();
  const Point c = set.center();

  std::vector<double> rx, rw;
  gauss_legendre(quad.radial_points, rx, rw);
  std::vector<double> cx, cw;  // polar nodes in cos(theta) for dim 3
  if (dim == 3) gauss_legendre(std::max(2, quad.angular_points / 2), cx, cw);

  for (int k = 3; k <= k_max_annulus; ++k) {
    const double a = std::ldexp(r0, k);
    const double b = 2.0 * a;
    std::vector<Point> pts;
    std::vector<double> wts;
    for (int i = 0; i < quad.radial_points; ++i) {
      const double r = 0.5 * (a + b) + 0.5 * (b - a) * rx[i];
      const double wr = 0.5 * (b - a) * rw[i];
      const double dphi = 2.0 * std::numbers::pi / quad.angular_points;
      if (dim == 2) {
        for (int j = 0; j < quad.angular_points; ++j) {
          const double phi = (j + 0.5) * dphi;
          pts.push_back({c[0] + r * std::cos(phi), c[1] + r * std::sin(phi), 0.0});
          wts.push_back(wr * r * dphi);
        }
      } else {
        for (std::size_t t = 0; t < cx.size(); ++t) {
          const double st = std::sqrt(std::max(0.0, 1.0 - cx[t] * cx[t]));
          for (int j = 0; j < quad.angular_points; ++j) {
            const double phi = (j + 0.5) * dphi;
            pts.push_back({c[0] + r * st * std::cos(phi), c[1] + r * st * std::sin(phi), c[2] + r * cx[t]});
            wts.push_back(wr * r * r * cw[t] * dphi);
          }
        }
      }
    }
    const auto theta = theta_apply_many(kernel, set, fs, pts);
    std::vector<double> dw(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) dw[i] = wts[i] / set.delta(pts[i]);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      double s = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) s += theta[f][i] * theta[f][i] * dw[i];
      reps[f].k.push_back(k);
      reps[f].contributions.push_back(s);
      reps[f].total += s;
    }
  }
  for (auto& rep : reps) {
    for (std::size_t i = 1; i < rep.contributions.size(); ++i) {
      rep.successive_ratios.push_back(
          rep.contributions[i - 1] > 0.0 ? rep.contributions[i] / rep.contributions[i - 1] : 0.0);
    }
    rep.ratio_to_l2 = rep.l2_norm_squared > 0.0 ? rep.total / rep.l2_norm_squared : 0.0;
  }
  return reps;
}

}  // namespace adrsq
