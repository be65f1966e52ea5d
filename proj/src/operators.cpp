#include "adrsq/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace adrsq {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<int> grid_rows(const DyadicGrid& grid) { return grid.nodes(); }

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::PoissonDerivative: return "PoissonDerivative";
    case KernelKind::RieszType: return "RieszType";
    case KernelKind::Envelope: return "Envelope";
    case KernelKind::Constant: return "Constant";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  for (auto k : {KernelKind::PoissonDerivative, KernelKind::RieszType, KernelKind::Envelope, KernelKind::Constant}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown kernel kind '" + name + "'");
}

double Kernel::operator()(const Point& x, double delta_x, const Point& y) const {
  switch (kind) {
    case KernelKind::PoissonDerivative: {
      const double s = x[0] - y[0];
      const double t = x[1] - y[1];
      const double q = s * s + t * t;
      return scale * (t / kPi) * (s * s - t * t) / (q * q);
    }
    case KernelKind::RieszType: {
      const int d = n;  // last ambient coordinate
      const double r = distance(x, y);
      return scale * delta_x * (x[d] - y[d]) / std::pow(r, n + 2);
    }
    case KernelKind::Envelope: {
      const double r = distance(x, y);
      return scale * coefficient * std::pow(delta_x, alpha) / std::pow(r, n + alpha);
    }
    case KernelKind::Constant:
      return scale * coefficient;
  }
  return 0.0;
}

std::vector<double> theta_apply(const Kernel& kernel, const BoundarySet& set, std::span<const double> f,
                                std::span<const Point> points) {
  std::vector<double> deltas(points.size());
  parallel_for(points.size(), [&](std::size_t i) { deltas[i] = set.delta(points[i]); });
  return theta_apply(kernel, set, f, points, deltas);
}

std::vector<double> theta_apply(const Kernel& kernel, const BoundarySet& set, std::span<const double> f,
                                std::span<const Point> points, std::span<const double> deltas) {
  if (f.size() != set.size()) throw Error("theta_apply: function length does not match the node count");
  // Only nonzero entries contribute; fold the weights in once.
  std::vector<Point> ys;
  std::vector<double> fw;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] != 0.0) {
      ys.push_back(set.point(static_cast<int>(i)));
      fw.push_back(f[i] * set.weight(static_cast<int>(i)));
    }
  }
  const double floor = std::max(set.distance_error(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(deltas[i] > floor)) throw SingularEvaluationError("theta_apply: evaluation point lies on E");
  }
  std::vector<double> out(points.size(), 0.0);
  parallel_for(points.size(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < ys.size(); ++j) s += kernel(points[i], deltas[i], ys[j]) * fw[j];
    out[i] = s;
  });
  return out;
}

std::vector<std::vector<double>> theta_apply_many(const Kernel& kernel, const BoundarySet& set,
                                                  const std::vector<BoundaryFunction>& fs,
                                                  std::span<const Point> points) {
  const std::size_t m = fs.size();
  for (const auto& f : fs) {
    if (f.size() != set.size()) throw Error("theta_apply: function length does not match the node count");
  }
  std::vector<double> deltas(points.size());
  parallel_for(points.size(), [&](std::size_t i) { deltas[i] = set.delta(points[i]); });
  const double floor = std::max(set.distance_error(), 0.0);
  for (double d : deltas) {
    if (!(d > floor)) throw SingularEvaluationError("theta_apply: evaluation point lies on E");
  }
  // Node-major weighted values: fw[j * m + i] = f_i(y_j) w(y_j).
  std::vector<double> fw(set.size() * m);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const double w = set.weight(static_cast<int>(j));
    for (std::size_t i = 0; i < m; ++i) fw[j * m + i] = fs[i][j] * w;
  }
  std::vector<std::vector<double>> out(m, std::vector<double>(points.size(), 0.0));
  parallel_for(points.size(), [&](std::size_t p) {
    std::vector<double> acc(m, 0.0);
    for (std::size_t j = 0; j < set.size(); ++j) {
      const double kv = kernel(points[p], deltas[p], set.point(static_cast<int>(j)));
      const double* row = &fw[j * m];
      for (std::size_t i = 0; i < m; ++i) acc[i] += kv * row[i];
    }
    for (std::size_t i = 0; i < m; ++i) out[i][p] = acc[i];
  });
  return out;
}

KernelReport verify_kernel(const Kernel& kernel, const BoundarySet& set, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw Error("verify_kernel needs sample_count >= 1");
  KernelReport rep;
  rep.min_delta = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  const std::vector<int> centres = set.bounded() ? [&] {
    std::vector<int> all(set.size());
    for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
    return all;
  }()
                                                : set.core_nodes();
  std::uniform_int_distribution<std::size_t> pick(0, centres.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int dim = set.ambient_dim();
  const double d_lo = 2.0 * set.spacing() + 2.0 * set.distance_error();
  const double d_hi = 0.5 * set.model_extent();
  const double nn = set.n() + kernel.alpha;
  const bool upper_only = kernel.kind == KernelKind::PoissonDerivative;

  for (int attempt = 0; attempt < 50 * sample_count && rep.samples < sample_count; ++attempt) {
    const int y0 = centres[pick(rng)];
    Point dir{0.0, 0.0, 0.0};
    double len = 0.0;
    for (int i = 0; i < dim; ++i) {
      dir[i] = gauss(rng);
      len += dir[i] * dir[i];
    }
    len = std::sqrt(len);
    const double r = d_lo * std::pow(d_hi / d_lo, unit(rng));
    Point x = set.point(y0);
    for (int i = 0; i < dim; ++i) x[i] += r * dir[i] / len;
    if (upper_only && x[1] <= set.point(y0)[1]) x[1] = 2.0 * set.point(y0)[1] - x[1];
    const double dx = set.delta(x);
    if (!(dx > 2.0 * set.distance_error()) || dx <= 0.0) continue;
    const int y = centres[pick(rng)];
    const double rxy = distance(x, set.point(y));
    const double psi = kernel(x, dx, set.point(y));
    rep.measured_C_decay = std::max(rep.measured_C_decay, std::abs(psi) * std::pow(rxy, nn) / std::pow(dx, kernel.alpha));
    // Hölder partner with 2|y - y'| <= |X - y|.
    const auto near = set.index().within(set.point(y), 0.5 * rxy);
    const int yp = near[static_cast<std::size_t>(unit(rng) * near.size()) % near.size()];
    const double dyy = distance(set.point(y), set.point(yp));
    if (dyy > 0.0) {
      const double diff = std::abs(psi - kernel(x, dx, set.point(yp)));
      rep.measured_C_holder =
          std::max(rep.measured_C_holder, diff * std::pow(rxy, nn) / std::pow(dyy, kernel.alpha));
    }
    rep.min_delta = std::min(rep.min_delta, dx);
    ++rep.samples;
  }
  rep.decay_ok = rep.samples > 0 && rep.measured_C_decay <= kernel.c_psi;
  rep.holder_ok = rep.samples > 0 && rep.measured_C_holder <= kernel.c_psi;
  return rep;
}

std::vector<double> SparseKernel::apply(const BoundarySet& set, std::span<const double> f) const {
  std::vector<double> out(rows.size(), 0.0);
  parallel_for(rows.size(), [&](std::size_t i) {
    double s = 0.0;
    for (int t = row_start[i]; t < row_start[i + 1]; ++t) s += values[t] * f[cols[t]] * set.weight(cols[t]);
    out[i] = s;
  });
  return out;
}

double marginal_deviation(const SparseKernel& s, const BoundarySet& set) {
  std::vector<double> col(set.size(), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    double r = 0.0;
    for (int t = s.row_start[i]; t < s.row_start[i + 1]; ++t) {
      r += s.values[t] * set.weight(s.cols[t]);
      col[s.cols[t]] += s.values[t] * set.weight(s.rows[i]);
    }
    worst = std::max(worst, std::abs(r - 1.0));
  }
  for (int node : s.rows) worst = std::max(worst, std::abs(col[node] - 1.0));
  return worst;
}

ApproxIdentityFamily build_approx_identity(const DyadicGrid& grid, const BoundarySet& set, double eps_smooth,
                                           int j_min, int j_max) {
  if (!(eps_smooth > 0.0 && eps_smooth <= 1.0)) throw Error("approximation to the identity needs eps in (0, 1]");
  ApproxIdentityFamily fam;
  fam.j_min = std::max(j_min, grid.k_min());
  fam.j_max = std::min(j_max, grid.k_max());
  if (fam.j_max < fam.j_min) throw Error("approximation to the identity: empty level range");
  fam.eps = eps_smooth;
  fam.grid = &grid;
  const auto rows = grid_rows(grid);
  std::vector<int> position(set.size(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) position[rows[i]] = static_cast<int>(i);

  for (int j = fam.j_min; j <= fam.j_max; ++j) {
    const double radius = fam.support_factor * std::ldexp(1.0, -j);
    SparseKernel s;
    s.rows = rows;
    s.row_start.push_back(0);
    std::vector<std::vector<std::pair<int, double>>> entries(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
      for (int c : set.index().within(set.point(rows[i]), radius)) {
        if (position[c] < 0) continue;
        const double r = distance(set.point(rows[i]), set.point(c)) / radius;
        if (r >= 1.0) continue;
        entries[i].emplace_back(c, std::pow(1.0 - r * r, eps_smooth));
      }
    });
    for (auto& e : entries) {
      for (const auto& [c, v] : e) {
        s.cols.push_back(c);
        s.values.push_back(v);
      }
      s.row_start.push_back(static_cast<int>(s.cols.size()));
    }
    // Symmetric scaling S = D K D with geometric-mean updates.
    std::vector<double> d(rows.size(), 1.0);
    std::vector<double> dn(set.size(), 0.0);
    int sweep = 0;
    double dev = std::numeric_limits<double>::infinity();
    std::vector<double> r(rows.size());
    for (; sweep <= 100; ++sweep) {
      for (std::size_t i = 0; i < rows.size(); ++i) dn[rows[i]] = d[i];
      parallel_for(rows.size(), [&](std::size_t i) {
        double acc = 0.0;
        for (int t = s.row_start[i]; t < s.row_start[i + 1]; ++t) acc += s.values[t] * set.weight(s.cols[t]) * dn[s.cols[t]];
        r[i] = acc;
      });
      dev = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) dev = std::max(dev, std::abs(d[i] * r[i] - 1.0));
      if (dev <= 1e-10) break;
      if (sweep == 100) break;
      for (std::size_t i = 0; i < rows.size(); ++i) d[i] = std::sqrt(d[i] / r[i]);
    }
    if (dev > 1e-10) {
      throw ConvergenceError("approximation to the identity: normalisation at level " + std::to_string(j) +
                             " did not converge in 100 sweeps");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int t = s.row_start[i]; t < s.row_start[i + 1]; ++t) s.values[t] *= d[i] * dn[s.cols[t]];
    }
    fam.sweeps.push_back(sweep);
    fam.marginal_error.push_back(marginal_deviation(s, set));
    fam.S.push_back(std::move(s));
  }
  return fam;
}

BoundaryFunction ApproxIdentityFamily::apply_S(const BoundarySet& set, int j, std::span<const double> f) const {
  const auto& s = at(j);
  const auto vals = s.apply(set, f);
  BoundaryFunction out(set.size(), 0.0);
  for (std::size_t i = 0; i < s.rows.size(); ++i) out[s.rows[i]] = vals[i];
  return out;
}

BoundaryFunction ApproxIdentityFamily::apply_D(const BoundarySet& set, int j, std::span<const double> f) const {
  if (j <= j_min || j > j_max) throw Error("D_j needs j_min < j <= j_max");
  auto a = apply_S(set, j, f);
  const auto b = apply_S(set, j - 1, f);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

double square_sum_Dj(const ApproxIdentityFamily& family, const BoundarySet& set, std::span<const double> f, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw Error("square_sum_Dj needs p in (1, inf)");
  std::vector<double> acc(set.size(), 0.0);
  for (int j = family.j_min + 1; j <= family.j_max; ++j) {
    const auto d = family.apply_D(set, j, f);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i] * d[i];
  }
  double total = 0.0;
  for (int node : family.grid->nodes()) total += set.weight(node) * std::pow(acc[node], 0.5 * p);
  return total;
}

double reproducing_residual(const ApproxIdentityFamily& family, const BoundarySet& set, std::span<const double> f) {
  std::vector<double> sum(set.size(), 0.0);
  for (int j = family.j_min + 1; j <= family.j_max; ++j) {
    const auto dd = family.apply_D(set, j, family.apply_D(set, j, f));
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += dd[i];
  }
  double r = 0.0;
  for (int node : family.grid->nodes()) r += set.weight(node) * (f[node] - sum[node]) * (f[node] - sum[node]);
  return std::sqrt(r);
}

double dyadic_average(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> f, int q) {
  const auto& c = grid.cube(q);
  if (!(c.measure > 0.0)) throw Error("dyadic_average: cube has zero measure");
  double s = 0.0;
  for (int m : c.members) s += f[m] * set.weight(m);
  return s / c.measure;
}

BoundaryFunction dyadic_maximal(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> f) {
  std::vector<double> avg(grid.size(), 0.0);
  parallel_for(grid.size(), [&](std::size_t q) {
    const auto& c = grid.cube(static_cast<int>(q));
    double s = 0.0;
    for (int m : c.members) s += std::abs(f[m]) * set.weight(m);
    avg[q] = c.measure > 0.0 ? s / c.measure : 0.0;
  });
  BoundaryFunction out(set.size(), 0.0);
  for (int node : grid.nodes()) {
    double best = 0.0;
    for (int k = grid.k_min(); k <= grid.k_max(); ++k) best = std::max(best, avg[grid.cube_of(node, k)]);
    out[node] = best;
  }
  return out;
}

BoundaryFunction read_boundary_function_csv(const std::string& path, const BoundarySet& set) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open boundary function file '" + path + "'");
  BoundaryFunction f(set.size(), 0.0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    long long id = 0;
    double value = 0.0;
    if (!(row >> id >> value)) {
      if (lineno == 1) continue;  // header
      throw Error(path + ":" + std::to_string(lineno) + ": expected 'node_id,value'");
    }
    if (id < 0 || id >= static_cast<long long>(set.size())) {
      throw Error(path + ":" + std::to_string(lineno) + ": node id out of range");
    }
    f[static_cast<std::size_t>(id)] = value;
  }
  return f;
}

double l2_norm_squared(const BoundarySet& set, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * f[i] * set.weight(static_cast<int>(i));
  return s;
}

}  // namespace adrsq
