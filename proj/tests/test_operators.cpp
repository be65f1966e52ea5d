#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <fstream>
#include <numbers>
#include <random>

#include "adrsq/operators.hpp"

using namespace adrsq;

namespace {

// Long line: core [0, 1], uniform margin 2 and a graded pad reaching out
// to |x| ~ 2000 on each side.
constexpr double kReach = 2002.0;
BoundarySet long_line() {
  return BoundarySet::make(SetKind::SegmentLine, 1024, Json{{"margin", 2.0}, {"pad", 2000.0}});
}

std::vector<double> constant(const BoundarySet& set, double c) { return std::vector<double>(set.size(), c); }

}  // namespace

TEST_CASE("theta of zero and linearity") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 256);
  const Kernel k;
  std::vector<Point> pts{{0.5, 0.1, 0.0}, {0.2, 0.4, 0.0}, {0.9, 0.02, 0.0}};
  for (double v : theta_apply(k, set, constant(set, 0.0), pts)) CHECK(v == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> f(set.size()), g(set.size()), fg(set.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = u(rng);
    g[i] = u(rng);
    fg[i] = f[i] + g[i];
  }
  const auto a = theta_apply(k, set, f, pts);
  const auto b = theta_apply(k, set, g, pts);
  const auto c = theta_apply(k, set, fg, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(c[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-13));
}

TEST_CASE("theta on E is singular") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 64);
  std::vector<Point> pts{{0.5, 0.0, 0.0}};
  CHECK_THROWS_AS(theta_apply(Kernel{}, set, constant(set, 1.0), pts), SingularEvaluationError);
}

TEST_CASE("Poisson derivative kills constants on a long line") {
  auto set = long_line();
  // Truncation oracle: the tail of the exact integral beyond |s| > L is
  // at most 2 t/(pi L) for the kernel bound t/(pi s^2).
  const double L = kReach;
  std::vector<Point> pts;
  for (double t : {0.05, 0.1, 0.2, 0.35, 0.5}) {
    for (double x : {0.0, 0.3, 0.5, 1.0}) pts.push_back({x, t, 0.0});
  }
  const auto v = theta_apply(Kernel{}, set, constant(set, 1.0), pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double tail = 2.0 * pts[i][1] / (std::numbers::pi * (L - 1.0));
    CHECK(tail < 1e-3);
    CHECK(std::abs(v[i]) <= 1e-3);
  }
}

TEST_CASE("kernel verification") {
  auto set = long_line();
  Kernel k;
  k.c_psi = 2.0 / std::numbers::pi;
  const auto rep = verify_kernel(k, set, 2000, 7);
  CHECK(rep.samples == 2000);
  CHECK(rep.decay_ok);
  // |t (s^2 - t^2)| / (s^2 + t^2)^2 <= t / (s^2 + t^2)
  CHECK(rep.measured_C_decay <= 1.0 / std::numbers::pi + 1e-12);
  MESSAGE("Poisson derivative: decay C = " << rep.measured_C_decay << ", Hölder C = " << rep.measured_C_holder);

  Kernel one;
  one.kind = KernelKind::Constant;
  one.c_psi = 100.0;
  const auto bad = verify_kernel(one, set, 500, 7);
  CHECK_FALSE(bad.decay_ok);
  // Constant kernel has zero Hölder difference.
  CHECK(bad.measured_C_holder == 0.0);

  CHECK_THROWS(verify_kernel(k, set, 0, 1));
}

TEST_CASE("approximation to the identity on the segment") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 1024, Json{{"margin", 0.0}});
  auto grid = build_grid(set, 0, 6);
  const auto fam = build_approx_identity(grid, set, 1.0);
  REQUIRE(fam.j_min == 0);
  REQUIRE(fam.j_max == 6);
  MESSAGE("normalisation sweeps at j = 0: " << fam.sweeps.front() << ", at j = 6: " << fam.sweeps.back());
  for (double e : fam.marginal_error) CHECK(e <= 1e-8);
  for (int j = fam.j_min; j <= fam.j_max; ++j) CHECK(marginal_deviation(fam.at(j), set) <= 1e-8);

  // support and symmetry
  for (int j = fam.j_min; j <= fam.j_max; ++j) {
    const auto& s = fam.at(j);
    const double radius = 2.0 * std::ldexp(1.0, -j);
    double reach = 0.0;
    std::unordered_map<std::int64_t, double> table;
    const auto key = [&](int a, int b) { return static_cast<std::int64_t>(a) * 1000003 + b; };
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      for (int t = s.row_start[i]; t < s.row_start[i + 1]; ++t) {
        reach = std::max(reach, distance(set.point(s.rows[i]), set.point(s.cols[t])));
        table[key(s.rows[i], s.cols[t])] = s.values[t];
      }
    }
    CHECK(reach < radius);
    double asym = 0.0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      for (int t = s.row_start[i]; t < s.row_start[i + 1]; ++t) {
        asym = std::max(asym, std::abs(table.at(key(s.cols[t], s.rows[i])) - s.values[t]));
      }
    }
    CHECK(asym <= 1e-12);
  }

  // S_j x -> x: the normalised kernel is a probability measure supported in
  // a ball of radius 2 2^-j, so |S_j x - x| < 2 2^-j.
  std::vector<double> f(set.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = set.point(static_cast<int>(i))[0];
  for (int j = fam.j_min; j <= fam.j_max; ++j) {
    const auto sf = fam.apply_S(set, j, f);
    double worst = 0.0;
    for (int node : grid.nodes()) worst = std::max(worst, std::abs(sf[node] - f[node]));
    CHECK(worst <= 2.0 * std::ldexp(1.0, -j));
  }

  // D_j kills constants
  const auto c = constant(set, 3.0);
  for (int j = fam.j_min + 1; j <= fam.j_max; ++j) {
    double worst = 0.0;
    for (double v : fam.apply_D(set, j, c)) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-8);
  }
  CHECK(square_sum_Dj(fam, set, c, 2.0) <= 1e-14);
  CHECK(square_sum_Dj(fam, set, constant(set, 0.0), 2.0) == 0.0);
  CHECK_THROWS(square_sum_Dj(fam, set, c, 1.0));
  CHECK_THROWS(fam.apply_D(set, fam.j_min, c));

  // Almost orthogonality for random signs.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> g(set.size());
    for (auto& v : g) v = (rng() & 1) ? 1.0 : -1.0;
    const double ratio = square_sum_Dj(fam, set, g, 2.0) / l2_norm_squared(set, g);
    CHECK(ratio <= 4.0);
  }
  CHECK(std::isfinite(reproducing_residual(fam, set, f)));
}

TEST_CASE("approximation to the identity rejects bad eps") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 256, Json{{"margin", 0.0}});
  auto grid = build_grid(set, 0, 4);
  CHECK_THROWS(build_approx_identity(grid, set, 0.0));
  CHECK_THROWS(build_approx_identity(grid, set, 1.5));
  const auto fam = build_approx_identity(grid, set, 0.5, 1, 3);
  CHECK(fam.j_min == 1);
  CHECK(fam.j_max == 3);
}

TEST_CASE("dyadic averages") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 512, Json{{"margin", 0.0}});
  auto grid = build_grid(set, 0, 5);
  const int root = grid.top_cubes().front();
  CHECK(dyadic_average(grid, set, constant(set, 2.5), root) == doctest::Approx(2.5).epsilon(1e-14));

  std::vector<double> left(set.size(), 0.0);
  const int lc = grid.cube(root).children.front();
  for (int m : grid.cube(lc).members) left[m] = 1.0;
  CHECK(dyadic_average(grid, set, left, root) == doctest::Approx(0.5).epsilon(1e-14));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  std::vector<double> f(set.size());
  for (auto& v : f) v = gauss(rng);
  for (const auto& q : grid.cubes()) {
    if (q.children.empty()) continue;
    double s = 0.0;
    for (int c : q.children) s += grid.cube(c).measure / q.measure * dyadic_average(grid, set, f, c);
    const int id = static_cast<int>(&q - grid.cubes().data());
    CHECK(dyadic_average(grid, set, f, id) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("dyadic maximal function") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 256, Json{{"margin", 0.0}});
  auto grid = build_grid(set, 0, 4);
  for (double v : dyadic_maximal(grid, set, constant(set, 0.75))) CHECK(v == doctest::Approx(0.75));

  const int leaf = grid.level(4)[5];
  const int parent = grid.cube(leaf).parent;
  int sibling = -1;
  for (int c : grid.cube(parent).children) {
    if (c != leaf) sibling = c;
  }
  std::vector<double> ind(set.size(), 0.0);
  for (int m : grid.cube(leaf).members) ind[m] = 1.0;
  const auto M = dyadic_maximal(grid, set, ind);
  for (int m : grid.cube(leaf).members) CHECK(M[m] == doctest::Approx(1.0));
  for (int m : grid.cube(sibling).members) CHECK(M[m] == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  double c_min = 1e300, c_max = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> f(set.size()), g(set.size()), fg(set.size()), big(set.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = gauss(rng);
      g[i] = gauss(rng);
      fg[i] = f[i] + g[i];
      big[i] = std::abs(f[i]) + std::abs(gauss(rng));
    }
    const auto Mf = dyadic_maximal(grid, set, f);
    const auto Mg = dyadic_maximal(grid, set, g);
    const auto Mfg = dyadic_maximal(grid, set, fg);
    const auto Mbig = dyadic_maximal(grid, set, big);
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(Mfg[i] <= Mf[i] + Mg[i] + 1e-12);
      CHECK(Mf[i] <= Mbig[i] + 1e-12);
    }
    const double c = std::sqrt(l2_norm_squared(set, Mf) / l2_norm_squared(set, f));
    c_min = std::min(c_min, c);
    c_max = std::max(c_max, c);
  }
  // Doob: ||M f||_2 <= 2 ||f||_2 for dyadic martingales.
  CHECK(c_max <= 2.0);
  CHECK(c_min >= 0.0);
  MESSAGE("L2 maximal ratio in [" << c_min << ", " << c_max << "]");
}

TEST_CASE("boundary function csv") {
  auto set = BoundarySet::make(SetKind::SegmentLine, 16, Json{{"margin", 0.0}});
  const std::string path = "test_operators_f.csv";
  {
    std::ofstream out(path);
    out << "node_id,value\n0,1.5\n3,-2\n15,0.25\n";
  }
  const auto f = read_boundary_function_csv(path, set);
  CHECK(f[0] == 1.5);
  CHECK(f[3] == -2.0);
  CHECK(f[15] == 0.25);
  CHECK(f[1] == 0.0);
  {
    std::ofstream out(path);
    out << "node_id,value\n16,1\n";
  }
  CHECK_THROWS(read_boundary_function_csv(path, set));
  std::remove(path.c_str());
  CHECK_THROWS(read_boundary_function_csv(path, set));
}
