#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "adrsq/tb.hpp"

using namespace adrsq;

namespace {

Box window2(double x0, double y0, double x1, double y1) {
  Box b;
  b.lo = {x0, y0, 0.0};
  b.hi = {x1, y1, 0.0};
  return b;
}

// Small line model shared by most cases: 256 core nodes, grid 0..4.
struct Line {
  BoundarySet set = BoundarySet::make(SetKind::SegmentLine, 256, {{"margin", 2.0}});
  DyadicGrid grid = build_grid(set, 0, 4);
  WhitneyDecomposition whit = build_whitney(set, window2(-2.0, 0.0, 3.0, 4.0), 0, 9);
  WhitneyRegions regions{whit, grid, set};
  Kernel kernel;
  ThetaField theta1 = theta_field(kernel, set, whit, std::vector<double>(set.size(), 1.0), {}, 0);
};

Line& line() {
  static Line l;
  return l;
}

std::vector<int> random_family(const DyadicGrid& g, int root, std::mt19937_64& rng) {
  std::vector<int> fam;
  std::vector<int> stack{root};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (!stack.empty()) {
    const int q = stack.back();
    stack.pop_back();
    for (int ch : g.cube(q).children) {
      if (u(rng) < 0.3) fam.push_back(ch);
      else stack.push_back(ch);
    }
  }
  std::sort(fam.begin(), fam.end());
  return fam;
}

bool members_subset(const DyadicCube& a, const DyadicCube& b) {
  return std::includes(b.members.begin(), b.members.end(), a.members.begin(), a.members.end());
}

}  // namespace

TEST_CASE("box mass against a constant kernel") {
  auto& L = line();
  Kernel k;
  k.kind = KernelKind::Constant;
  k.coefficient = 0.75;
  const std::vector<double> one(L.set.size(), 1.0);
  const auto field = theta_field(k, L.set, L.whit, one, {}, 0);
  const double theta = k.coefficient * L.set.total_measure();
  int checked = 0;
  for (std::size_t b = 0; b < L.whit.size(); ++b) {
    const auto& box = L.whit.box(static_cast<int>(b));
    const double xc = box.corner[0] + 0.5 * box.side;
    const double yc = box.corner[1] + 0.5 * box.side;
    // Above the interior of the model the distance is the height.
    if (xc < -1.5 || xc > 2.5 || yc > 1.0) continue;
    const double expect = theta * theta * box.side * box.side / (yc * yc);
    CHECK(field.mass[b] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(field.mass_flat[b] == doctest::Approx(theta * theta * box.side * box.side / yc).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("field is quadratic in f and missing boxes throw") {
  auto& L = line();
  std::vector<double> f(L.set.size());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (auto& v : f) v = g(rng);
  std::vector<double> f3 = f;
  for (auto& v : f3) v *= 3.0;
  const std::vector<int> some{0, 5, 17, 40};
  const auto a = theta_field(L.kernel, L.set, L.whit, f, {}, 1, &some);
  const auto b = theta_field(L.kernel, L.set, L.whit, f3, {}, 1, &some);
  const auto c = a.scaled(3.0);
  for (int i : some) {
    CHECK(b.mass[i] == doctest::Approx(c.mass[i]).epsilon(1e-12));
    CHECK(b.mass[i] == doctest::Approx(9.0 * a.mass[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(local_square_function(std::vector<int>{0, 1}, a), Error);
  CHECK(local_square_function(some, a) == doctest::Approx(a.mass[0] + a.mass[5] + a.mass[17] + a.mass[40]));
}

TEST_CASE("summed multiplicity is the cube-wise sum") {
  auto& L = line();
  FunctionalSpec sum;
  sum.multiplicity = Multiplicity::Sum;
  for (std::size_t q = 0; q < L.grid.size(); q += 3) {
    const int qi = static_cast<int>(q);
    // Oracle: (1/sigma(Q)) sum_{Q' in Q} sigma(Q') |Theta 1|^2(U_Q')
    double oracle = 0.0;
    for (int c : descendants(L.grid, qi)) {
      double u = 0.0;
      for (int b : L.regions.region(c)) u += L.theta1.mass[b];
      oracle += L.grid.cube(c).measure * u;
    }
    oracle /= L.grid.cube(qi).measure;
    CHECK(carleson_functional(L.regions, L.theta1, qi, sum) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(carleson_functional(L.regions, L.theta1, qi, FunctionalSpec{}) <= oracle * (1.0 + 1e-12));
  }
}

TEST_CASE("cone values are nonnegative and additive over cubes") {
  auto& L = line();
  const int top = L.grid.top_cubes().front();
  const int x = L.grid.cube(top).members[37];
  const auto gq = cone(L.regions, x, ConeSpec{ConeKind::GammaQ, top});
  double sum = 0.0;
  for (int c : gq.cubes) sum += local_square_function(L.regions.region(c), L.theta1);
  CHECK(local_square_function(gq, L.theta1) <= sum * (1.0 + 1e-12));
  CHECK(local_square_function(gq, L.theta1) >= 0.0);
}

TEST_CASE("stopping time examples") {
  auto& L = line();
  const int top = L.grid.top_cubes().front();

  SUBCASE("constant one never stops") {
    const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::Constant1}, 2.0, 2.0);
    for (std::size_t q = 0; q < L.grid.size(); ++q) {
      const auto fam = stopping_time(L.grid, L.set, static_cast<int>(q), sys.re[q], 2.0);
      CHECK(fam.members.empty());
      CHECK_FALSE(fam.degenerate);
      CHECK(fam.eta_packing == 1.0);
    }
  }
  SUBCASE("half indicator stops at the second child") {
    const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::HalfIndicator}, 4.0, 2.0);
    const auto fam = stopping_time(L.grid, L.set, top, sys.re[top], 4.0);
    const auto& c = L.grid.cube(top);
    REQUIRE(c.children.size() == 2);
    CHECK(fam.members == std::vector<int>{c.children[1]});
    CHECK(fam.maximal);
    CHECK(fam.packing_ratio == doctest::Approx(L.grid.cube(c.children[1]).measure / c.measure).epsilon(1e-14));
    CHECK(fam.packing_ratio == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("zero stops at the root") {
    const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::Zero}, 2.0, 2.0);
    const auto fam = stopping_time(L.grid, L.set, top, sys.re[top], 2.0);
    CHECK(fam.degenerate);
    CHECK(fam.members == std::vector<int>{top});
    CHECK(fam.eta_packing == 0.0);
  }
  SUBCASE("scaling up never enlarges the stopped region") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TestSystemSpec spec{TestSystemKind::RandomAccretive, 1.0, seed, false};
      const auto sys = make_test_system(L.grid, L.set, spec, 4.0, 2.0);
      double prev = 2.0;
      for (double lambda : {1.0, 2.0, 4.0, 8.0}) {
        auto b = sys.re[top];
        for (auto& v : b) v *= lambda;
        const auto fam = stopping_time(L.grid, L.set, top, b, 4.0);
        CHECK(fam.packing_ratio <= prev + 1e-14);
        prev = fam.packing_ratio;
      }
    }
  }
  CHECK_THROWS_AS(stopping_time(L.grid, L.set, top, std::vector<double>(L.set.size(), 1.0), 0.0), Error);
}

TEST_CASE("two Good(Q) definitions agree with brute force") {
  auto& L = line();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    for (int root : L.grid.top_cubes()) {
      const auto fam = random_family(L.grid, root, rng);
      const auto a = good_cubes(L.grid, root, fam);
      const auto b = good_cubes_by_containment(L.grid, root, fam);
      CHECK(a == b);
      std::vector<int> brute;
      for (int c : descendants(L.grid, root)) {
        bool inside = false;
        for (int k : fam) inside = inside || members_subset(L.grid.cube(c), L.grid.cube(k));
        if (!inside) brute.push_back(c);
      }
      std::sort(brute.begin(), brute.end());
      CHECK(a == brute);
    }
  }
}

TEST_CASE("random accretive systems certify Good(Q)") {
  auto& L = line();
  const double C0 = 4.0;
  for (bool cplx : {false, true}) {
    TestSystemSpec spec{TestSystemKind::RandomAccretive, 1.0, 99, cplx};
    const auto sys = make_test_system(L.grid, L.set, spec, C0, 2.0);
    CHECK(sys.complex() == cplx);
    for (std::size_t q = 0; q < L.grid.size(); ++q) {
      const int qi = static_cast<int>(q);
      const auto fam = stopping_time(L.grid, L.set, qi, sys.re[q], C0);
      CHECK_FALSE(fam.degenerate);
      const auto good = good_cubes(L.grid, qi, fam.members);
      const std::vector<double> none;
      CHECK(good_certificate(L.grid, L.set, good, sys.re[q], cplx ? sys.im[q] : none) >= 1.0 / C0);
    }
  }
  CHECK_THROWS_AS(make_test_system(L.grid, L.set, {TestSystemKind::RandomAccretive}, 4.0, 2.0), Error);
}

TEST_CASE("hypothesis checks") {
  auto& L = line();
  const Kernel k;
  SUBCASE("zero fails the lower bound only") {
    const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::Zero}, 2.0, 2.0);
    const auto rep = verify_tb_hypotheses(sys, L.regions, k, 0);
    CHECK_FALSE(rep.pass_eq1);
    CHECK(rep.pass_eq2);
    CHECK(rep.pass_eq3);
    CHECK_FALSE(rep.pass());
    for (const auto& r : rep.eq3) CHECK(r.value == 0.0);
  }
  SUBCASE("a large constant fails the size bound") {
    const double C0 = 2.0, p = 2.0;
    TestSystemSpec spec{TestSystemKind::Constant, std::pow(2.0 * C0, 1.0 / p)};
    const auto sys = make_test_system(L.grid, L.set, spec, C0, p);
    const auto rep = verify_tb_hypotheses(sys, L.regions, k, 0);
    CHECK(rep.pass_eq1);
    CHECK_FALSE(rep.pass_eq2);
    for (const auto& r : rep.eq2) CHECK(r.value == doctest::Approx(2.0 * C0).epsilon(1e-12));
  }
  SUBCASE("constant one passes") {
    const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::Constant1}, 2.0, 2.0);
    const auto rep = verify_tb_hypotheses(sys, L.regions, k, 0);
    CHECK(rep.pass());
    for (const auto& r : rep.eq1) CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("packing") {
  auto& L = line();
  const int top = L.grid.top_cubes().front();
  StoppingFamily all;
  all.parent = top;
  all.members = L.grid.cube(top).children;
  all.packing_ratio = 1.0;
  all.eta_packing = 0.0;
  const auto rep = verify_packing(L.grid, {all}, 0.5);
  CHECK_FALSE(rep.pass);
  CHECK(rep.min_eta == 0.0);
  CHECK(rep.worst == top);

  const auto sys = make_test_system(L.grid, L.set, {TestSystemKind::HalfIndicator}, 4.0, 2.0);
  std::vector<StoppingFamily> fams;
  for (std::size_t q = 0; q < L.grid.size(); ++q) {
    fams.push_back(stopping_time(L.grid, L.set, static_cast<int>(q), sys.re[q], 4.0));
  }
  const auto half = verify_packing(L.grid, fams, 0.25);
  CHECK(half.pass);
  CHECK(half.min_eta == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS_AS(verify_packing(L.grid, fams, 0.0), Error);
}

TEST_CASE("K(eps) and level sets") {
  auto& L = line();
  CHECK(K_epsilon(L.regions, L.theta1, 1.0) == 0.0);
  CHECK(K_epsilon(L.regions, L.theta1, 2.0) == 0.0);
  double prev = 0.0;
  for (double eps : {1.0, 0.5, 0.2, 0.1, 0.03, 0.01}) {
    const double k = K_epsilon(L.regions, L.theta1, eps);
    CHECK(k >= prev);
    prev = k;
  }
  // Below the finest cube K(eps) is the full Carleson sup.
  double sup = 0.0;
  for (std::size_t q = 0; q < L.grid.size(); ++q) {
    sup = std::max(sup, carleson_functional(L.regions, L.theta1, static_cast<int>(q), FunctionalSpec{}));
  }
  CHECK(K_epsilon(L.regions, L.theta1, 1e-3) == doctest::Approx(sup).epsilon(1e-12));
  CHECK_THROWS_AS(K_epsilon(L.regions, L.theta1, 0.0), Error);

  const int top = L.grid.top_cubes().front();
  double last = 1.0;
  for (double N : {1e-12, 1e-9, 1e-6, 1e-3, 1.0}) {
    const double fr = level_set_fraction(L.regions, L.theta1, top, N, 1.5);
    CHECK(fr <= last);
    CHECK(fr >= 0.0);
    last = fr;
  }
  // Theta 1 vanishes nowhere in the cones, so tiny N sees all of Q.
  CHECK(level_set_fraction(L.regions, L.theta1, top, 1e-300, 1.5) == doctest::Approx(1.0));
  CHECK(level_set_fraction(L.regions, L.theta1, top, 1e300, 1.5) == 0.0);
  CHECK_THROWS_AS(level_set_fraction(L.regions, L.theta1, top, 1.0, 2.0), Error);
  CHECK_THROWS_AS(level_set_fraction(L.regions, L.theta1, top, 0.0, 1.5), Error);
}

TEST_CASE("Carleson norm and embedding") {
  auto& L = line();
  const std::size_t nq = L.grid.size();
  std::vector<double> alpha(nq, 0.0);
  const std::vector<double> zero(L.set.size(), 0.0);
  const std::vector<double> one(L.set.size(), 1.0);

  SUBCASE("zero function") {
    alpha.assign(nq, 1.0);
    const auto r = carleson_embedding_check(L.grid, L.set, alpha, zero);
    CHECK(r.lhs == 0.0);
    CHECK(r.ratio == 0.0);
    // Every cube charged: norm is the number of levels.
    CHECK(r.norm == doctest::Approx(L.grid.level_count()).epsilon(1e-12));
  }
  SUBCASE("single cube") {
    const int top = L.grid.top_cubes().front();
    alpha[top] = 1.0;
    const auto r = carleson_embedding_check(L.grid, L.set, alpha, one);
    double core = 0.0;
    for (int n : L.grid.nodes()) core += L.set.weight(n);
    CHECK(r.norm == doctest::Approx(1.0));
    CHECK(r.lhs == doctest::Approx(L.grid.cube(top).measure).epsilon(1e-12));
    CHECK(r.rhs == doctest::Approx(core).epsilon(1e-12));
    CHECK(r.ratio <= 1.0 + 1e-12);
  }
  SUBCASE("random coefficients") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
      for (auto& a : alpha) a = u(rng) < 0.4 ? u(rng) : 0.0;
      std::vector<double> f(L.set.size());
      for (auto& v : f) v = g(rng);
      const auto r = carleson_embedding_check(L.grid, L.set, alpha, f);
      CHECK(r.ratio <= 1.0 + 1e-12);
    }
  }
  alpha.assign(nq, 0.0);
  alpha[0] = -1.0;
  CHECK_THROWS_AS(carleson_norm(L.grid, alpha), Error);
  CHECK_THROWS_AS(carleson_norm(L.grid, std::vector<double>(nq + 1, 0.0)), Error);
}

TEST_CASE("T1 functional is quadratic") {
  auto& L = line();
  std::vector<BoundaryFunction> none;
  const auto a = t1_check(L.regions, L.theta1, L.kernel, none, 0, 1.0, 1.0);
  const auto b = t1_check(L.regions, L.theta1.scaled(3.0), L.kernel, none, 0, 1.0, 1.0);
  CHECK(b.carleson_sup == doctest::Approx(9.0 * a.carleson_sup).epsilon(1e-12));
  CHECK(a.worst_cube == b.worst_cube);
  CHECK(a.rows.size() == L.grid.size());

  std::vector<double> spike(L.set.size(), 0.0);
  spike[L.grid.nodes()[100]] = 1.0;
  const auto c = t1_check(L.regions, L.theta1, L.kernel, {spike}, 0, 1.0, 1e9);
  REQUIRE(c.global_ratios.size() == 1);
  CHECK(std::isfinite(c.global_ratios[0]));
  CHECK(c.global_ratios[0] > 0.0);
}

TEST_CASE("bounded tail") {
  auto circle = BoundarySet::make(SetKind::Circle, 1024, {{"radius", 1.0}});
  Kernel env;
  env.kind = KernelKind::Envelope;
  env.c_psi = 16.0;
  const std::vector<double> zero(circle.size(), 0.0);
  const std::vector<double> one(circle.size(), 1.0);
  const auto z = bounded_tail(circle, env, zero, 6);
  CHECK(z.total == 0.0);
  CHECK(z.ratio_to_l2 == 0.0);

  // On the unit circle the average of |X - y|^-2 is 1/(r^2 - 1), so
  // Theta 1 = 2 pi/(r + 1) and the annulus integral of |Theta 1|^2/delta is
  // 8 pi^3 [log((r - 1)/(r + 1))/4 - 1/(2 (r + 1))].
  auto prim = [](double r) { return 0.25 * std::log((r - 1.0) / (r + 1.0)) - 0.5 / (r + 1.0); };
  const auto rep = bounded_tail(circle, env, one, 8);
  REQUIRE(rep.contributions.size() == 6);
  CHECK(rep.r0 == doctest::Approx(2.0));
  const double pi3 = std::pow(std::numbers::pi, 3);
  for (std::size_t i = 0; i < rep.k.size(); ++i) {
    const double a = std::ldexp(rep.r0, rep.k[i]);
    CHECK(rep.contributions[i] == doctest::Approx(8.0 * pi3 * (prim(2.0 * a) - prim(a))).epsilon(1e-6));
  }
  for (double r : rep.successive_ratios) {
    CHECK(r >= 0.4);
    CHECK(r <= 0.6);
  }
  CHECK(rep.ratio_to_l2 == doctest::Approx(rep.total / (2.0 * std::numbers::pi)).epsilon(1e-9));

  // The batched form reproduces the single-function one.
  const auto many = bounded_tail(circle, env, std::vector<BoundaryFunction>{zero, one}, 8);
  CHECK(many[0].total == 0.0);
  CHECK(many[1].total == doctest::Approx(rep.total).epsilon(1e-13));

  auto line_set = BoundarySet::make(SetKind::SegmentLine, 64);
  CHECK_THROWS_AS(bounded_tail(line_set, env, std::vector<double>(line_set.size(), 1.0), 6), Error);
  CHECK_THROWS_AS(bounded_tail(circle, env, one, 2), Error);
}
