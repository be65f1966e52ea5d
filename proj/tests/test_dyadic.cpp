#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include "adrsq/dyadic.hpp"

using namespace adrsq;

namespace {

// Generation-g IFS cell of a point of the four-corner set, read off its
// coordinates: each step picks the quarter containing the point and rescales.
std::int64_t ifs_cell(Point p, int g) {
  std::int64_t code = 0;
  for (int i = 0; i < g; ++i) {
    const int bx = p[0] >= 0.5 ? 1 : 0;
    const int by = p[1] >= 0.5 ? 1 : 0;
    code = code * 4 + bx + 2 * by;
    p[0] = (p[0] - 0.75 * bx) * 4.0;
    p[1] = (p[1] - 0.75 * by) * 4.0;
  }
  return code;
}

}  // namespace

TEST_CASE("segment cubes are the dyadic intervals") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 1024);
  auto g = build_grid(seg, 0, 8);
  for (int k = 0; k <= 8; ++k) {
    REQUIRE(g.level(k).size() == (std::size_t{1} << k));
    for (int id : g.level(k)) {
      const auto& c = g.cube(id);
      const double lo = c.index * std::ldexp(1.0, -k);
      const double hi = (c.index + 1) * std::ldexp(1.0, -k);
      CHECK(c.members.size() == (std::size_t{1024} >> k));
      for (int m : c.members) {
        CHECK(seg.point(m)[0] >= lo);
        CHECK(seg.point(m)[0] < hi);
      }
      CHECK(c.measure == doctest::Approx(hi - lo).epsilon(1e-12));
    }
  }
  CHECK(g.measured_C1() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("segment at 2^12 satisfies all six properties") {
  const auto t0 = std::chrono::steady_clock::now();
  auto seg = BoundarySet::make(SetKind::SegmentLine, 4096);
  auto g = build_grid(seg, 0, 10, GridConstants{0.25, 1.0, 1.0, 3.0});
  const auto rep = verify_grid(g, seg, 12);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(rep.coverage.pass);
  CHECK(rep.nesting.pass);
  CHECK(rep.size_bounds.pass);
  CHECK(rep.surface_ball.pass);
  CHECK(rep.thin_boundary.pass);
  CHECK(rep.eta_thin >= 0.9);
  CHECK(rep.C2 <= 3.0);
  // Exact strip oracle: a dyadic interval loses floor(tau l / h) nodes on
  // each side that has a neighbour, so an interior one has ratio
  // 2 h floor(tau l / h) / l <= 2 tau. The truncated root has no neighbour
  // and the two level-1 intervals have one each.
  for (std::size_t i = 0; i < rep.tau.size(); ++i) {
    double best = 0.0;
    for (int k : rep.resolvable_levels) {
      const double l = std::ldexp(1.0, -k);
      const double sides = k == 0 ? 0.0 : k == 1 ? 1.0 : 2.0;
      best = std::max(best, sides * std::floor(rep.tau[i] * l * 4096 + 1e-9) / (4096 * l));
    }
    CHECK(rep.strip_ratio[i] == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK(secs < 10.0);
}

TEST_CASE("circle arcs") {
  auto circ = BoundarySet::make(SetKind::Circle, 4096);
  auto g = build_grid(circ, 0, 6);
  for (int k = 0; k <= 6; ++k) CHECK(g.level(k).size() == 7u * (1u << k));
  const double arc_ratio = 2.0 * std::acos(-1.0) / 7.0;  // arc length / 2^-k
  for (const auto& c : g.cubes()) {
    // Node counting snaps an arc to whole cells.
    CHECK(std::abs(c.measure - arc_ratio * c.length) <= circ.spacing() * (1.0 + 1e-9));
  }
  CHECK(g.measured_C1() <= 8.0);
  auto rep = verify_grid(g, circ);
  CHECK(rep.alpha0 >= 0.25);
  CHECK(rep.coverage.pass);
  CHECK(rep.nesting.pass);
  CHECK(rep.surface_ball.pass);
}

TEST_CASE("Cantor cubes are IFS cells") {
  const int depth = 5;
  auto cantor = BoundarySet::make(SetKind::CantorFourCorner, 2, {{"depth", depth}});
  auto g = build_grid(cantor, 0, 2 * depth - 2);
  for (int gen = 0; 2 * gen <= g.k_max(); ++gen) {
    const auto& ids = g.level(2 * gen);
    CHECK(ids.size() == (std::size_t{1} << (2 * gen)));
    for (int id : ids) {
      const auto& members = g.cube(id).members;
      CHECK(members.size() == (std::size_t{1} << (2 * (depth - gen))));
      const auto cell = ifs_cell(cantor.point(members.front()), gen);
      for (int m : members) CHECK(ifs_cell(cantor.point(m), gen) == cell);
    }
  }
  auto rep = verify_grid(g, cantor);
  CHECK(rep.pass());
}

TEST_CASE("greedy net grid on the sphere") {
  auto sph = BoundarySet::make(SetKind::Sphere, 4096);
  auto g = build_grid(sph, 0, 2);
  auto rep = verify_grid(g, sph);
  CHECK(rep.coverage.pass);
  CHECK(rep.nesting.pass);
  CHECK(rep.surface_ball.violations == 0);
  CHECK(rep.alpha0 > 0.0);
  CHECK(g.measured_C1() <= 8.0);
}

TEST_CASE("resolution too coarse names the level") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 64);
  try {
    build_grid(seg, 0, 6);
    FAIL("expected an error");
  } catch (const ConstructionError& e) {
    CHECK(std::string(e.what()).find("level 5") != std::string::npos);
  }
}

TEST_CASE("measured C1 stable under doubling") {
  struct Case {
    SetKind kind;
    int res;
    int k_max;
  };
  for (const Case& c : {Case{SetKind::SegmentLine, 1024, 6}, Case{SetKind::LipschitzGraph, 1024, 6},
                        Case{SetKind::Circle, 1024, 5}, Case{SetKind::CantorFourCorner, 1024, 6},
                        Case{SetKind::Sphere, 4096, 1}}) {
    CAPTURE(to_string(c.kind));
    const Json params = c.kind == SetKind::LipschitzGraph ? Json{{"lipschitz", 0.5}} : Json::object();
    const int fine = c.kind == SetKind::CantorFourCorner ? 4 * c.res : 2 * c.res;
    auto a = BoundarySet::make(c.kind, c.res, params);
    auto b = BoundarySet::make(c.kind, fine, params);
    const double ca = build_grid(a, 0, c.k_max).measured_C1();
    const double cb = build_grid(b, 0, c.k_max).measured_C1();
    CHECK(cb == doctest::Approx(ca).epsilon(0.2));
  }
}

TEST_CASE("locate and descendants") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 1024);
  auto g = build_grid(seg, 0, 5);
  const int x = seg.index().nearest({0.3, 0.0, 0.0}).index;
  const int q = locate(g, x, 1);
  CHECK(g.cube(q).index == 0);
  CHECK(g.cube(q).level == 1);
  for (int id = 0; id < static_cast<int>(g.size()); ++id) CHECK(locate(g, g.cube(id).center, g.cube(id).level) == id);
  CHECK_THROWS(locate(g, x, 9));
  CHECK_THROWS(locate(g, -1, 2));

  std::mt19937 rng(3);
  for (int t = 0; t < 50; ++t) {
    const int node = static_cast<int>(rng() % seg.size());
    for (int k = 1; k <= 5; ++k) {
      const int child = locate(g, node, k);
      CHECK(g.cube(child).parent == locate(g, node, k - 1));
      CHECK(std::binary_search(g.cube(child).members.begin(), g.cube(child).members.end(), node));
    }
  }

  const int root = g.top_cubes().front();
  CHECK(descendants(g, root, [](const DyadicCube& c) { return c.level <= 2; }).size() == 7u);
  CHECK(descendants(g, root, [](const DyadicCube& c) { return c.length > 0.125; }).size() == 7u);
  const int leaf = g.level(5).front();
  CHECK(descendants(g, leaf) == std::vector<int>{leaf});
  CHECK(descendants(g, leaf, [](const DyadicCube&) { return false; }).empty());
  // Depth-first order: a child follows its parent immediately.
  const auto all = descendants(g, root);
  CHECK(all.size() == g.size());
  CHECK(g.cube(all[1]).parent == all[0]);
  CHECK(g.cube(all[2]).parent == all[1]);
}

TEST_CASE("cutoff on a dyadic interval") {
  // A margin gives [0, 1/2) a neighbour on both sides.
  auto seg = BoundarySet::make(SetKind::SegmentLine, 2048, {{"margin", 0.25}});
  auto g = build_grid(seg, 0, 8);
  const int q = g.level(1).front();  // [0, 1/2)
  const int m = 4;
  const auto cut = build_cutoff(g, seg, q, m);
  const double s = std::ldexp(1.0, -m);
  // Strip oracle: the two end subcubes are discarded, R = [2^-m, 1/2 - 2^-m).
  CHECK(cut.discarded_subcubes == 2);
  CHECK(cut.boundary_measure == doctest::Approx(2.0 * s).epsilon(1e-9));
  CHECK(cut.boundary_ratio >= 1.0 / 8);
  CHECK(cut.boundary_ratio <= 8.0);
  for (int x : cut.core_set) {
    CHECK(seg.point(x)[0] > s);
    CHECK(seg.point(x)[0] < 0.5 - s);
    CHECK(cut.values[x] == 1.0);
  }
  const auto& members = g.cube(q).members;
  for (int x = 0; x < static_cast<int>(seg.size()); ++x) {
    CHECK(cut.values[x] >= 0.0);
    CHECK(cut.values[x] <= 1.0);
    if (!std::binary_search(members.begin(), members.end(), x)) CHECK(cut.values[x] == 0.0);
  }
  CHECK(cut.lipschitz <= 1.0 / cut.transition * (1.0 + 1e-9));
  CHECK(cut.lipschitz_constant <= 1.0 + 1e-9);

  const auto coarse = build_cutoff(g, seg, q, 3);
  CHECK_FALSE(coarse.core_set.empty());
  CHECK_THROWS(build_cutoff(g, seg, q, 2));
  CHECK_THROWS(build_cutoff(g, seg, q, 9));
}

TEST_CASE("grid json round trip") {
  auto circ = BoundarySet::make(SetKind::Circle, 512);
  auto g = build_grid(circ, 0, 3);
  const Json doc = to_json(g);
  CHECK(doc.contains("constants"));
  CHECK(doc.at("cubes").at(0).contains("node_ids"));
  auto back = grid_from_json(doc, circ);
  REQUIRE(back.size() == g.size());
  for (int id = 0; id < static_cast<int>(g.size()); ++id) {
    CHECK(back.cube(id).members == g.cube(id).members);
    CHECK(back.cube(id).children == g.cube(id).children);
  }
  CHECK(back.measured_C1() == doctest::Approx(g.measured_C1()));
}
