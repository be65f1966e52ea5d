#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "adrsq/geometry.hpp"

using namespace adrsq;

namespace {

constexpr double kPi = std::numbers::pi;

int nearest_node(const BoundarySet& s, const Point& p) { return s.index().nearest(p).index; }

}  // namespace

TEST_CASE("construction totals") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 1024);
  CHECK(seg.size() == 1024);
  CHECK(seg.total_measure() == doctest::Approx(1.0).epsilon(1e-12));

  auto circ = BoundarySet::make(SetKind::Circle, 4096, {{"radius", 1.0}});
  CHECK(std::abs(circ.total_measure() - 2.0 * kPi) < 1e-9);

  // The IFS measure gives each generation-5 cell mass 4^-5.
  auto cantor = BoundarySet::make(SetKind::CantorFourCorner, 2, {{"depth", 5}});
  REQUIRE(cantor.size() == 1024);
  for (const auto& nd : cantor.nodes()) CHECK(nd.weight == std::ldexp(1.0, -10));
  // Every node lies in the closed unit square and in a distinct leaf cell.
  for (const auto& nd : cantor.nodes()) {
    CHECK(nd.point[0] > 0.0);
    CHECK(nd.point[0] < 1.0);
  }
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(BoundarySet::make(SetKind::LipschitzGraph, 64, {{"lipschitz", -1.0}}), ConstructionError);
  CHECK_THROWS_AS(BoundarySet::make(SetKind::Circle, 64, {{"radius", 0.0}}), ConstructionError);
  CHECK_THROWS_AS(BoundarySet::make(SetKind::Sphere, 1), ConstructionError);
  CHECK_THROWS_AS(set_kind_from_string("Torus"), ConstructionError);
}

TEST_CASE("segment pad keeps the core uniform") {
  auto s = BoundarySet::make(SetKind::SegmentLine, 256, {{"margin", 1.0}, {"pad", 64.0}, {"grade", 1.1}});
  CHECK(s.core_nodes().size() == 256);
  CHECK(s.total_measure() == doctest::Approx(1.0 + 2.0 + 128.0).epsilon(1e-10));
  CHECK(s.delta({-70.0, 0.0, 0.0}) == doctest::Approx(70.0 - 65.0));
}

TEST_CASE("sigma_ball oracles") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 4096);
  const int mid = nearest_node(seg, {0.5, 0.0, 0.0});
  CHECK(std::abs(sigma_ball(seg, {mid, 0.1}) - 0.2) < 2.0 / 4096);

  auto circ = BoundarySet::make(SetKind::Circle, 4096);
  const double arc = 4.0 * std::asin(0.5);
  CHECK(std::abs(sigma_ball(circ, {0, 1.0}) - arc) < 2.0 * circ.spacing());

  for (const auto* s : {&seg, &circ}) {
    CHECK(sigma_ball(*s, {7, 0.1 * s->spacing()}) == s->weight(7));
  }

  // Monotone in the radius, total at the diameter.
  double prev = 0.0;
  for (double r = 0.01; r < 2.0; r *= 1.3) {
    const double v = sigma_ball(circ, {11, r});
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(sigma_ball(circ, {11, circ.diameter()}) == doctest::Approx(circ.total_measure()));
}

TEST_CASE("verify_adr on the line") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 4096);
  const auto rep = verify_adr(seg, 400, 1);
  CHECK(rep.samples == 400);
  // Counting nodes within r of a node is exact to within h/(2r) <= 1/16.
  CHECK(rep.c_lower == doctest::Approx(2.0).epsilon(1.0 / 16));
  CHECK(rep.c_upper == doctest::Approx(2.0).epsilon(1.0 / 16));
  CHECK(rep.pass);
}

TEST_CASE("verify_adr on the circle") {
  auto circ = BoundarySet::make(SetKind::Circle, 4096);
  const auto rep = verify_adr(circ, 400, 2);
  // 2r <= 4 arcsin(r/2) <= pi r on (0, 1]; radii up to 1 only. Node
  // counting adds a relative error of at most h/(2r) <= 1/16.
  CHECK(rep.c_lower >= 2.0 * (1.0 - 1.0 / 16));
  CHECK(rep.c_upper <= kPi * (1.0 + 1.0 / 16));
  CHECK(rep.pass);
}

TEST_CASE("verify_adr on the Cantor set") {
  auto cantor = BoundarySet::make(SetKind::CantorFourCorner, 2, {{"depth", 6}});
  // Self-similarity oracle: the ball of radius sqrt(2)*4^-g about a node
  // holds its whole generation-g cell, so sigma >= 4^-g.
  for (int g = 1; g <= 4; ++g) {
    const double side = std::ldexp(1.0, -2 * g);
    for (int i = 0; i < static_cast<int>(cantor.size()); i += 97) {
      CHECK(sigma_ball(cantor, {i, std::sqrt(2.0) * side}) >= side * (1.0 - 1e-12));
    }
  }
  const auto rep = verify_adr(cantor, 400, 3);
  CHECK(rep.pass);
  CHECK(rep.c_lower > 1.0 / cantor.adr_constant());
}

TEST_CASE("verify_adr passes on every kind from resolution 64") {
  for (int res : {64, 256, 4096}) {
    CAPTURE(res);
    CHECK(verify_adr(BoundarySet::make(SetKind::SegmentLine, res), 200, 5).pass);
    CHECK(verify_adr(BoundarySet::make(SetKind::LipschitzGraph, res, {{"lipschitz", 0.5}}), 200, 5).pass);
    CHECK(verify_adr(BoundarySet::make(SetKind::Circle, res), 200, 5).pass);
    CHECK(verify_adr(BoundarySet::make(SetKind::Sphere, res), 200, 5).pass);
    CHECK(verify_adr(BoundarySet::make(SetKind::CantorFourCorner, res), 200, 5).pass);
  }
  auto two = BoundarySet::make(SetKind::Circle, 2);
  CHECK_NOTHROW(verify_adr(two, 1, 1));
}

TEST_CASE("delta") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 64, {{"margin", 1.0}});
  CHECK(seg.delta({0.3, 0.7, 0.0}) == doctest::Approx(0.7));
  CHECK(seg.delta(seg.point(5)) == 0.0);

  auto circ = BoundarySet::make(SetKind::Circle, 64);
  CHECK(circ.delta({2.0, 0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(circ.delta({0.0, 0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(circ.delta(circ.point(3)) == doctest::Approx(0.0).epsilon(1e-14));

  auto sph = BoundarySet::make(SetKind::Sphere, 256);
  CHECK(sph.delta({0.0, 0.0, 3.0}) == doctest::Approx(2.0));

  auto graph = BoundarySet::make(SetKind::LipschitzGraph, 256, {{"lipschitz", 1.0}});
  // Peak of the zig-zag at x = 1/8 has height 1/8.
  CHECK(graph.delta({0.125, 0.5, 0.0}) == doctest::Approx(0.375));
  CHECK(graph.delta({0.0, -0.25, 0.0}) == doctest::Approx(0.25));
}

TEST_CASE("delta is 1-Lipschitz") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (auto kind : {SetKind::SegmentLine, SetKind::LipschitzGraph, SetKind::Circle, SetKind::Sphere,
                    SetKind::CantorFourCorner}) {
    auto s = BoundarySet::make(kind, 1024);
    const double slack = 2.0 * s.spacing();
    for (int t = 0; t < 500; ++t) {
      Point a{u(rng), u(rng), s.ambient_dim() == 3 ? u(rng) : 0.0};
      Point b{u(rng), u(rng), s.ambient_dim() == 3 ? u(rng) : 0.0};
      CHECK(std::abs(s.delta(a) - s.delta(b)) <= distance(a, b) + slack);
    }
  }
}

TEST_CASE("distance to boxes agrees with sampled point distances") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> side(0.01, 0.5);
  for (auto kind : {SetKind::SegmentLine, SetKind::LipschitzGraph, SetKind::Circle, SetKind::CantorFourCorner}) {
    auto s = BoundarySet::make(kind, 512);
    for (int t = 0; t < 200; ++t) {
      Box b;
      b.lo = {u(rng), u(rng), 0.0};
      const double w = side(rng);
      b.hi = {b.lo[0] + w, b.lo[1] + w, 0.0};
      const double d = s.distance_to_box(b);
      double sampled = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 16; ++i) {
        for (int j = 0; j <= 16; ++j) {
          sampled = std::min(sampled, s.delta({b.lo[0] + w * i / 16, b.lo[1] + w * j / 16, 0.0}));
        }
      }
      CHECK(d <= sampled + 1e-12);
      CHECK(d >= sampled - w / 16 * std::sqrt(0.5) - 1e-12);
    }
  }
}

TEST_CASE("canonical cells") {
  auto seg = BoundarySet::make(SetKind::SegmentLine, 1024);
  const int i = nearest_node(seg, {0.3, 0.0, 0.0});
  CHECK(*seg.canonical_cell(i, 1) == 0);
  CHECK(*seg.canonical_cell(i, 2) == 1);

  auto cantor = BoundarySet::make(SetKind::CantorFourCorner, 2, {{"depth", 3}});
  // Even levels are IFS generations, odd levels split them by the x-digit.
  for (int k = 0; k <= 6; ++k) {
    std::set<std::int64_t> labels;
    for (int n = 0; n < static_cast<int>(cantor.size()); ++n) labels.insert(*cantor.canonical_cell(n, k));
    CHECK(labels.size() == (std::size_t{1} << k));
  }
  CHECK_FALSE(cantor.canonical_cell(0, 7).has_value());
  CHECK_FALSE(BoundarySet::make(SetKind::Sphere, 64).has_canonical_cells());
}

TEST_CASE("json round trip") {
  auto s = BoundarySet::make(SetKind::Circle, 128, {{"radius", 2.0}});
  const Json doc = to_json(s);
  for (const char* key : {"kind", "n", "params", "nodes"}) CHECK(doc.contains(key));
  auto back = boundary_set_from_json(doc);
  REQUIRE(back.size() == s.size());
  CHECK(back.total_measure() == doctest::Approx(s.total_measure()));
  CHECK(back.point(17) == s.point(17));
  CHECK(back.delta({0.0, 0.0, 0.0}) == doctest::Approx(2.0));
}
