#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "adrsq/geometry.hpp"

namespace adrsq {

struct DyadicCube {
  int level = 0;
  std::int64_t index = 0;
  std::vector<int> members;  // node ids, ascending
  int center = -1;           // node id of x^k_j
  int parent = -1;
  std::vector<int> children;
  double measure = 0.0;
  double length = 1.0;    // 2^-level
  double diameter = 0.0;  // node-set diameter plus one spacing
};

/// Constants of the grid lemma. The lemma only asserts existence, so grids
/// carry both declared values (thresholds) and measured ones.
struct GridConstants {
  double alpha0 = 0.125;
  double eta_thin = 1.0;
  double C1 = 8.0;
  double C2 = 8.0;
};

class DyadicGrid {
 public:
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  int level_count() const { return k_max_ - k_min_ + 1; }

  const std::vector<DyadicCube>& cubes() const { return cubes_; }
  const DyadicCube& cube(int id) const { return cubes_[id]; }
  std::size_t size() const { return cubes_.size(); }
  const std::vector<int>& level(int k) const { return by_level_[k - k_min_]; }
  const std::vector<int>& top_cubes() const { return level(k_min_); }

  /// Node ids the grid partitions (the core of a truncated set).
  const std::vector<int>& nodes() const { return nodes_; }
  /// Cube of node i at level k, or -1 when the node is outside the grid.
  int cube_of(int node, int k) const { return node_cube_[k - k_min_][node]; }
  int node_count() const { return node_cube_.empty() ? 0 : static_cast<int>(node_cube_.front().size()); }

  const GridConstants& declared() const { return declared_; }
  /// C1 and alpha0 measured at construction.
  double measured_C1() const { return measured_C1_; }
  double measured_alpha0() const { return measured_alpha0_; }

  /// True when cube a lies inside cube b (a == b included).
  bool contains(int b, int a) const;

  friend DyadicGrid build_grid(const BoundarySet&, int, int, const GridConstants&);
  friend DyadicGrid grid_from_json(const Json&, const BoundarySet&);

 private:
  void finish(const BoundarySet& set);

  int k_min_ = 0;
  int k_max_ = 0;
  std::vector<DyadicCube> cubes_;
  std::vector<std::vector<int>> by_level_;
  std::vector<std::vector<int>> node_cube_;
  std::vector<int> nodes_;
  GridConstants declared_;
  double measured_C1_ = 0.0;
  double measured_alpha0_ = 0.0;
};

/// Nested partitions of the (core) nodes for levels k_min..k_max. Kinds with
/// a canonical dyadic parametrisation use it; others get greedy nested nets
/// with parent-consistent nearest-centre assignment (ties to lowest id).
DyadicGrid build_grid(const BoundarySet& set, int k_min, int k_max,
                      const GridConstants& declared = GridConstants{});

struct GridPropertyCheck {
  bool pass = false;
  int violations = 0;
  std::string detail;
};

struct GridReport {
  GridPropertyCheck coverage;     // (1)
  GridPropertyCheck nesting;      // (2), (3)
  GridPropertyCheck size_bounds;  // (4)
  GridPropertyCheck surface_ball; // (5)
  GridPropertyCheck thin_boundary; // (6)
  double C1 = 0.0;
  double alpha0 = 0.0;
  double eta_thin = 0.0;
  double C2 = 0.0;
  std::vector<double> tau;
  std::vector<double> strip_ratio;  // max over resolvable cubes, per tau
  std::vector<int> resolvable_levels;
  bool pass() const {
    return coverage.pass && nesting.pass && size_bounds.pass && surface_ball.pass && thin_boundary.pass;
  }
};

GridReport verify_grid(const DyadicGrid& grid, const BoundarySet& set, int tau_samples = 12);

int locate(const DyadicGrid& grid, int node, int k);

/// Q and its descendants satisfying `keep`, depth first, children in index
/// order.
std::vector<int> descendants(const DyadicGrid& grid, int q,
                             const std::function<bool(const DyadicCube&)>& keep = {});

struct Cutoff {
  int parent_cube = -1;
  int m = 0;
  double scale = 0.0;          // 2^-m
  double transition = 0.0;     // C1^2 2^-m, width of the bump falloff
  std::vector<double> values;  // per node of the set
  std::vector<int> core_set;   // nodes where the cutoff is 1
  std::vector<int> kept_subcubes;
  int discarded_subcubes = 0;
  double boundary_measure = 0.0;  // sigma(Q' \ R)
  double boundary_ratio = 0.0;    // boundary_measure / (2^-m 2^-k(n-1))
  double lipschitz = 0.0;         // over neighbouring node pairs
  double lipschitz_constant = 0.0;  // lipschitz * 2^-m
};

Cutoff build_cutoff(const DyadicGrid& grid, const BoundarySet& set, int q, int m);

/// Node-set distance between the members of a cube and the rest of E.
double distance_to_complement(const DyadicGrid& grid, const BoundarySet& set, int node, int k,
                              double max_distance = std::numeric_limits<double>::infinity());

Json to_json(const DyadicGrid& grid);
DyadicGrid grid_from_json(const Json& doc, const BoundarySet& set);

}  // namespace adrsq
