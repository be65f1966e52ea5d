#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "adrsq/dyadic.hpp"

namespace adrsq {

struct WhitneyBox {
  Point corner{0.0, 0.0, 0.0};
  int level = 0;
  double side = 1.0;
  double dist = 0.0;        // dist(I, E)
  double dist4 = 0.0;       // dist(4I, E)
  Point center{0.0, 0.0, 0.0};
  double delta_center = 0.0;  // delta at the centre
  double volume = 0.0;

  Box bounds(int dim) const;
  double diameter(int dim) const { return side * std::sqrt(static_cast<double>(dim)); }
};

struct WhitneyBandReport {
  int band_violations = 0;
  int touching_pairs = 0;
  int touching_violations = 0;
  int overlap_violations = 0;
  double min_lower_ratio = 0.0;  // min dist(4I)/diam
  double max_upper_ratio = 0.0;  // max dist(I)/diam
  bool pass() const { return band_violations == 0 && touching_violations == 0 && overlap_violations == 0; }
};

class WhitneyDecomposition {
 public:
  int dim() const { return dim_; }
  const Box& window() const { return window_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  const std::vector<WhitneyBox>& boxes() const { return boxes_; }
  const WhitneyBox& box(int id) const { return boxes_[id]; }
  std::size_t size() const { return boxes_.size(); }
  const std::vector<int>& level(int k) const { return by_level_[k - k_min_]; }

  /// Points of the window with delta above this are covered, except far
  /// top-level tiles (reported in far_excluded_volume).
  double floor_scale() const { return floor_scale_; }
  double near_excluded_volume() const { return near_excluded_; }
  double far_excluded_volume() const { return far_excluded_; }
  double covered_volume() const;

  /// Box with the given level and lattice coordinates, or -1.
  int find(int level, const std::array<std::int64_t, 3>& key) const;
  /// Box whose half-open cell contains p, or -1.
  int box_containing(const Point& p) const;

  WhitneyBandReport check() const;

  friend WhitneyDecomposition build_whitney(const BoundarySet&, const Box&, int, int);
  friend WhitneyDecomposition whitney_from_json(const Json&, const BoundarySet&);

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 4>& k) const;
  };
  std::array<std::int64_t, 3> lattice(const Point& p, int level) const;
  void index();

  int dim_ = 2;
  Box window_;
  int k_min_ = 0;
  int k_max_ = 0;
  double floor_scale_ = 0.0;
  double near_excluded_ = 0.0;
  double far_excluded_ = 0.0;
  std::vector<WhitneyBox> boxes_;
  std::vector<std::vector<int>> by_level_;
  std::unordered_map<std::array<std::int64_t, 4>, int, KeyHash> lookup_;
};

/// Dyadic Whitney boxes of the window, side 2^-k for k in [k_min, k_max],
/// subdivided until 4 diam(I) <= dist(4I, E). The window corners must be
/// multiples of 2^-k_min.
WhitneyDecomposition build_whitney(const BoundarySet& set, const Box& window, int k_min, int k_max);

/// Quadrature nodes of a box: 2^(refine*dim) equal sub-box centres.
std::vector<std::pair<Point, double>> box_quadrature(const WhitneyBox& box, int refine, int dim);

/// dist(Q, I) between the member nodes of a cube and a closed box.
double cube_box_distance(const DyadicGrid& grid, const BoundarySet& set, int q, const WhitneyBox& box, int dim);

/// Whitney regions U_Q = C_{Q, beta}, for every cube of a grid.
class WhitneyRegions {
 public:
  WhitneyRegions(const WhitneyDecomposition& whit, const DyadicGrid& grid, const BoundarySet& set);

  /// Smallest power of two in [1, 64] making every C_{Q, beta} nonempty, 0
  /// when none does.
  double beta_star() const { return beta_star_; }
  bool beta_ok() const { return beta_star_ > 0.0; }
  /// min over I in the scale band of dist(Q, I)/l(Q); infinity if the band
  /// has no box within 64 l(Q).
  double min_distance_ratio(int q) const { return min_ratio_[q]; }
  /// U_Q at beta_star.
  const std::vector<int>& region(int q) const { return regions_[q]; }

  /// C_{Q, beta} for an arbitrary beta (recomputed).
  std::vector<int> collection(int q, double beta) const;

  const WhitneyDecomposition& whitney() const { return *whit_; }
  const DyadicGrid& grid() const { return *grid_; }
  const BoundarySet& set() const { return *set_; }

 private:
  std::vector<std::pair<int, double>> candidates(int q, double radius_over_len) const;

  const WhitneyDecomposition* whit_;
  const DyadicGrid* grid_;
  const BoundarySet* set_;
  std::vector<KdTree> level_trees_;
  std::vector<std::vector<int>> level_ids_;
  std::vector<Box> cube_bounds_;
  std::vector<double> min_ratio_;
  std::vector<std::vector<int>> regions_;
  double beta_star_ = 0.0;
};

std::vector<int> collection_CQ(const WhitneyDecomposition& whit, const DyadicGrid& grid, const BoundarySet& set,
                               int q, double beta);

enum class ConeKind { Gamma, GammaTruncated, GammaQ, GammaQEps, SawtoothGammaQ, SawtoothGammaQEps, TQ };

std::string to_string(ConeKind kind);

struct ConeSpec {
  ConeKind kind = ConeKind::Gamma;
  int q = -1;
  double eps = 0.0;
  const std::vector<int>* family = nullptr;  // stopping cubes for sawtooth kinds
};

struct ConeRegion {
  ConeKind kind = ConeKind::Gamma;
  double beta = 0.0;
  std::vector<int> boxes;  // ascending, no repeats
  std::vector<int> cubes;  // the cubes Q' whose regions were joined
};

/// Cubes Q' ∋ x admitted by the spec, coarsest first.
std::vector<int> cone_cubes(const WhitneyRegions& regions, int x, const ConeSpec& spec);
ConeRegion cone(const WhitneyRegions& regions, int x, const ConeSpec& spec);

/// True when Q' is not contained in any member of the family.
bool is_good(const DyadicGrid& grid, int q_prime, const std::vector<int>& family);

bool includes(const std::vector<int>& big, const std::vector<int>& small);
std::vector<int> set_union(const std::vector<int>& a, const std::vector<int>& b);

Json to_json(const WhitneyDecomposition& whit);
WhitneyDecomposition whitney_from_json(const Json& doc, const BoundarySet& set);

}  // namespace adrsq
