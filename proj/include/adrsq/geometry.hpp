#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adrsq/common.hpp"
#include "adrsq/kdtree.hpp"

namespace adrsq {

using Json = nlohmann::ordered_json;

enum class SetKind { SegmentLine, LipschitzGraph, Circle, Sphere, CantorFourCorner };

std::string to_string(SetKind kind);
SetKind set_kind_from_string(const std::string& name);

/// A quadrature node on E: a point of the set with its share of σ.
struct BoundaryNode {
  Point point{0.0, 0.0, 0.0};
  double weight = 0.0;
};

/// Δ(x, r) = B(x, r) ∩ E, centred at a node of the set.
struct SurfaceBall {
  int center = 0;
  double radius = 0.0;
};

/// Discretised Ahlfors-David regular set: a weighted node cloud plus the
/// closed-form geometry of the model when one exists.
///
/// Unbounded models (SegmentLine, LipschitzGraph) are truncated. Their nodes
/// are split into a *core* window, on which dyadic grids are built, and an
/// optional uniform margin and geometrically graded pad that only serve as
/// quadrature for integrals over E.
class BoundarySet {
 public:
  /// Builds one of the shipped models. `resolution` is the node count of the
  /// core window (for the Cantor set the node count 4^depth, unless
  /// params.depth is given). Throws ConstructionError on invalid input.
  static BoundarySet make(SetKind kind, int resolution, const Json& params = Json::object());

  SetKind kind() const { return kind_; }
  int n() const { return n_; }
  int ambient_dim() const { return n_ + 1; }
  int resolution() const { return resolution_; }
  const Json& params() const { return params_; }

  const std::vector<BoundaryNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const Point& point(int i) const { return nodes_[i].point; }
  double weight(int i) const { return nodes_[i].weight; }
  double total_measure() const;

  double adr_constant() const { return adr_constant_; }
  bool bounded() const { return bounded_; }
  /// Diameter of the model; infinity for unbounded kinds.
  double diameter() const { return bounded_ ? diameter_ : std::numeric_limits<double>::infinity(); }
  /// Diameter of the truncated node model (finite for every kind).
  double model_extent() const { return model_extent_; }
  /// Centre of the smallest shipped ball containing E (bounded kinds).
  const Point& center() const { return center_; }

  /// Resolution scale of the uniform part of the discretisation.
  double spacing() const { return spacing_; }
  /// Spacing at node i; larger than spacing() inside a graded pad.
  double local_spacing(int i) const;
  /// Upper bound on |delta() - dist(X, E)|; zero for closed-form kinds.
  double distance_error() const { return distance_error_; }

  bool in_core(int i) const { return core_[i] != 0; }
  std::vector<int> core_nodes() const;
  /// Distance from node i to the truncation boundary of an unbounded model;
  /// infinity for bounded kinds.
  double truncation_margin(int i) const;

  /// dist(X, E), exact for closed-form kinds, nearest node otherwise.
  double delta(const Point& x) const;
  /// dist(box, E) with the same conventions as delta().
  double distance_to_box(const Box& box) const;

  const KdTree& index() const { return index_; }

  /// Canonical nested cell label of node i at dyadic level k, for kinds whose
  /// parameter domain carries a natural dyadic structure (segment, graph,
  /// circle arcs, Cantor IFS cells). std::nullopt when the kind has none or
  /// the level is out of range for it.
  std::optional<std::int64_t> canonical_cell(int i, int level) const;
  bool has_canonical_cells() const;

  /// Replaces node weights/points, keeping the geometry. Used by the JSON
  /// loader; the node count must match.
  void replace_nodes(std::vector<BoundaryNode> nodes);

 private:
  struct Segment {
    Point a{0.0, 0.0, 0.0};
    Point b{0.0, 0.0, 0.0};
  };

  void finalize();

  SetKind kind_ = SetKind::SegmentLine;
  int n_ = 1;
  int resolution_ = 0;
  Json params_;
  std::vector<BoundaryNode> nodes_;
  std::vector<std::uint8_t> core_;
  std::vector<double> param_coord_;  // x-parameter, angle, or IFS address
  double adr_constant_ = 1.0;
  bool bounded_ = true;
  double diameter_ = 0.0;
  double model_extent_ = 0.0;
  Point center_{0.0, 0.0, 0.0};
  double spacing_ = 0.0;
  double distance_error_ = 0.0;
  // Closed-form geometry.
  std::vector<Segment> polyline_;
  double radius_ = 0.0;
  double param_lo_ = 0.0;
  double param_hi_ = 0.0;
  double core_origin_ = 0.0;
  int arcs_level0_ = 0;
  int cantor_depth_ = 0;
  KdTree index_;
};

/// σ̂(Δ): sum of weights of nodes within `radius` of the centre node.
double sigma_ball(const BoundarySet& set, const SurfaceBall& ball);

struct AdrReport {
  double c_lower = 0.0;  // min σ̂(B(x,r))/r^n over samples
  double c_upper = 0.0;  // max σ̂(B(x,r))/r^n over samples
  int samples = 0;
  bool pass = false;
};

/// Samples (x, r) with 8·spacing(x) < r < min(diam/2, truncation margin) and
/// reports the tightest two-sided regularity constants seen.
AdrReport verify_adr(const BoundarySet& set, int sample_count, std::uint64_t seed);

inline double delta(const BoundarySet& set, const Point& x) { return set.delta(x); }

Json to_json(const BoundarySet& set);
BoundarySet boundary_set_from_json(const Json& doc);

}  // namespace adrsq
