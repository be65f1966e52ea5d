#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "adrsq/common.hpp"

namespace adrsq {

/// Static kd-tree over a point cloud with bounding-box pruning. Supports
/// filtered nearest-neighbour queries, radius queries and box-to-cloud
/// distances. Immutable after construction, so queries may run concurrently.
class KdTree {
 public:
  struct Hit {
    int index = -1;
    double distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  KdTree(std::span<const Point> points, int dim);

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  /// Nearest point with index accepted by `accept` (all if empty) strictly
  /// closer than `max_distance`. Returns index -1 when none qualifies.
  Hit nearest(const Point& p,
              const std::function<bool(int)>& accept = {},
              double max_distance = std::numeric_limits<double>::infinity()) const;

  /// Indices with |q - p| <= r, sorted ascending.
  std::vector<int> within(const Point& p, double r) const;

  /// Distance from the box to the nearest cloud point.
  double distance_to_box(const Box& box) const;

 private:
  struct Node {
    Box bounds;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void nearest_rec(int node, const Point& p, const std::function<bool(int)>& accept, Hit& best) const;
  void within_rec(int node, const Point& p, double r2, std::vector<int>& out) const;

  std::vector<Point> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int dim_ = 2;
};

}  // namespace adrsq
