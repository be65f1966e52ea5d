#include "adrsq/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace adrsq {

namespace {
constexpr int kLeafSize = 8;

double box_point_dist2(const Box& b, const Point& p, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = 0.0;
    if (p[i] < b.lo[i]) d = b.lo[i] - p[i];
    else if (p[i] > b.hi[i]) d = p[i] - b.hi[i];
    s += d * d;
  }
  return s;
}

double box_box_dist2(const Box& a, const Box& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = 0.0;
    if (a.hi[i] < b.lo[i]) d = b.lo[i] - a.hi[i];
    else if (b.hi[i] < a.lo[i]) d = a.lo[i] - b.hi[i];
    s += d * d;
  }
  return s;
}
}  // namespace

KdTree::KdTree(std::span<const Point> points, int dim)
    : points_(points.begin(), points.end()), order_(points.size()), dim_(dim) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  Node node;
  node.begin = begin;
  node.end = end;
  for (int i = 0; i < kMaxDim; ++i) {
    node.bounds.lo[i] = std::numeric_limits<double>::infinity();
    node.bounds.hi[i] = -std::numeric_limits<double>::infinity();
  }
  for (int k = begin; k < end; ++k) {
    const Point& p = points_[order_[k]];
    for (int i = 0; i < kMaxDim; ++i) {
      node.bounds.lo[i] = std::min(node.bounds.lo[i], p[i]);
      node.bounds.hi[i] = std::max(node.bounds.hi[i], p[i]);
    }
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  double widest = -1.0;
  for (int i = 0; i < dim_; ++i) {
    const double w = node.bounds.hi[i] - node.bounds.lo[i];
    if (w > widest) {
      widest = w;
      axis = i;
    }
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Hit KdTree::nearest(const Point& p, const std::function<bool(int)>& accept,
                            double max_distance) const {
  Hit best;
  best.distance = max_distance;
  if (!nodes_.empty()) nearest_rec(0, p, accept, best);
  if (best.index < 0) best.distance = std::numeric_limits<double>::infinity();
  return best;
}

void KdTree::nearest_rec(int id, const Point& p, const std::function<bool(int)>& accept,
                         Hit& best) const {
  const Node& node = nodes_[id];
  const double bound = best.distance;
  if (box_point_dist2(node.bounds, p, dim_) >= bound * bound) return;
  if (node.left < 0) {
    for (int k = node.begin; k < node.end; ++k) {
      const int idx = order_[k];
      const double d = distance(points_[idx], p);
      // Ties resolve to the lowest index for reproducibility.
      if (d < best.distance || (d == best.distance && best.index >= 0 && idx < best.index)) {
        if (accept && !accept(idx)) continue;
        best.distance = d;
        best.index = idx;
      }
    }
    return;
  }
  const double dl = box_point_dist2(nodes_[node.left].bounds, p, dim_);
  const double dr = box_point_dist2(nodes_[node.right].bounds, p, dim_);
  if (dl <= dr) {
    nearest_rec(node.left, p, accept, best);
    nearest_rec(node.right, p, accept, best);
  } else {
    nearest_rec(node.right, p, accept, best);
    nearest_rec(node.left, p, accept, best);
  }
}

std::vector<int> KdTree::within(const Point& p, double r) const {
  std::vector<int> out;
  if (!nodes_.empty()) within_rec(0, p, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::within_rec(int id, const Point& p, double r2, std::vector<int>& out) const {
  const Node& node = nodes_[id];
  if (box_point_dist2(node.bounds, p, dim_) > r2) return;
  if (node.left < 0) {
    for (int k = node.begin; k < node.end; ++k) {
      const int idx = order_[k];
      if (dist2(points_[idx], p) <= r2) out.push_back(idx);
    }
    return;
  }
  within_rec(node.left, p, r2, out);
  within_rec(node.right, p, r2, out);
}

double KdTree::distance_to_box(const Box& box) const {
  if (nodes_.empty()) return std::numeric_limits<double>::infinity();
  double best2 = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    if (box_box_dist2(node.bounds, box, dim_) >= best2) continue;
    if (node.left < 0) {
      for (int k = node.begin; k < node.end; ++k) {
        best2 = std::min(best2, box_point_dist2(box, points_[order_[k]], dim_));
      }
      if (best2 == 0.0) break;
      continue;
    }
    const double dl = box_box_dist2(nodes_[node.left].bounds, box, dim_);
    const double dr = box_box_dist2(nodes_[node.right].bounds, box, dim_);
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return std::sqrt(best2);
}

}  // namespace adrsq
