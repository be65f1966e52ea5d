#include "adrsq/whitney.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace adrsq {

namespace {

double box_box_distance(const Box& a, const Box& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = 0.0;
    if (a.hi[i] < b.lo[i]) d = b.lo[i] - a.hi[i];
    else if (b.hi[i] < a.lo[i]) d = a.lo[i] - b.hi[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Box node_bounds(const BoundarySet& set, const std::vector<int>& members) {
  Box b;
  for (int i = 0; i < kMaxDim; ++i) {
    b.lo[i] = std::numeric_limits<double>::infinity();
    b.hi[i] = -std::numeric_limits<double>::infinity();
  }
  for (int m : members) {
    for (int i = 0; i < kMaxDim; ++i) {
      b.lo[i] = std::min(b.lo[i], set.point(m)[i]);
      b.hi[i] = std::max(b.hi[i], set.point(m)[i]);
    }
  }
  return b;
}

double half_diagonal(const Box& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += 0.25 * (b.hi[i] - b.lo[i]) * (b.hi[i] - b.lo[i]);
  return std::sqrt(s);
}

Point box_mid(const Box& b) {
  return {0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1]), 0.5 * (b.lo[2] + b.hi[2])};
}

WhitneyBox make_box(const std::array<std::int64_t, 3>& key, int level, int dim) {
  WhitneyBox b;
  b.level = level;
  b.side = std::ldexp(1.0, -level);
  for (int i = 0; i < dim; ++i) {
    b.corner[i] = static_cast<double>(key[i]) * b.side;
    b.center[i] = b.corner[i] + 0.5 * b.side;
  }
  b.volume = std::pow(b.side, dim);
  return b;
}

void measure_box(const BoundarySet& set, WhitneyBox& b, int dim) {
  const Box bb = b.bounds(dim);
  b.dist = set.distance_to_box(bb);
  b.dist4 = set.distance_to_box(dilate(bb, 4.0, dim));
}

}  // namespace

Box WhitneyBox::bounds(int dim) const {
  Box b;
  for (int i = 0; i < dim; ++i) {
    b.lo[i] = corner[i];
    b.hi[i] = corner[i] + side;
  }
  return b;
}

std::size_t WhitneyDecomposition::KeyHash::operator()(const std::array<std::int64_t, 4>& k) const {
  std::size_t h = 1469598103934665603ull;
  for (auto v : k) {
    h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::array<std::int64_t, 3> WhitneyDecomposition::lattice(const Point& p, int level) const {
  std::array<std::int64_t, 3> key{0, 0, 0};
  for (int i = 0; i < dim_; ++i) key[i] = static_cast<std::int64_t>(std::floor(std::ldexp(p[i], level)));
  return key;
}

void WhitneyDecomposition::index() {
  by_level_.assign(k_max_ - k_min_ + 1, {});
  lookup_.clear();
  for (int id = 0; id < static_cast<int>(boxes_.size()); ++id) {
    const auto& b = boxes_[id];
    by_level_[b.level - k_min_].push_back(id);
    const auto key = lattice(b.center, b.level);
    lookup_[{b.level, key[0], key[1], key[2]}] = id;
  }
}

int WhitneyDecomposition::find(int level, const std::array<std::int64_t, 3>& key) const {
  const auto it = lookup_.find({level, key[0], key[1], key[2]});
  return it == lookup_.end() ? -1 : it->second;
}

int WhitneyDecomposition::box_containing(const Point& p) const {
  for (int k = k_min_; k <= k_max_; ++k) {
    const int id = find(k, lattice(p, k));
    if (id >= 0) return id;
  }
  return -1;
}

double WhitneyDecomposition::covered_volume() const {
  double v = 0.0;
  for (const auto& b : boxes_) v += b.volume;
  return v;
}

WhitneyBandReport WhitneyDecomposition::check() const {
  WhitneyBandReport rep;
  rep.min_lower_ratio = std::numeric_limits<double>::infinity();
  const double tol = 1e-12;
  for (const auto& b : boxes_) {
    const double diam = b.diameter(dim_);
    const bool ok = 4.0 * diam <= b.dist4 * (1.0 + tol) && b.dist4 <= b.dist * (1.0 + tol) + tol &&
                    b.dist <= 40.0 * diam * (1.0 + tol);
    if (!ok) ++rep.band_violations;
    rep.min_lower_ratio = std::min(rep.min_lower_ratio, b.dist4 / diam);
    rep.max_upper_ratio = std::max(rep.max_upper_ratio, b.dist / diam);
  }

  // Closures touching: every box at least as large as I that meets the
  // closure of I contains one of the same-level neighbour cells of I.
  std::vector<std::array<int, 3>> dirs;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        if (dim_ < 3 && c != 0) continue;
        if (a == 0 && b == 0 && c == 0) continue;
        dirs.push_back({a, b, c});
      }
    }
  }
  for (int id = 0; id < static_cast<int>(boxes_.size()); ++id) {
    const auto& I = boxes_[id];
    std::set<int> seen;
    for (const auto& d : dirs) {
      Point q = I.center;
      for (int i = 0; i < dim_; ++i) q[i] += d[i] * I.side;
      for (int k = k_min_; k <= I.level; ++k) {
        const int j = find(k, lattice(q, k));
        if (j < 0) continue;
        if (seen.insert(j).second) {
          ++rep.touching_pairs;
          const double ratio = boxes_[j].side / I.side;
          if (ratio < 0.25 || ratio > 4.0) ++rep.touching_violations;
        }
        break;
      }
    }
    // A coarser box containing the centre of I would overlap it.
    for (int k = k_min_; k < I.level; ++k) {
      if (find(k, lattice(I.center, k)) >= 0) ++rep.overlap_violations;
    }
  }
  std::mt19937_64 rng(12345);
  if (boxes_.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, boxes_.size() - 1);
    for (int t = 0; t < 2000; ++t) {
      const auto a = pick(rng);
      const auto b = pick(rng);
      if (a == b) continue;
      bool overlap = true;
      for (int i = 0; i < dim_; ++i) {
        const double lo = std::max(boxes_[a].corner[i], boxes_[b].corner[i]);
        const double hi = std::min(boxes_[a].corner[i] + boxes_[a].side, boxes_[b].corner[i] + boxes_[b].side);
        if (!(lo < hi)) overlap = false;
      }
      if (overlap) ++rep.overlap_violations;
    }
  }
  return rep;
}

WhitneyDecomposition build_whitney(const BoundarySet& set, const Box& window, int k_min, int k_max) {
  const int dim = set.ambient_dim();
  if (k_max < k_min) throw ConstructionError("whitney requires k_min <= k_max");
  const double top = std::ldexp(1.0, -k_min);
  std::array<std::int64_t, 3> lo{0, 0, 0};
  std::array<std::int64_t, 3> hi{0, 0, 0};
  for (int i = 0; i < dim; ++i) {
    if (!(window.hi[i] > window.lo[i])) throw ConstructionError("whitney window must have positive extent");
    const double a = window.lo[i] / top;
    const double b = window.hi[i] / top;
    if (std::abs(a - std::round(a)) > 1e-9 || std::abs(b - std::round(b)) > 1e-9) {
      throw ConstructionError("whitney window corners must be multiples of 2^-k_min");
    }
    lo[i] = std::llround(a);
    hi[i] = std::llround(b);
  }
  if (std::ldexp(1.0, -k_max) < 8.0 * set.distance_error()) {
    throw ConstructionError("whitney floor scale 2^-k_max is below 8x the distance-field error");
  }

  WhitneyDecomposition w;
  w.dim_ = dim;
  w.window_ = window;
  w.k_min_ = k_min;
  w.k_max_ = k_max;
  w.floor_scale_ = 8.0 * std::sqrt(static_cast<double>(dim)) * std::ldexp(1.0, -k_max);

  std::vector<WhitneyBox> pending;
  for (auto x = lo[0]; x < hi[0]; ++x) {
    for (auto y = lo[1]; y < hi[1]; ++y) {
      for (auto z = lo[2]; z < (dim == 3 ? hi[2] : lo[2] + 1); ++z) pending.push_back(make_box({x, y, z}, k_min, dim));
    }
  }
  for (int k = k_min; k <= k_max && !pending.empty(); ++k) {
    parallel_for(pending.size(), [&](std::size_t i) { measure_box(set, pending[i], dim); });
    std::vector<WhitneyBox> next;
    for (const auto& b : pending) {
      const double diam = b.diameter(dim);
      if (b.dist4 >= 4.0 * diam) {
        if (b.dist <= 40.0 * diam) w.boxes_.push_back(b);
        else w.far_excluded_ += b.volume;
      } else if (k < k_max) {
        std::array<std::int64_t, 3> base{0, 0, 0};
        for (int i = 0; i < dim; ++i) base[i] = 2 * std::llround(b.corner[i] / b.side);
        for (int c = 0; c < (1 << dim); ++c) {
          std::array<std::int64_t, 3> key = base;
          for (int i = 0; i < dim; ++i) key[i] += (c >> i) & 1;
          next.push_back(make_box(key, k + 1, dim));
        }
      } else {
        w.near_excluded_ += b.volume;
      }
    }
    pending = std::move(next);
  }
  if (w.boxes_.empty()) throw ConstructionError("empty whitney decomposition: window lies below the floor scale");
  std::sort(w.boxes_.begin(), w.boxes_.end(), [](const WhitneyBox& a, const WhitneyBox& b) {
    if (a.level != b.level) return a.level < b.level;
    for (int i = kMaxDim - 1; i >= 0; --i) {
      if (a.corner[i] != b.corner[i]) return a.corner[i] < b.corner[i];
    }
    return false;
  });
  parallel_for(w.boxes_.size(), [&](std::size_t i) { w.boxes_[i].delta_center = set.delta(w.boxes_[i].center); });
  w.index();
  return w;
}

std::vector<std::pair<Point, double>> box_quadrature(const WhitneyBox& box, int refine, int dim) {
  const int per_axis = 1 << std::max(0, refine);
  const double h = box.side / per_axis;
  std::vector<std::pair<Point, double>> out;
  const int total = static_cast<int>(std::pow(per_axis, dim));
  out.reserve(total);
  for (int t = 0; t < total; ++t) {
    Point p{0.0, 0.0, 0.0};
    int rest = t;
    for (int i = 0; i < dim; ++i) {
      p[i] = box.corner[i] + (rest % per_axis + 0.5) * h;
      rest /= per_axis;
    }
    out.emplace_back(p, std::pow(h, dim));
  }
  return out;
}

double cube_box_distance(const DyadicGrid& grid, const BoundarySet& set, int q, const WhitneyBox& box, int dim) {
  const Box b = box.bounds(dim);
  double d = std::numeric_limits<double>::infinity();
  for (int m : grid.cube(q).members) d = std::min(d, point_box_distance(set.point(m), b, dim));
  return d;
}

WhitneyRegions::WhitneyRegions(const WhitneyDecomposition& whit, const DyadicGrid& grid, const BoundarySet& set)
    : whit_(&whit), grid_(&grid), set_(&set) {
  const int dim = whit.dim();
  for (int k = whit.k_min(); k <= whit.k_max(); ++k) {
    std::vector<Point> pts;
    for (int id : whit.level(k)) pts.push_back(whit.box(id).center);
    level_ids_.push_back(whit.level(k));
    level_trees_.emplace_back(pts, dim);
  }
  for (const auto& c : grid.cubes()) cube_bounds_.push_back(node_bounds(set, c.members));

  const double cap = 64.0;
  min_ratio_.assign(grid.size(), std::numeric_limits<double>::infinity());
  parallel_for(grid.size(), [&](std::size_t q) {
    for (const auto& [id, r] : candidates(static_cast<int>(q), cap)) min_ratio_[q] = std::min(min_ratio_[q], r);
  });
  double worst = 0.0;
  for (double r : min_ratio_) worst = std::max(worst, r);
  beta_star_ = 0.0;
  for (double beta = 1.0; beta <= cap; beta *= 2.0) {
    if (worst <= beta) {
      beta_star_ = beta;
      break;
    }
  }
  regions_.assign(grid.size(), {});
  if (beta_ok()) {
    parallel_for(grid.size(), [&](std::size_t q) { regions_[q] = collection(static_cast<int>(q), beta_star_); });
  }
}

std::vector<std::pair<int, double>> WhitneyRegions::candidates(int q, double radius_over_len) const {
  const auto& cube = grid_->cube(q);
  const int dim = whit_->dim();
  const double ell = cube.length;
  const double radius = radius_over_len * ell;
  const Box& cb = cube_bounds_[q];
  const Point mid = box_mid(cb);
  std::vector<std::pair<int, double>> out;
  for (int L = std::max(whit_->k_min(), cube.level - 3); L <= std::min(whit_->k_max(), cube.level + 3); ++L) {
    const double side = std::ldexp(1.0, -L);
    // l(I)/8 <= l(Q) <= 8 l(I)
    if (!(side / 8.0 <= ell && ell <= 8.0 * side)) continue;
    const auto& tree = level_trees_[L - whit_->k_min()];
    const double reach = radius + half_diagonal(cb, dim) + 0.5 * side * std::sqrt(static_cast<double>(dim));
    for (int local : tree.within(mid, reach)) {
      const int id = level_ids_[L - whit_->k_min()][local];
      const auto& box = whit_->box(id);
      if (box_box_distance(cb, box.bounds(dim), dim) > radius) continue;
      const double d = cube_box_distance(*grid_, *set_, q, box, dim);
      if (d <= radius) out.emplace_back(id, d / ell);
    }
  }
  return out;
}

std::vector<int> WhitneyRegions::collection(int q, double beta) const {
  std::vector<int> ids;
  for (const auto& [id, r] : candidates(q, beta)) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<int> collection_CQ(const WhitneyDecomposition& whit, const DyadicGrid& grid, const BoundarySet& set,
                               int q, double beta) {
  if (!(beta > 0.0)) throw Error("collection_CQ requires beta > 0");
  const auto& cube = grid.cube(q);
  std::vector<int> ids;
  for (int id = 0; id < static_cast<int>(whit.size()); ++id) {
    const auto& box = whit.box(id);
    if (!(box.side / 8.0 <= cube.length && cube.length <= 8.0 * box.side)) continue;
    if (cube_box_distance(grid, set, q, box, whit.dim()) <= beta * cube.length) ids.push_back(id);
  }
  return ids;
}

std::string to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Gamma: return "Gamma";
    case ConeKind::GammaTruncated: return "GammaTruncated";
    case ConeKind::GammaQ: return "GammaQ";
    case ConeKind::GammaQEps: return "GammaQEps";
    case ConeKind::SawtoothGammaQ: return "SawtoothGammaQ";
    case ConeKind::SawtoothGammaQEps: return "SawtoothGammaQEps";
    case ConeKind::TQ: return "TQ";
  }
  return "unknown";
}

bool is_good(const DyadicGrid& grid, int q_prime, const std::vector<int>& family) {
  for (int qk : family) {
    if (grid.contains(qk, q_prime)) return false;
  }
  return true;
}

std::vector<int> cone_cubes(const WhitneyRegions& regions, int x, const ConeSpec& spec) {
  const auto& grid = regions.grid();
  const bool rooted = spec.kind != ConeKind::Gamma && spec.kind != ConeKind::GammaTruncated;
  const bool truncated = spec.kind == ConeKind::GammaTruncated || spec.kind == ConeKind::GammaQEps ||
                         spec.kind == ConeKind::SawtoothGammaQEps;
  const bool sawtooth = spec.kind == ConeKind::SawtoothGammaQ || spec.kind == ConeKind::SawtoothGammaQEps;
  if (rooted && (spec.q < 0 || spec.q >= static_cast<int>(grid.size()))) throw Error("cone: kind needs a root cube");
  if (truncated && !(spec.eps > 0.0)) throw Error("cone: truncated kinds need eps > 0");
  if (sawtooth && spec.family == nullptr) throw Error("cone: sawtooth kinds need a stopping family");

  std::vector<int> out;
  if (spec.kind == ConeKind::TQ) return descendants(grid, spec.q);

  if (x < 0 || x >= grid.node_count() || grid.cube_of(x, grid.k_min()) < 0) {
    throw Error("cone: node is not covered by the grid");
  }
  if (rooted) {
    const auto& root = grid.cube(spec.q);
    if (grid.cube_of(x, root.level) != spec.q) throw Error("cone: x is not in Q");
  }
  for (int k = grid.k_min(); k <= grid.k_max(); ++k) {
    const int qp = grid.cube_of(x, k);
    const auto& c = grid.cube(qp);
    if (rooted && c.level < grid.cube(spec.q).level) continue;
    if (truncated && !(spec.eps < c.length && c.length < 1.0 / spec.eps)) continue;
    if (sawtooth && !is_good(grid, qp, *spec.family)) continue;
    out.push_back(qp);
  }
  return out;
}

ConeRegion cone(const WhitneyRegions& regions, int x, const ConeSpec& spec) {
  ConeRegion r;
  r.kind = spec.kind;
  r.beta = regions.beta_star();
  r.cubes = cone_cubes(regions, x, spec);
  for (int q : r.cubes) {
    const auto& u = regions.region(q);
    r.boxes.insert(r.boxes.end(), u.begin(), u.end());
  }
  std::sort(r.boxes.begin(), r.boxes.end());
  r.boxes.erase(std::unique(r.boxes.begin(), r.boxes.end()), r.boxes.end());
  return r;
}

bool includes(const std::vector<int>& big, const std::vector<int>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

std::vector<int> set_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Json to_json(const WhitneyDecomposition& whit) {
  Json doc;
  Json lo = Json::array();
  Json hi = Json::array();
  for (int i = 0; i < whit.dim(); ++i) {
    lo.push_back(whit.window().lo[i]);
    hi.push_back(whit.window().hi[i]);
  }
  doc["window"] = {{"lo", lo}, {"hi", hi}};
  doc["k_min"] = whit.k_min();
  doc["k_max"] = whit.k_max();
  doc["floor_scale"] = whit.floor_scale();
  Json boxes = Json::array();
  for (const auto& b : whit.boxes()) {
    Json corner = Json::array();
    for (int i = 0; i < whit.dim(); ++i) corner.push_back(b.corner[i]);
    boxes.push_back({{"corner", corner}, {"side", b.side}, {"dist", b.dist}});
  }
  doc["boxes"] = std::move(boxes);
  return doc;
}

WhitneyDecomposition whitney_from_json(const Json& doc, const BoundarySet& set) {
  WhitneyDecomposition w;
  w.dim_ = set.ambient_dim();
  const auto& lo = doc.at("window").at("lo");
  const auto& hi = doc.at("window").at("hi");
  for (int i = 0; i < w.dim_; ++i) {
    w.window_.lo[i] = lo.at(i).get<double>();
    w.window_.hi[i] = hi.at(i).get<double>();
  }
  w.k_min_ = doc.at("k_min").get<int>();
  w.k_max_ = doc.at("k_max").get<int>();
  w.floor_scale_ = doc.value("floor_scale", 8.0 * std::sqrt(double(w.dim_)) * std::ldexp(1.0, -w.k_max_));
  for (const auto& jb : doc.at("boxes")) {
    const double side = jb.at("side").get<double>();
    const int level = static_cast<int>(std::llround(-std::log2(side)));
    std::array<std::int64_t, 3> key{0, 0, 0};
    for (int i = 0; i < w.dim_; ++i) key[i] = std::llround(jb.at("corner").at(i).get<double>() / side);
    auto b = make_box(key, level, w.dim_);
    measure_box(set, b, w.dim_);
    b.delta_center = set.delta(b.center);
    w.boxes_.push_back(b);
  }
  w.index();
  return w;
}

}  // namespace adrsq
