#include "adrsq/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace adrsq {

namespace {

constexpr double kPi = std::numbers::pi;

double param_or(const Json& params, const char* key, double fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_number()) throw ConstructionError(std::string("parameter '") + key + "' must be a number");
  return v.get<double>();
}

Point point_or(const Json& params, const char* key, const Point& fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_array() || v.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ConstructionError(std::string("parameter '") + key + "' must be a coordinate array");
  }
  Point p{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i].get<double>();
  return p;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  Point ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const Point q{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return distance(p, q);
}

// Liang-Barsky clip of the planar segment a-b against the rectangle.
bool segment_hits_rect(const Point& a, const Point& b, const Box& box) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double d[2] = {b[0] - a[0], b[1] - a[1]};
  for (int i = 0; i < 2; ++i) {
    const double lo = box.lo[i] - a[i];
    const double hi = box.hi[i] - a[i];
    if (d[i] == 0.0) {
      if (lo > 0.0 || hi < 0.0) return false;
      continue;
    }
    double ta = lo / d[i];
    double tb = hi / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double segment_box_distance(const Point& a, const Point& b, const Box& box) {
  if (segment_hits_rect(a, b, box)) return 0.0;
  double best = std::min(point_box_distance(a, box, 2), point_box_distance(b, box, 2));
  for (int cx = 0; cx < 2; ++cx) {
    for (int cy = 0; cy < 2; ++cy) {
      const Point c{cx ? box.hi[0] : box.lo[0], cy ? box.hi[1] : box.lo[1], 0.0};
      best = std::min(best, point_segment_distance(c, a, b));
    }
  }
  return best;
}

// Range of |X - c| over a box.
std::pair<double, double> radial_range(const Box& box, const Point& c, int dim) {
  double near2 = 0.0;
  double far2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double lo = box.lo[i] - c[i];
    const double hi = box.hi[i] - c[i];
    double nd = 0.0;
    if (lo > 0.0) nd = lo;
    else if (hi < 0.0) nd = -hi;
    near2 += nd * nd;
    const double fd = std::max(std::abs(lo), std::abs(hi));
    far2 += fd * fd;
  }
  return {std::sqrt(near2), std::sqrt(far2)};
}

// Cells of a 1-D truncated model: uniform core with uniform margin, then a
// geometrically graded pad on both sides. Returns (left edge, width) pairs.
std::vector<std::pair<double, double>> line_cells(double a, double b, int resolution, double margin,
                                                  double pad, double grade) {
  const double h = (b - a) / resolution;
  const int margin_cells = static_cast<int>(std::llround(margin / h));
  std::vector<double> pad_widths;
  if (pad > 0.0) {
    double covered = 0.0;
    double w = h * grade;
    while (covered + 1e-12 * pad < pad) {
      const double cell = std::min(w, pad - covered);
      pad_widths.push_back(cell);
      covered += cell;
      w *= grade;
    }
  }
  std::vector<std::pair<double, double>> cells;
  const double core_lo = a - margin_cells * h;
  double x = core_lo;
  for (auto it = pad_widths.rbegin(); it != pad_widths.rend(); ++it) x -= *it;
  for (auto it = pad_widths.rbegin(); it != pad_widths.rend(); ++it) {
    cells.emplace_back(x, *it);
    x += *it;
  }
  const int uniform = resolution + 2 * margin_cells;
  for (int i = 0; i < uniform; ++i) cells.emplace_back(core_lo + i * h, h);
  x = core_lo + uniform * h;
  for (double w : pad_widths) {
    cells.emplace_back(x, w);
    x += w;
  }
  return cells;
}

}  // namespace

std::string to_string(SetKind kind) {
  switch (kind) {
    case SetKind::SegmentLine: return "SegmentLine";
    case SetKind::LipschitzGraph: return "LipschitzGraph";
    case SetKind::Circle: return "Circle";
    case SetKind::Sphere: return "Sphere";
    case SetKind::CantorFourCorner: return "CantorFourCorner";
  }
  return "unknown";
}

SetKind set_kind_from_string(const std::string& name) {
  for (SetKind k : {SetKind::SegmentLine, SetKind::LipschitzGraph, SetKind::Circle, SetKind::Sphere,
                    SetKind::CantorFourCorner}) {
    if (to_string(k) == name) return k;
  }
  throw ConstructionError("unknown boundary set kind '" + name + "'");
}

BoundarySet BoundarySet::make(SetKind kind, int resolution, const Json& params) {
  if (!params.is_object()) throw ConstructionError("boundary set params must be an object");
  BoundarySet s;
  s.kind_ = kind;
  s.params_ = params;
  s.resolution_ = resolution;

  switch (kind) {
    case SetKind::SegmentLine: {
      if (resolution < 2) throw ConstructionError("resolution must be at least 2");
      const double a = param_or(params, "a", 0.0);
      const double b = param_or(params, "b", 1.0);
      const double margin = param_or(params, "margin", 0.0);
      const double pad = param_or(params, "pad", 0.0);
      const double grade = param_or(params, "grade", 1.05);
      if (!(b > a)) throw ConstructionError("segment requires b > a");
      if (margin < 0.0 || pad < 0.0) throw ConstructionError("segment margin and pad must be >= 0");
      if (pad > 0.0 && !(grade > 1.0)) throw ConstructionError("segment grade must exceed 1");
      s.n_ = 1;
      s.bounded_ = false;
      s.spacing_ = (b - a) / resolution;
      s.core_origin_ = a;
      const auto cells = line_cells(a, b, resolution, margin, pad, grade);
      for (const auto& [left, w] : cells) {
        const double x = left + 0.5 * w;
        s.nodes_.push_back({Point{x, 0.0, 0.0}, w});
        s.param_coord_.push_back(x);
        const bool core = x > a && x < b;
        s.core_.push_back(core ? 1 : 0);
      }
      s.param_lo_ = cells.front().first;
      s.param_hi_ = cells.back().first + cells.back().second;
      s.polyline_.push_back({Point{s.param_lo_, 0.0, 0.0}, Point{s.param_hi_, 0.0, 0.0}});
      s.model_extent_ = s.param_hi_ - s.param_lo_;
      s.center_ = Point{0.5 * (a + b), 0.0, 0.0};
      s.adr_constant_ = 2.5;
      break;
    }
    case SetKind::LipschitzGraph: {
      if (resolution < 2) throw ConstructionError("resolution must be at least 2");
      const double a = param_or(params, "a", 0.0);
      const double b = param_or(params, "b", 1.0);
      const double lip = param_or(params, "lipschitz", 1.0);
      const double period = param_or(params, "period", 0.25);
      const double margin = param_or(params, "margin", 0.0);
      if (lip < 0.0) throw ConstructionError("Lipschitz constant must be >= 0");
      if (!(b > a)) throw ConstructionError("graph requires b > a");
      if (!(period > 0.0)) throw ConstructionError("graph period must be positive");
      if (margin < 0.0) throw ConstructionError("graph margin must be >= 0");
      s.n_ = 1;
      s.bounded_ = false;
      const double h = (b - a) / resolution;
      s.spacing_ = h * std::sqrt(1.0 + lip * lip);
      s.core_origin_ = a;
      // Zig-zag graph g(x) = L * dist(x, period * Z), slopes +-L.
      auto g = [&](double x) {
        const double r = x - period * std::floor(x / period);
        return lip * std::min(r, period - r);
      };
      const int margin_cells = static_cast<int>(std::llround(margin / h));
      const int count = resolution + 2 * margin_cells;
      const double lo = a - margin_cells * h;
      for (int i = 0; i < count; ++i) {
        const double x = lo + (i + 0.5) * h;
        s.nodes_.push_back({Point{x, g(x), 0.0}, h * std::sqrt(1.0 + lip * lip)});
        s.param_coord_.push_back(x);
        s.core_.push_back(x > a && x < b ? 1 : 0);
      }
      s.param_lo_ = lo;
      s.param_hi_ = lo + count * h;
      std::vector<double> xs{s.param_lo_};
      const double half = 0.5 * period;
      for (double v = half * (std::floor(s.param_lo_ / half) + 1.0); v < s.param_hi_; v += half) xs.push_back(v);
      xs.push_back(s.param_hi_);
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        s.polyline_.push_back({Point{xs[i], g(xs[i]), 0.0}, Point{xs[i + 1], g(xs[i + 1]), 0.0}});
      }
      s.model_extent_ = std::hypot(s.param_hi_ - s.param_lo_, lip * half);
      s.center_ = Point{0.5 * (a + b), 0.0, 0.0};
      s.adr_constant_ = 2.5 * std::sqrt(1.0 + lip * lip);
      break;
    }
    case SetKind::Circle: {
      if (resolution < 2) throw ConstructionError("resolution must be at least 2");
      const double r = param_or(params, "radius", 1.0);
      if (!(r > 0.0)) throw ConstructionError("circle radius must be positive");
      s.n_ = 1;
      s.radius_ = r;
      s.center_ = point_or(params, "center", Point{0.0, 0.0, 0.0});
      s.center_[2] = 0.0;
      const double dtheta = 2.0 * kPi / resolution;
      for (int i = 0; i < resolution; ++i) {
        const double th = (i + 0.5) * dtheta;
        s.nodes_.push_back({Point{s.center_[0] + r * std::cos(th), s.center_[1] + r * std::sin(th), 0.0}, r * dtheta});
        s.param_coord_.push_back(th);
        s.core_.push_back(1);
      }
      s.spacing_ = r * dtheta;
      s.diameter_ = 2.0 * r;
      s.model_extent_ = 2.0 * r;
      s.arcs_level0_ = static_cast<int>(std::ceil(2.0 * kPi * r));
      s.adr_constant_ = 3.5;
      break;
    }
    case SetKind::Sphere: {
      if (resolution < 2) throw ConstructionError("resolution must be at least 2");
      const double r = param_or(params, "radius", 1.0);
      if (!(r > 0.0)) throw ConstructionError("sphere radius must be positive");
      s.n_ = 2;
      s.radius_ = r;
      s.center_ = point_or(params, "center", Point{0.0, 0.0, 0.0});
      const double golden = kPi * (3.0 - std::sqrt(5.0));
      const double w = 4.0 * kPi * r * r / resolution;
      for (int i = 0; i < resolution; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / resolution;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        s.nodes_.push_back({Point{s.center_[0] + r * rho * std::cos(phi), s.center_[1] + r * rho * std::sin(phi),
                                  s.center_[2] + r * z},
                            w});
        s.param_coord_.push_back(static_cast<double>(i));
        s.core_.push_back(1);
      }
      s.spacing_ = std::sqrt(w);
      s.diameter_ = 2.0 * r;
      s.model_extent_ = 2.0 * r;
      s.adr_constant_ = 4.0;
      break;
    }
    case SetKind::CantorFourCorner: {
      int depth = 0;
      if (params.contains("depth")) {
        depth = static_cast<int>(param_or(params, "depth", 0.0));
      } else {
        if (resolution < 4) throw ConstructionError("resolution must be at least 4 for the Cantor set");
        depth = static_cast<int>(std::lround(std::log(static_cast<double>(resolution)) / std::log(4.0)));
      }
      if (depth < 1 || depth > 10) throw ConstructionError("Cantor depth must lie in [1, 10]");
      s.n_ = 1;
      s.cantor_depth_ = depth;
      const std::int64_t count = std::int64_t{1} << (2 * depth);
      s.resolution_ = static_cast<int>(count);
      const double leaf = std::ldexp(1.0, -2 * depth);
      for (std::int64_t addr = 0; addr < count; ++addr) {
        double x = 0.0;
        double y = 0.0;
        double side = 1.0;
        for (int g = 1; g <= depth; ++g) {
          const int digit = static_cast<int>((addr >> (2 * (depth - g))) & 3);
          x += (digit & 1) * 0.75 * side;
          y += (digit >> 1) * 0.75 * side;
          side *= 0.25;
        }
        s.nodes_.push_back({Point{x + 0.5 * leaf, y + 0.5 * leaf, 0.0}, leaf});
        s.param_coord_.push_back(static_cast<double>(addr));
        s.core_.push_back(1);
      }
      s.spacing_ = leaf;
      s.distance_error_ = std::sqrt(0.5) * leaf;
      s.diameter_ = std::sqrt(2.0);
      s.model_extent_ = std::sqrt(2.0);
      s.center_ = Point{0.5, 0.5, 0.0};
      s.adr_constant_ = 8.0;
      break;
    }
  }
  s.finalize();
  return s;
}

void BoundarySet::finalize() {
  std::vector<Point> pts;
  pts.reserve(nodes_.size());
  for (const auto& nd : nodes_) pts.push_back(nd.point);
  index_ = KdTree(pts, ambient_dim());
}

void BoundarySet::replace_nodes(std::vector<BoundaryNode> nodes) {
  if (nodes.size() != nodes_.size()) throw ConstructionError("node count does not match the set geometry");
  for (const auto& nd : nodes) {
    if (!(nd.weight >= 0.0)) throw ConstructionError("node weights must be nonnegative");
  }
  nodes_ = std::move(nodes);
  finalize();
}

double BoundarySet::total_measure() const {
  double s = 0.0;
  for (const auto& nd : nodes_) s += nd.weight;
  return s;
}

double BoundarySet::local_spacing(int i) const {
  if (n_ == 1 && (kind_ == SetKind::SegmentLine)) return std::max(spacing_, nodes_[i].weight);
  return spacing_;
}

std::vector<int> BoundarySet::core_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (core_[i]) out.push_back(i);
  }
  return out;
}

double BoundarySet::truncation_margin(int i) const {
  if (bounded_) return std::numeric_limits<double>::infinity();
  const double x = param_coord_[i];
  return std::min(x - param_lo_, param_hi_ - x);
}

double BoundarySet::delta(const Point& x) const {
  switch (kind_) {
    case SetKind::SegmentLine:
    case SetKind::LipschitzGraph: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& seg : polyline_) best = std::min(best, point_segment_distance(x, seg.a, seg.b));
      return best;
    }
    case SetKind::Circle: {
      Point p = x;
      p[2] = 0.0;
      const double rho = distance(p, center_);
      return std::hypot(rho - radius_, x[2]);
    }
    case SetKind::Sphere:
      return std::abs(distance(x, center_) - radius_);
    case SetKind::CantorFourCorner:
      return index_.nearest(x).distance;
  }
  return 0.0;
}

double BoundarySet::distance_to_box(const Box& box) const {
  switch (kind_) {
    case SetKind::SegmentLine:
    case SetKind::LipschitzGraph: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& seg : polyline_) best = std::min(best, segment_box_distance(seg.a, seg.b, box));
      return best;
    }
    case SetKind::Circle:
    case SetKind::Sphere: {
      const auto [near, far] = radial_range(box, center_, ambient_dim());
      if (near <= radius_ && radius_ <= far) return 0.0;
      return far < radius_ ? radius_ - far : near - radius_;
    }
    case SetKind::CantorFourCorner:
      return index_.distance_to_box(box);
  }
  return 0.0;
}

bool BoundarySet::has_canonical_cells() const { return kind_ != SetKind::Sphere; }

std::optional<std::int64_t> BoundarySet::canonical_cell(int i, int level) const {
  switch (kind_) {
    case SetKind::SegmentLine:
    case SetKind::LipschitzGraph: {
      const double t = std::ldexp(param_coord_[i] - core_origin_, level);
      return static_cast<std::int64_t>(std::floor(t));
    }
    case SetKind::Circle: {
      if (level < 0 || level > 40) return std::nullopt;
      const double arcs = static_cast<double>(arcs_level0_) * std::ldexp(1.0, level);
      return static_cast<std::int64_t>(std::floor(param_coord_[i] / (2.0 * kPi) * arcs));
    }
    case SetKind::CantorFourCorner: {
      if (level < 0 || level > 2 * cantor_depth_) return std::nullopt;
      const auto addr = static_cast<std::int64_t>(param_coord_[i]);
      const int g = level / 2;
      const std::int64_t prefix = addr >> (2 * (cantor_depth_ - g));
      if (level % 2 == 0) return prefix;
      const std::int64_t digit = (addr >> (2 * (cantor_depth_ - g - 1))) & 3;
      return prefix * 2 + (digit & 1);
    }
    case SetKind::Sphere:
      return std::nullopt;
  }
  return std::nullopt;
}

double sigma_ball(const BoundarySet& set, const SurfaceBall& ball) {
  double s = 0.0;
  for (int i : set.index().within(set.point(ball.center), ball.radius)) s += set.weight(i);
  return s;
}

AdrReport verify_adr(const BoundarySet& set, int sample_count, std::uint64_t seed) {
  if (set.size() < 2) throw Error("verify_adr needs at least two nodes");
  if (sample_count < 1) throw Error("verify_adr needs sample_count >= 1");
  const std::vector<int> centers = set.bounded() ? [&] {
    std::vector<int> all(set.size());
    for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
    return all;
  }()
                                                 : set.core_nodes();
  if (centers.empty()) throw Error("verify_adr: no admissible centres");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half_extent = 0.5 * (set.bounded() ? set.diameter() : set.model_extent());

  AdrReport rep;
  rep.c_lower = std::numeric_limits<double>::infinity();
  rep.c_upper = 0.0;
  const int max_attempts = 100 * sample_count;
  for (int attempt = 0; attempt < max_attempts && rep.samples < sample_count; ++attempt) {
    const int x = centers[pick(rng)];
    const double r_lo = 8.0 * set.local_spacing(x);
    const double r_hi = std::min(half_extent, set.truncation_margin(x));
    if (!(r_hi > r_lo)) continue;
    const double r = r_lo * std::pow(r_hi / r_lo, unit(rng));
    const double ratio = sigma_ball(set, {x, r}) / std::pow(r, set.n());
    rep.c_lower = std::min(rep.c_lower, ratio);
    rep.c_upper = std::max(rep.c_upper, ratio);
    ++rep.samples;
  }
  if (rep.samples == 0) {
    // Coarse clouds have no radius between 8 spacings and diam/2; nothing
    // can be tested, which is reported as samples = 0.
    rep.c_lower = 0.0;
    rep.pass = true;
    return rep;
  }
  rep.pass = rep.c_lower > 0.0 && std::max(rep.c_upper, 1.0 / rep.c_lower) <= set.adr_constant();
  return rep;
}

Json to_json(const BoundarySet& set) {
  Json doc;
  doc["kind"] = to_string(set.kind());
  doc["n"] = set.n();
  Json params = set.params();
  params["resolution"] = set.resolution();
  doc["params"] = params;
  Json nodes = Json::array();
  for (const auto& nd : set.nodes()) {
    Json coords = Json::array();
    for (int i = 0; i < set.ambient_dim(); ++i) coords.push_back(nd.point[i]);
    nodes.push_back(Json::array({coords, nd.weight}));
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

BoundarySet boundary_set_from_json(const Json& doc) {
  for (const char* key : {"kind", "n", "params", "nodes"}) {
    if (!doc.contains(key)) throw ConstructionError(std::string("boundary set document lacks '") + key + "'");
  }
  const SetKind kind = set_kind_from_string(doc.at("kind").get<std::string>());
  Json params = doc.at("params");
  const int resolution = params.value("resolution", 0);
  params.erase("resolution");
  BoundarySet set = BoundarySet::make(kind, resolution, params);
  if (doc.at("n").get<int>() != set.n()) throw ConstructionError("boundary set document has inconsistent n");
  std::vector<BoundaryNode> nodes;
  for (const auto& entry : doc.at("nodes")) {
    BoundaryNode nd;
    const auto& coords = entry.at(0);
    for (std::size_t i = 0; i < coords.size() && i < static_cast<std::size_t>(kMaxDim); ++i) {
      nd.point[i] = coords[i].get<double>();
    }
    nd.weight = entry.at(1).get<double>();
    nodes.push_back(nd);
  }
  set.replace_nodes(std::move(nodes));
  return set;
}

}  // namespace adrsq
