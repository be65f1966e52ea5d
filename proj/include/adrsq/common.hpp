#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace adrsq {

// Ambient points live in at most R^3; unused trailing coordinates stay 0 so
// that Euclidean distances need no dimension argument.
inline constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;

inline double dist2(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < kMaxDim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(const Point& a, const Point& b) { return std::sqrt(dist2(a, b)); }

inline double norm(const Point& a) { return distance(a, Point{0.0, 0.0, 0.0}); }

/// Axis-aligned closed box [lo, hi] in the ambient space.
struct Box {
  Point lo{0.0, 0.0, 0.0};
  Point hi{0.0, 0.0, 0.0};
};

/// Distance from a point to a box; zero inside.
inline double point_box_distance(const Point& p, const Box& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = 0.0;
    if (p[i] < b.lo[i]) {
      d = b.lo[i] - p[i];
    } else if (p[i] > b.hi[i]) {
      d = p[i] - b.hi[i];
    }
    s += d * d;
  }
  return std::sqrt(s);
}

/// Concentric dilate of a box by `factor`.
inline Box dilate(const Box& b, double factor, int dim) {
  Box out = b;
  for (int i = 0; i < dim; ++i) {
    const double c = 0.5 * (b.lo[i] + b.hi[i]);
    const double h = 0.5 * (b.hi[i] - b.lo[i]) * factor;
    out.lo[i] = c - h;
    out.hi[i] = c + h;
  }
  return out;
}

// Errors. Construction problems, numerical breakdowns and malformed input
// are reported through exceptions; report-style operations never throw for
// failed checks.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class SingularEvaluationError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  ScenarioError(std::string field, const std::string& what)
      : Error("scenario field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Worker threads used by the embarrassingly parallel loops (Θ evaluation,
// per-cube functionals). 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once; the
/// caller is responsible for writing results to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Verbosity is read once from ADRSQ_LOG (error|warn|info|debug).
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace adrsq
