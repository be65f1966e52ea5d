#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "adrsq/dyadic.hpp"

namespace adrsq {

using BoundaryFunction = std::vector<double>;

enum class KernelKind { PoissonDerivative, RieszType, Envelope, Constant };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// psi(X, y) together with the (alpha, C) of its decay and Hölder bounds.
///   PoissonDerivative  t d/dt P_t(s) = (t/pi)(s^2 - t^2)/(s^2 + t^2)^2, n = 1,
///                      s = X_1 - y_1, t = X_2 - y_2
///   RieszType          delta(X) (X_d - y_d) / |X - y|^(n+2)
///   Envelope           coefficient * delta(X)^alpha / |X - y|^(n+alpha)
///   Constant           coefficient
/// Every kind is multiplied by `scale`.
struct Kernel {
  KernelKind kind = KernelKind::PoissonDerivative;
  int n = 1;
  double alpha = 1.0;
  double c_psi = 1.0;
  double scale = 1.0;
  double coefficient = 1.0;

  double operator()(const Point& x, double delta_x, const Point& y) const;
};

/// Theta f at each point: sum_y psi(X, y) f(y) w(y). Throws
/// SingularEvaluationError for points within the distance error of E.
std::vector<double> theta_apply(const Kernel& kernel, const BoundarySet& set, std::span<const double> f,
                                std::span<const Point> points);

/// Same, with delta(X) supplied by the caller.
std::vector<double> theta_apply(const Kernel& kernel, const BoundarySet& set, std::span<const double> f,
                                std::span<const Point> points, std::span<const double> deltas);

/// Several functions at once; each kernel value is evaluated a single time.
std::vector<std::vector<double>> theta_apply_many(const Kernel& kernel, const BoundarySet& set,
                                                  const std::vector<BoundaryFunction>& fs,
                                                  std::span<const Point> points);

struct KernelReport {
  bool decay_ok = false;
  bool holder_ok = false;
  double measured_C_decay = 0.0;
  double measured_C_holder = 0.0;
  int samples = 0;
  double min_delta = 0.0;  // smallest delta(X) sampled
};

KernelReport verify_kernel(const Kernel& kernel, const BoundarySet& set, int sample_count, std::uint64_t seed);

/// Sparse symmetric table on the grid nodes.
struct SparseKernel {
  std::vector<int> row_start;  // size rows + 1
  std::vector<int> cols;       // node ids
  std::vector<double> values;
  std::vector<int> rows;       // node id of each row

  /// (K f)(row i) = sum_j K(i, j) f(j) w(j)
  std::vector<double> apply(const BoundarySet& set, std::span<const double> f) const;
};

struct ApproxIdentityFamily {
  int j_min = 0;
  int j_max = 0;
  double eps = 1.0;
  double support_factor = 2.0;  // S_j(x, y) = 0 once |x - y| >= support_factor 2^-j
  std::vector<SparseKernel> S;  // index j - j_min
  std::vector<int> sweeps;      // normalisation sweeps used per level
  std::vector<double> marginal_error;
  const DyadicGrid* grid = nullptr;

  const SparseKernel& at(int j) const { return S[j - j_min]; }
  /// S_j f on the grid nodes (zero elsewhere).
  BoundaryFunction apply_S(const BoundarySet& set, int j, std::span<const double> f) const;
  /// D_j f = S_j f - S_{j-1} f, j_min < j <= j_max.
  BoundaryFunction apply_D(const BoundarySet& set, int j, std::span<const double> f) const;
};

/// S_j for j in [j_min, j_max] (defaults to the grid levels): the mollifier
/// (1 - r^2)_+^eps at radius 2 2^-j, scaled symmetrically until both
/// marginals are 1 within 1e-10. Throws ConvergenceError after 100 sweeps.
ApproxIdentityFamily build_approx_identity(const DyadicGrid& grid, const BoundarySet& set, double eps_smooth,
                                           int j_min = std::numeric_limits<int>::min(),
                                           int j_max = std::numeric_limits<int>::max());

/// Max over rows and columns of |sum S_j(.,y) w(y) - 1|.
double marginal_deviation(const SparseKernel& s, const BoundarySet& set);

/// sum_x w(x) (sum_j |D_j f(x)|^2)^(p/2)
double square_sum_Dj(const ApproxIdentityFamily& family, const BoundarySet& set, std::span<const double> f, double p);

/// ||f - sum_j D_j D_j f||_2 over the grid nodes; reported, no target.
double reproducing_residual(const ApproxIdentityFamily& family, const BoundarySet& set, std::span<const double> f);

double dyadic_average(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> f, int q);

/// M f(x) = max over cubes Q containing x of the average of |f| on Q; zero
/// at nodes outside the grid.
BoundaryFunction dyadic_maximal(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> f);

/// Reads "node_id,value" rows (an optional header line is skipped).
BoundaryFunction read_boundary_function_csv(const std::string& path, const BoundarySet& set);

double l2_norm_squared(const BoundarySet& set, std::span<const double> f);

}  // namespace adrsq
