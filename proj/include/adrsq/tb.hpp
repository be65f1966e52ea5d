#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adrsq/operators.hpp"
#include "adrsq/whitney.hpp"

namespace adrsq {

/// b_Q for every cube of one grid. The imaginary parts are optional (empty
/// when the system is real).
struct TestSystem {
  std::string generator;
  double C0 = 2.0;
  double p = 2.0;
  std::vector<BoundaryFunction> re;  // indexed by cube id
  std::vector<BoundaryFunction> im;  // empty, or indexed by cube id

  bool complex() const { return !im.empty(); }
};

enum class TestSystemKind { Constant1, HalfIndicator, RandomAccretive, Zero, Constant };

std::string to_string(TestSystemKind kind);
TestSystemKind test_system_kind_from_string(const std::string& name);

struct TestSystemSpec {
  TestSystemKind kind = TestSystemKind::Constant1;
  double value = 1.0;                // Constant
  std::optional<std::uint64_t> seed; // RandomAccretive (mandatory there)
  bool complex = false;              // RandomAccretive: add an imaginary part
};

/// Built-in generators. Constant1 is 1_Q, HalfIndicator is 1 on the first
/// child of Q (1_Q for leaves), Constant is value * 1_Q, Zero is 0, and
/// RandomAccretive damps random subcubes of Q and resamples until
/// the accretivity and size bounds and Re E_Q b_Q > 1/C0 hold.
TestSystem make_test_system(const DyadicGrid& grid, const BoundarySet& set, const TestSystemSpec& spec, double C0,
                            double p);

/// Per-box integrals of |Theta f|^2 against dY/delta^(n+1) and dY/delta,
/// by box quadrature. Only boxes flagged in `computed` carry values.
struct ThetaField {
  int refine = 0;
  std::vector<double> mass;       // sum_q |Theta f(Y_q)|^2 |I_q| / delta(Y_q)^(n+1)
  std::vector<double> mass_flat;  // sum_q |Theta f(Y_q)|^2 |I_q| / delta(Y_q)
  std::vector<char> computed;

  ThetaField scaled(double lambda) const;  // field of lambda f
};

/// Theta f at the quadrature points of the given boxes (all when null).
/// `im` may be empty.
ThetaField theta_field(const Kernel& kernel, const BoundarySet& set, const WhitneyDecomposition& whit,
                       std::span<const double> re, std::span<const double> im, int refine,
                       const std::vector<int>* boxes = nullptr);

/// Boxes of T_Q: the union of U_Q' over Q' inside Q.
std::vector<int> tent_boxes(const WhitneyRegions& regions, int q);

/// sum over the cone's boxes of the field mass. Throws if a box was not
/// computed.
double local_square_function(const ConeRegion& cone, const ThetaField& field);
double local_square_function(const std::vector<int>& boxes, const ThetaField& field);

enum class ConeVariant { Gamma, Sawtooth, Truncated, SawtoothTruncated };

/// How overlapping regions of the cone's cubes are counted: once (the cone
/// as a set) or once per cube (the sum appearing after Fubini).
enum class Multiplicity { Union, Sum };

struct FunctionalSpec {
  ConeVariant variant = ConeVariant::Gamma;
  double eps = 0.0;                           // Truncated kinds
  const std::vector<int>* family = nullptr;  // Sawtooth kinds
  double exponent = 2.0;                     // q
  Multiplicity multiplicity = Multiplicity::Union;
};

/// (1/sigma(Q)) sum_{x in Q} w(x) LSF(cone rooted at Q)^(q/2). Cones are
/// shared by all nodes of a leaf cube, so each is built once.
double carleson_functional(const WhitneyRegions& regions, const ThetaField& field, int q, const FunctionalSpec& spec);

/// g(x) = LSF(cone(x))^(q/2) for every node of Q, in member order.
std::vector<double> cone_values(const WhitneyRegions& regions, const ThetaField& field, int q,
                                const FunctionalSpec& spec);

struct TruncationContext {
  Box window;
  int whitney_k_min = 0;
  int whitney_k_max = 0;
  int grid_k_min = 0;
  int grid_k_max = 0;
  double floor_scale = 0.0;
  double eps = 0.0;
  int refine = 0;
};

TruncationContext truncation_context(const WhitneyRegions& regions, int refine, double eps = 0.0);

/// sum over all boxes of the flat mass.
double global_square_norm(const ThetaField& field);

struct StoppingFamily {
  int parent = -1;
  std::vector<int> members;  // ascending cube ids
  bool degenerate = false;   // Q itself satisfies the stopping condition
  double packing_ratio = 0.0;  // sum sigma(Q_k) / sigma(Q)
  double eta_packing = 1.0;
  bool maximal = true;       // every member's parent violates the condition
};

/// Top-down scan of the subcubes of Q: Q' enters iff
/// Re sum_{Q'} b w <= sigma(Q')/C0 and no ancestor inside Q entered.
StoppingFamily stopping_time(const DyadicGrid& grid, const BoundarySet& set, int q, std::span<const double> b_re,
                             double C0);

/// Good(Q) by the disjoint-or-larger definition.
std::vector<int> good_cubes(const DyadicGrid& grid, int q, const std::vector<int>& family);
/// Good(Q) as the subcubes not contained in any family member.
std::vector<int> good_cubes_by_containment(const DyadicGrid& grid, int q, const std::vector<int>& family);

/// min over Q' in Good(Q) of |E_Q' b|; infinity when Good(Q) is empty.
double good_certificate(const DyadicGrid& grid, const BoundarySet& set, const std::vector<int>& good,
                        std::span<const double> b_re, std::span<const double> b_im);

/// Per-cube check rows: value and pass per condition.
struct CubeRow {
  int cube = -1;
  int level = 0;
  double value = 0.0;
  bool pass = true;
};

struct TbHypothesisReport {
  std::vector<CubeRow> eq1;  // |sum_Q b w| / sigma(Q), must be >= 1/C0
  std::vector<CubeRow> eq2;  // sum_E |b|^p w / sigma(Q), must be <= C0
  std::vector<CubeRow> eq3;  // Gamma_Q functional of Theta b_Q at exponent p, must be <= C0
  int worst_eq1 = -1, worst_eq2 = -1, worst_eq3 = -1;  // cube ids
  bool pass_eq1 = true, pass_eq2 = true, pass_eq3 = true;
  bool pass() const { return pass_eq1 && pass_eq2 && pass_eq3; }
};

TbHypothesisReport verify_tb_hypotheses(const TestSystem& system, const WhitneyRegions& regions, const Kernel& kernel,
                                        int refine);

struct PackingReport {
  std::vector<CubeRow> rows;  // value = packing ratio
  double min_eta = 1.0;
  int worst = -1;
  bool pass = true;
};

PackingReport verify_packing(const DyadicGrid& grid, const std::vector<StoppingFamily>& families, double eta_min);

/// sup over cubes of the Truncated(eps), q = 2 functional of the given
/// (Theta 1) field.
double K_epsilon(const WhitneyRegions& regions, const ThetaField& theta1, double eps);

/// sigma({x in Q : g_Q(x) > N}) / sigma(Q), g_Q = LSF(Gamma_Q(x))^(p/2).
double level_set_fraction(const WhitneyRegions& regions, const ThetaField& theta1, int q, double N, double p);

/// alpha_Q per cube and its Carleson norm
/// sup_Q0 sum_{Q in Q0} alpha_Q sigma(Q) / sigma(Q0).
double carleson_norm(const DyadicGrid& grid, std::span<const double> alpha);

struct EmbeddingResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double norm = 0.0;
  double ratio = 0.0;  // lhs / (norm rhs), 0 when lhs = 0
};

EmbeddingResult carleson_embedding_check(const DyadicGrid& grid, const BoundarySet& set, std::span<const double> alpha,
                                         std::span<const double> f);

struct T1Report {
  double carleson_sup = 0.0;
  int worst_cube = -1;
  std::vector<CubeRow> rows;           // per cube, the Gamma_Q functional of Theta 1
  std::vector<double> global_ratios;   // per test function
  std::vector<double> l2_norms_squared;
  bool pass = false;
};

T1Report t1_check(const WhitneyRegions& regions, const ThetaField& theta1, const Kernel& kernel,
                  const std::vector<BoundaryFunction>& test_functions, int refine, double carleson_bound,
                  double ratio_bound);

struct TailReport {
  double r0 = 0.0;
  std::vector<int> k;
  std::vector<double> contributions;
  std::vector<double> successive_ratios;
  double total = 0.0;
  double l2_norm_squared = 0.0;
  double ratio_to_l2 = 0.0;
};

struct TailQuadrature {
  int radial_points = 12;
  int angular_points = 96;
};

/// sum over k = 3..k_max of the annulus integrals of |Theta f|^2 dX/delta(X)
/// outside B(centre, 8 r0), r0 = diam(E).
TailReport bounded_tail(const BoundarySet& set, const Kernel& kernel, std::span<const double> f, int k_max_annulus,
                        const TailQuadrature& quad = {});

/// One report per function, sharing the kernel evaluations.
std::vector<TailReport> bounded_tail(const BoundarySet& set, const Kernel& kernel,
                                     const std::vector<BoundaryFunction>& fs, int k_max_annulus,
                                     const TailQuadrature& quad = {});

}  // namespace adrsq
